#ifndef TROVE_H
#define TROVE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result codes of every fallible call.
typedef enum TroveStatus {
  TROVE_STATUS_OK = 0,
  // A pointer was null, a string was not UTF-8, or JSON did not parse.
  TROVE_STATUS_INVALID_ARGUMENT = 1,
  TROVE_STATUS_NOT_FOUND = 2,
  // The project moved past the envelope's expected revision.
  TROVE_STATUS_CONFLICT = 3,
  // The request was well-formed but broke a rule of the model.
  TROVE_STATUS_VALIDATION = 4,
  // The text recognition engine failed.
  TROVE_STATUS_ENGINE_FAILURE = 5,
  TROVE_STATUS_UNSUPPORTED = 6,
  // Storage failure or a bug; see the last error message.
  TROVE_STATUS_INTERNAL = 7,
} TroveStatus;

// Opaque engine handle.
typedef struct TroveEngine TroveEngine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Opens an engine over `data_dir`, or a purely in-memory engine when
// `data_dir` is null. Free with [`trove_engine_free`].
//
// # Safety
// `data_dir` must be null or a NUL-terminated string; `out` must be valid
// for writes.
enum TroveStatus trove_engine_open(const char *data_dir, struct TroveEngine **out);

// # Safety
// `engine` must be null or a handle from [`trove_engine_open`] that is not
// used afterwards.
void trove_engine_free(struct TroveEngine *engine);

// Message describing the last failure on this thread, or null. The
// pointer stays valid until the next call into this library on the same
// thread.
const char *trove_last_error(void);

// # Safety
// `s` must be null or a string returned by this library.
void trove_string_free(char *s);

// # Safety
// `data` and `len` must be null/0 or exactly a buffer returned by this
// library.
void trove_bytes_free(uint8_t *data, uintptr_t len);

// Creates a project; writes its JSON to `out_json`.
//
// # Safety
// Pointers must be valid; strings NUL-terminated.
enum TroveStatus trove_create_project(const struct TroveEngine *engine,
                                      const char *name,
                                      char **out_json);

// # Safety
// Pointers must be valid.
enum TroveStatus trove_list_projects(const struct TroveEngine *engine, char **out_json);

// Applies a mutation envelope `{"expected_revision", "op", "args"}`.
//
// # Safety
// Pointers must be valid; strings NUL-terminated.
enum TroveStatus trove_apply(const struct TroveEngine *engine,
                             const char *project_id,
                             const char *envelope_json,
                             char **out_json);

// Runs a capture; `kind` is one of `text`, `image`, `bookmark`, `region`,
// `tabs`. Writes `{"revision", "result"}`.
//
// # Safety
// Pointers must be valid; strings NUL-terminated.
enum TroveStatus trove_capture(const struct TroveEngine *engine,
                               const char *project_id,
                               const char *kind,
                               const char *payload_json,
                               char **out_json);

// # Safety
// Pointers must be valid; strings NUL-terminated.
enum TroveStatus trove_overview(const struct TroveEngine *engine,
                                const char *project_id,
                                char **out_json);

// Reader view of the card numbered `root` or, when `root` is negative, of
// the whole project.
//
// # Safety
// Pointers must be valid; strings NUL-terminated.
enum TroveStatus trove_reader(const struct TroveEngine *engine,
                              const char *project_id,
                              int64_t root,
                              char **out_json);

// Peek at a card by its `<project>:<card>` key.
//
// # Safety
// Pointers must be valid; strings NUL-terminated.
enum TroveStatus trove_peek(const struct TroveEngine *engine,
                            const char *card_key,
                            char **out_json);

// # Safety
// Pointers must be valid; strings NUL-terminated.
enum TroveStatus trove_project_stats(const struct TroveEngine *engine,
                                     const char *project_id,
                                     char **out_json);

// # Safety
// Pointers must be valid.
enum TroveStatus trove_corpus_report(const struct TroveEngine *engine, char **out_json);

// Canonical snapshot bytes of a project.
//
// # Safety
// Pointers must be valid; strings NUL-terminated.
enum TroveStatus trove_export(const struct TroveEngine *engine,
                              const char *project_id,
                              uint8_t **out_data,
                              uintptr_t *out_len);

// Imports a snapshot document as a new project.
//
// # Safety
// `data` must point to `len` readable bytes; other pointers must be valid.
enum TroveStatus trove_import(const struct TroveEngine *engine,
                              const uint8_t *data,
                              uintptr_t len,
                              char **out_json);

// Stores a blob; writes its hex hash to `out_hash`.
//
// # Safety
// `data` must point to `len` readable bytes; other pointers must be valid.
enum TroveStatus trove_put_asset(const struct TroveEngine *engine,
                                 const uint8_t *data,
                                 uintptr_t len,
                                 const char *media_type,
                                 char **out_hash);

// Fetches a blob and its media type.
//
// # Safety
// Pointers must be valid; strings NUL-terminated.
enum TroveStatus trove_get_asset(const struct TroveEngine *engine,
                                 const char *hash,
                                 uint8_t **out_data,
                                 uintptr_t *out_len,
                                 char **out_media_type);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TROVE_H */

//! C ABI over [`trove_core::service::Engine`].
//!
//! Conventions:
//! - Every fallible function returns a [`TroveStatus`]. On failure a message
//!   is available from [`trove_last_error`] on the same thread.
//! - Structured values cross the boundary as UTF-8 JSON, in the same shapes
//!   the HTTP API uses. Returned strings are NUL-terminated and owned by the
//!   caller, who releases them with [`trove_string_free`]; returned byte
//!   buffers are released with [`trove_bytes_free`].
//! - A `TroveEngine` may be used from several threads at once.
//! - On `TROVE_STATUS_CONFLICT`, `out_json` receives
//!   `{"current_revision": n}`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use trove_core::clock::SystemClock;
use trove_core::model::{CardId, CardKey, ProjectId};
use trove_core::service::{
    CaptureKind, CapturePayload, Engine, ErrorClass, MutationEnvelope, ServiceError,
};

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TroveStatus {
    Ok = 0,
    /// A pointer was null, a string was not UTF-8, or JSON did not parse.
    InvalidArgument = 1,
    NotFound = 2,
    /// The project moved past the envelope's expected revision.
    Conflict = 3,
    /// The request was well-formed but broke a rule of the model.
    Validation = 4,
    /// The text recognition engine failed.
    EngineFailure = 5,
    Unsupported = 6,
    /// Storage failure or a bug; see the last error message.
    Internal = 7,
}

/// Opaque engine handle.
pub struct TroveEngine {
    engine: Engine,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).expect("NULs were replaced");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

struct Failure {
    status: TroveStatus,
    message: String,
    /// JSON to hand back despite the failure (conflicts only).
    body: Option<String>,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Failure {
            status: TroveStatus::InvalidArgument,
            message: message.into(),
            body: None,
        }
    }
}

impl From<ServiceError> for Failure {
    fn from(err: ServiceError) -> Self {
        let body = match err {
            ServiceError::RevisionConflict { current } => {
                Some(serde_json::json!({ "current_revision": current }).to_string())
            }
            _ => None,
        };
        let status = match err.class() {
            ErrorClass::Validation => TroveStatus::Validation,
            ErrorClass::NotFound => TroveStatus::NotFound,
            ErrorClass::Conflict => TroveStatus::Conflict,
            ErrorClass::Engine => TroveStatus::EngineFailure,
            ErrorClass::Unsupported => TroveStatus::Unsupported,
            ErrorClass::Internal => TroveStatus::Internal,
        };
        Failure {
            status,
            message: err.to_string(),
            body,
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(err: serde_json::Error) -> Self {
        Failure::invalid(format!("malformed JSON: {err}"))
    }
}

/// Runs `body`, converting errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> TroveStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => TroveStatus::Ok,
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(_) => {
            set_last_error("internal panic");
            TroveStatus::Internal
        }
    }
}

unsafe fn engine_ref<'a>(engine: *const TroveEngine) -> Result<&'a Engine, Failure> {
    engine
        .as_ref()
        .map(|e| &e.engine)
        .ok_or_else(|| Failure::invalid("engine handle is null"))
}

unsafe fn str_arg<'a>(name: &str, value: *const c_char) -> Result<&'a str, Failure> {
    if value.is_null() {
        return Err(Failure::invalid(format!("`{name}` is null")));
    }
    CStr::from_ptr(value)
        .to_str()
        .map_err(|_| Failure::invalid(format!("`{name}` is not UTF-8")))
}

unsafe fn bytes_arg<'a>(name: &str, data: *const u8, len: usize) -> Result<&'a [u8], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(Failure::invalid(format!("`{name}` is null")));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn write_string(out: *mut *mut c_char, value: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::invalid("output pointer is null"));
    }
    let text = CString::new(value).map_err(|_| Failure::invalid("result contains NUL"))?;
    *out = text.into_raw();
    Ok(())
}

unsafe fn write_json<T: serde::Serialize>(out: *mut *mut c_char, value: &T) -> Result<(), Failure> {
    write_string(out, serde_json::to_string(value)?)
}

unsafe fn write_bytes(
    out: *mut *mut u8,
    out_len: *mut usize,
    bytes: Vec<u8>,
) -> Result<(), Failure> {
    if out.is_null() || out_len.is_null() {
        return Err(Failure::invalid("output pointer is null"));
    }
    let boxed = bytes.into_boxed_slice();
    *out_len = boxed.len();
    *out = Box::into_raw(boxed) as *mut u8;
    Ok(())
}

/// Like [`guard`], but on a conflict also writes the conflict body to
/// `out`.
unsafe fn guard_with_body(
    out: *mut *mut c_char,
    body: impl FnOnce() -> Result<(), Failure>,
) -> TroveStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => TroveStatus::Ok,
        Ok(Err(failure)) => {
            if let Some(text) = failure.body {
                if !out.is_null() {
                    if let Ok(c) = CString::new(text) {
                        *out = c.into_raw();
                    }
                }
            }
            set_last_error(&failure.message);
            failure.status
        }
        Err(_) => {
            set_last_error("internal panic");
            TroveStatus::Internal
        }
    }
}

/// Opens an engine over `data_dir`, or a purely in-memory engine when
/// `data_dir` is null. Free with [`trove_engine_free`].
///
/// # Safety
/// `data_dir` must be null or a NUL-terminated string; `out` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn trove_engine_open(
    data_dir: *const c_char,
    out: *mut *mut TroveEngine,
) -> TroveStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::invalid("output pointer is null"));
        }
        let clock = Arc::new(SystemClock);
        let engine = if data_dir.is_null() {
            Engine::in_memory(clock)
        } else {
            Engine::open(str_arg("data_dir", data_dir)?, clock)?
        };
        *out = Box::into_raw(Box::new(TroveEngine { engine }));
        Ok(())
    })
}

/// # Safety
/// `engine` must be null or a handle from [`trove_engine_open`] that is not
/// used afterwards.
#[no_mangle]
pub unsafe extern "C" fn trove_engine_free(engine: *mut TroveEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Message describing the last failure on this thread, or null. The
/// pointer stays valid until the next call into this library on the same
/// thread.
#[no_mangle]
pub extern "C" fn trove_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn trove_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `data` and `len` must be null/0 or exactly a buffer returned by this
/// library.
#[no_mangle]
pub unsafe extern "C" fn trove_bytes_free(data: *mut u8, len: usize) {
    if !data.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(data, len)));
    }
}

/// Creates a project; writes its JSON to `out_json`.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn trove_create_project(
    engine: *const TroveEngine,
    name: *const c_char,
    out_json: *mut *mut c_char,
) -> TroveStatus {
    guard(|| {
        let info = engine_ref(engine)?.create_project(str_arg("name", name)?)?;
        write_json(out_json, &info)
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn trove_list_projects(
    engine: *const TroveEngine,
    out_json: *mut *mut c_char,
) -> TroveStatus {
    guard(|| write_json(out_json, &engine_ref(engine)?.list_projects()))
}

/// Applies a mutation envelope `{"expected_revision", "op", "args"}`.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn trove_apply(
    engine: *const TroveEngine,
    project_id: *const c_char,
    envelope_json: *const c_char,
    out_json: *mut *mut c_char,
) -> TroveStatus {
    guard_with_body(out_json, || {
        let engine = engine_ref(engine)?;
        let id = ProjectId::from(str_arg("project_id", project_id)?);
        let envelope: MutationEnvelope =
            serde_json::from_str(str_arg("envelope_json", envelope_json)?)?;
        write_json(out_json, &engine.apply(&id, &envelope)?)
    })
}

/// Runs a capture; `kind` is one of `text`, `image`, `bookmark`, `region`,
/// `tabs`. Writes `{"revision", "result"}`.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn trove_capture(
    engine: *const TroveEngine,
    project_id: *const c_char,
    kind: *const c_char,
    payload_json: *const c_char,
    out_json: *mut *mut c_char,
) -> TroveStatus {
    guard_with_body(out_json, || {
        let engine = engine_ref(engine)?;
        let id = ProjectId::from(str_arg("project_id", project_id)?);
        let kind: CaptureKind = str_arg("kind", kind)?.parse()?;
        let payload: CapturePayload = serde_json::from_str(str_arg("payload_json", payload_json)?)?;
        write_json(out_json, &engine.capture(&id, kind, payload)?)
    })
}

/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn trove_overview(
    engine: *const TroveEngine,
    project_id: *const c_char,
    out_json: *mut *mut c_char,
) -> TroveStatus {
    guard(|| {
        let id = ProjectId::from(str_arg("project_id", project_id)?);
        write_json(out_json, &engine_ref(engine)?.overview(&id)?)
    })
}

/// Reader view of the card numbered `root` or, when `root` is negative, of
/// the whole project.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn trove_reader(
    engine: *const TroveEngine,
    project_id: *const c_char,
    root: i64,
    out_json: *mut *mut c_char,
) -> TroveStatus {
    guard(|| {
        let id = ProjectId::from(str_arg("project_id", project_id)?);
        let root = u64::try_from(root).ok().map(CardId);
        write_json(out_json, &engine_ref(engine)?.reader(&id, root)?)
    })
}

/// Peek at a card by its `<project>:<card>` key.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn trove_peek(
    engine: *const TroveEngine,
    card_key: *const c_char,
    out_json: *mut *mut c_char,
) -> TroveStatus {
    guard(|| {
        let raw = str_arg("card_key", card_key)?;
        let key: CardKey = raw
            .parse()
            .map_err(|()| Failure::invalid(format!("malformed card key `{raw}`")))?;
        write_json(out_json, &engine_ref(engine)?.peek(&key)?)
    })
}

/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn trove_project_stats(
    engine: *const TroveEngine,
    project_id: *const c_char,
    out_json: *mut *mut c_char,
) -> TroveStatus {
    guard(|| {
        let id = ProjectId::from(str_arg("project_id", project_id)?);
        write_json(out_json, &engine_ref(engine)?.stats(&id)?)
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn trove_corpus_report(
    engine: *const TroveEngine,
    out_json: *mut *mut c_char,
) -> TroveStatus {
    guard(|| write_json(out_json, &engine_ref(engine)?.corpus_report()))
}

/// Canonical snapshot bytes of a project.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn trove_export(
    engine: *const TroveEngine,
    project_id: *const c_char,
    out_data: *mut *mut u8,
    out_len: *mut usize,
) -> TroveStatus {
    guard(|| {
        let id = ProjectId::from(str_arg("project_id", project_id)?);
        write_bytes(out_data, out_len, engine_ref(engine)?.export(&id)?)
    })
}

/// Imports a snapshot document as a new project.
///
/// # Safety
/// `data` must point to `len` readable bytes; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn trove_import(
    engine: *const TroveEngine,
    data: *const u8,
    len: usize,
    out_json: *mut *mut c_char,
) -> TroveStatus {
    guard(|| {
        let info = engine_ref(engine)?.import(bytes_arg("data", data, len)?)?;
        write_json(out_json, &info)
    })
}

/// Stores a blob; writes its hex hash to `out_hash`.
///
/// # Safety
/// `data` must point to `len` readable bytes; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn trove_put_asset(
    engine: *const TroveEngine,
    data: *const u8,
    len: usize,
    media_type: *const c_char,
    out_hash: *mut *mut c_char,
) -> TroveStatus {
    guard(|| {
        let bytes = bytes_arg("data", data, len)?;
        let (hash, _) = engine_ref(engine)?.put_asset(bytes, str_arg("media_type", media_type)?)?;
        write_string(out_hash, hash.to_string())
    })
}

/// Fetches a blob and its media type.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn trove_get_asset(
    engine: *const TroveEngine,
    hash: *const c_char,
    out_data: *mut *mut u8,
    out_len: *mut usize,
    out_media_type: *mut *mut c_char,
) -> TroveStatus {
    guard(|| {
        let asset = engine_ref(engine)?.get_asset(str_arg("hash", hash)?)?;
        if out_media_type.is_null() {
            return Err(Failure::invalid("output pointer is null"));
        }
        write_bytes(out_data, out_len, asset.bytes.to_vec())?;
        write_string(out_media_type, asset.media_type)
    })
}

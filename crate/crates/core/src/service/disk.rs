//! On-disk layout of a data directory.
//!
//! ```text
//! <data>/assets/<hh>/<hash>            blobs (see AssetStore)
//! <data>/projects/<id>/journal.jsonl   genesis line + one event per line
//! <data>/projects/<id>/base.json       snapshot an imported project started from
//! <data>/projects/<id>/checkpoint.json latest periodic checkpoint
//! ```
//!
//! Recovery loads the checkpoint (if it is consistent with the journal)
//! and replays the journal events after it.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ServiceError;
use crate::asset::AssetCatalog;
use crate::canonical;
use crate::store::{replay_onto, Genesis, Journal, JournalEvent, ProjectState, Snapshot};

pub const JOURNAL_FILE: &str = "journal.jsonl";
pub const BASE_FILE: &str = "base.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    revision: u64,
    next_card_id: u64,
    snapshot: Snapshot,
}

fn storage(context: &str, path: &Path, err: impl std::fmt::Display) -> ServiceError {
    ServiceError::Storage(format!("{context} {}: {err}", path.display()))
}

pub(crate) fn write_atomically(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut file = File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Open handle on one project's directory.
#[derive(Debug)]
pub(crate) struct ProjectFiles {
    dir: PathBuf,
    journal: File,
}

impl ProjectFiles {
    /// Creates the directory for a new project. The journal is written
    /// last, so a half-created project has no journal and is skipped on
    /// load.
    pub(crate) fn create(
        root: &Path,
        genesis: &Genesis,
        base: Option<&Snapshot>,
    ) -> Result<Self, ServiceError> {
        let dir = root.join(genesis.project().id.as_str());
        fs::create_dir_all(&dir).map_err(|e| storage("creating", &dir, e))?;
        if let Some(base) = base {
            let path = dir.join(BASE_FILE);
            write_atomically(&path, &base.to_bytes()).map_err(|e| storage("writing", &path, e))?;
        }
        let path = dir.join(JOURNAL_FILE);
        let mut first = canonical::to_string(genesis);
        first.push('\n');
        write_atomically(&path, first.as_bytes()).map_err(|e| storage("writing", &path, e))?;
        let journal = OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(|e| storage("opening", &path, e))?;
        Ok(ProjectFiles { dir, journal })
    }

    /// Appends events and syncs them to disk before returning.
    pub(crate) fn append(&mut self, events: &[JournalEvent]) -> io::Result<()> {
        let mut text = String::new();
        for event in events {
            text.push_str(&event.to_line());
            text.push('\n');
        }
        self.journal.write_all(text.as_bytes())?;
        self.journal.sync_data()
    }

    pub(crate) fn write_checkpoint(
        &self,
        state: &ProjectState,
        catalog: &dyn AssetCatalog,
    ) -> Result<(), ServiceError> {
        let checkpoint = Checkpoint {
            revision: state.revision(),
            next_card_id: state.next_card_id().0,
            snapshot: Snapshot::of(state, catalog)?,
        };
        let path = self.dir.join(CHECKPOINT_FILE);
        write_atomically(&path, &canonical::to_bytes(&checkpoint))
            .map_err(|e| storage("writing", &path, e))
    }

    /// Loads a project directory. Returns `Ok(None)` for directories without
    /// a journal (creation never finished).
    pub(crate) fn load(
        dir: &Path,
    ) -> Result<Option<(ProjectState, Journal, ProjectFiles)>, ServiceError> {
        let path = dir.join(JOURNAL_FILE);
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(storage("reading", &path, e)),
        };
        let journal = Journal::decode(&text).map_err(|e| storage("decoding", &path, e))?;

        // Drop a torn trailing line so later appends start on a fresh line.
        let complete = text.rfind('\n').map_or(0, |i| i + 1);
        if complete < text.len() {
            let file = OpenOptions::new()
                .write(true)
                .open(&path)
                .map_err(|e| storage("opening", &path, e))?;
            file.set_len(complete as u64)
                .map_err(|e| storage("truncating", &path, e))?;
            file.sync_all().map_err(|e| storage("syncing", &path, e))?;
        }

        let state = recover(dir, &journal)?;
        let file = OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(|e| storage("opening", &path, e))?;
        Ok(Some((
            state,
            journal,
            ProjectFiles {
                dir: dir.to_owned(),
                journal: file,
            },
        )))
    }
}

fn read_checkpoint(dir: &Path) -> Option<Checkpoint> {
    let bytes = fs::read(dir.join(CHECKPOINT_FILE)).ok()?;
    serde_json::from_slice(&bytes).ok()
}

/// Rebuilds the state as of the journal's last event.
fn recover(dir: &Path, journal: &Journal) -> Result<ProjectState, ServiceError> {
    let header = journal.genesis.project().clone();
    let events = &journal.events;

    if let Some(cp) = read_checkpoint(dir) {
        let usable = cp.revision as usize <= events.len() && cp.snapshot.project.id == header.id;
        if usable {
            let mut state = cp.snapshot.into_state(header.id.clone());
            state.restore_counters(cp.revision, cp.next_card_id);
            if let Ok(state) = replay_onto(state, &events[cp.revision as usize..]) {
                return Ok(state);
            }
        }
        tracing::warn!(dir = %dir.display(), "ignoring unusable checkpoint");
    }

    let start = match &journal.genesis {
        Genesis::Created { .. } => ProjectState::new(header),
        Genesis::Imported {
            snapshot_sha256, ..
        } => {
            let path = dir.join(BASE_FILE);
            let bytes = fs::read(&path).map_err(|e| storage("reading", &path, e))?;
            let base = Snapshot::parse(&bytes).map_err(|e| storage("decoding", &path, e))?;
            if &base.sha256() != snapshot_sha256 {
                return Err(storage(
                    "verifying",
                    &path,
                    "hash does not match the journal",
                ));
            }
            base.into_state(header.id)
        }
    };
    replay_onto(start, events).map_err(|e| storage("replaying", &dir.join(JOURNAL_FILE), e))
}

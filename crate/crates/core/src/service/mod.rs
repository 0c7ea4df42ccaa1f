//! The local service: a multi-project engine with optimistic concurrency,
//! durable journals, and the HTTP surface over it.
//!
//! Each project has one writer lock that orders its mutations and a
//! published, immutable copy of its state that readers clone cheaply, so
//! reads never wait for writes.

mod disk;
pub mod http;
mod wire;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::Serialize;
use thiserror::Error;

pub use wire::{
    encode_b64, Applied, CaptureKind, CapturePayload, Command, MutationEnvelope, NewProject,
    Outcome, WireContext, COMMAND_OPS,
};

use crate::asset::{Asset, AssetError, AssetStore, PutOutcome};
use crate::capture::{self, BoundingBox, CaptureError, RegionCapture, TextRecognizer};
use crate::clock::{Clock, Timestamp};
use crate::model::{AssetHash, CardId, CardKey, Color, Project, ProjectId};
use crate::stats::{self, CorpusReport, ProjectStats};
use crate::store::{
    validate_name, CommitError, Genesis, Journal, Mutation, ProjectHeader, ProjectState, Snapshot,
    StoreError,
};
use crate::view::{self, Overview, PeekEntry, PreviewGrid, ReaderEntry};
use disk::ProjectFiles;

/// Events between automatic checkpoints of a persisted project.
pub const DEFAULT_CHECKPOINT_INTERVAL: u64 = 256;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("project is at revision {current}")]
    RevisionConflict { current: u64 },
    #[error("unknown operation `{0}`")]
    UnknownOp(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("no text recognition engine is configured")]
    NoRecognizer,
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Capture(#[from] CaptureError),
    #[error(transparent)]
    Asset(#[from] AssetError),
    #[error("storage failure: {0}")]
    Storage(String),
}

/// Coarse error categories shared by the HTTP and C interfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    NotFound,
    Conflict,
    /// The configured text recognition engine failed.
    Engine,
    Unsupported,
    Internal,
}

fn classify_store(err: &StoreError) -> ErrorClass {
    match err {
        StoreError::UnknownProject(_)
        | StoreError::UnknownCard(_)
        | StoreError::UnknownParent(_) => ErrorClass::NotFound,
        StoreError::GapInSequence { .. }
        | StoreError::UnknownOp(_)
        | StoreError::MalformedEvent { .. } => ErrorClass::Internal,
        _ => ErrorClass::Validation,
    }
}

fn classify_asset(err: &AssetError) -> ErrorClass {
    match err {
        AssetError::NotFound(_) => ErrorClass::NotFound,
        AssetError::Io(_) => ErrorClass::Internal,
        _ => ErrorClass::Validation,
    }
}

impl ServiceError {
    pub fn class(&self) -> ErrorClass {
        match self {
            ServiceError::RevisionConflict { .. } => ErrorClass::Conflict,
            ServiceError::UnknownOp(_) | ServiceError::BadRequest(_) => ErrorClass::Validation,
            ServiceError::NoRecognizer => ErrorClass::Unsupported,
            ServiceError::Store(e) => classify_store(e),
            ServiceError::Capture(CaptureError::Store(e)) => classify_store(e),
            ServiceError::Capture(CaptureError::Asset(e)) => classify_asset(e),
            ServiceError::Capture(CaptureError::EngineFailure(_)) => ErrorClass::Engine,
            ServiceError::Capture(_) => ErrorClass::Validation,
            ServiceError::Asset(e) => classify_asset(e),
            ServiceError::Storage(_) => ErrorClass::Internal,
        }
    }
}

/// A project as listed by the service.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProjectInfo {
    #[serde(flatten)]
    pub project: Project,
    pub card_count: usize,
}

impl ProjectInfo {
    fn of(state: &ProjectState) -> Self {
        ProjectInfo {
            project: state.project().clone(),
            card_count: state.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReaderView {
    pub revision: u64,
    pub entries: Vec<ReaderEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PeekView {
    pub revision: u64,
    pub card: String,
    pub preview_grid: PreviewGrid,
    pub entries: Vec<PeekEntry>,
}

struct Writer {
    state: Arc<ProjectState>,
    journal: Journal,
    files: Option<ProjectFiles>,
    since_checkpoint: u64,
}

struct Slot {
    writer: Mutex<Writer>,
    published: RwLock<Arc<ProjectState>>,
}

impl Slot {
    fn new(state: ProjectState, journal: Journal, files: Option<ProjectFiles>) -> Arc<Self> {
        let state = Arc::new(state);
        Arc::new(Slot {
            published: RwLock::new(Arc::clone(&state)),
            writer: Mutex::new(Writer {
                state,
                journal,
                files,
                since_checkpoint: 0,
            }),
        })
    }

    fn read(&self) -> Arc<ProjectState> {
        Arc::clone(&self.published.read())
    }
}

/// What to report once a planned batch has been committed.
enum Pending {
    Card(CardId),
    Tabs(Vec<CardId>, Vec<capture::SkippedTab>),
    Deleted(CardId, usize),
    Project,
}

/// The multi-project engine behind the HTTP API, the CLI and the C ABI.
pub struct Engine {
    projects: RwLock<BTreeMap<ProjectId, Arc<Slot>>>,
    assets: AssetStore,
    clock: Arc<dyn Clock>,
    recognizer: Option<Arc<dyn TextRecognizer>>,
    projects_dir: Option<PathBuf>,
    checkpoint_interval: u64,
}

impl Engine {
    /// An engine that keeps everything in memory.
    pub fn in_memory(clock: Arc<dyn Clock>) -> Self {
        Engine {
            projects: RwLock::new(BTreeMap::new()),
            assets: AssetStore::in_memory(),
            clock,
            recognizer: None,
            projects_dir: None,
            checkpoint_interval: DEFAULT_CHECKPOINT_INTERVAL,
        }
    }

    /// Opens (creating if needed) a data directory and recovers every
    /// project in it.
    pub fn open(data_dir: impl AsRef<Path>, clock: Arc<dyn Clock>) -> Result<Self, ServiceError> {
        let data_dir = data_dir.as_ref();
        let assets = AssetStore::open(data_dir.join("assets"))?;
        let projects_dir = data_dir.join("projects");
        fs::create_dir_all(&projects_dir).map_err(|e| {
            ServiceError::Storage(format!("creating {}: {e}", projects_dir.display()))
        })?;

        let mut projects = BTreeMap::new();
        let entries = fs::read_dir(&projects_dir).map_err(|e| {
            ServiceError::Storage(format!("listing {}: {e}", projects_dir.display()))
        })?;
        for entry in entries {
            let entry = entry.map_err(|e| ServiceError::Storage(e.to_string()))?;
            if !entry.path().is_dir() {
                continue;
            }
            if let Some((state, journal, files)) = ProjectFiles::load(&entry.path())? {
                projects.insert(
                    state.project().id.clone(),
                    Slot::new(state, journal, Some(files)),
                );
            }
        }
        tracing::info!(
            projects = projects.len(),
            assets = assets.len(),
            "data directory loaded"
        );
        Ok(Engine {
            projects: RwLock::new(projects),
            assets,
            clock,
            recognizer: None,
            projects_dir: Some(projects_dir),
            checkpoint_interval: DEFAULT_CHECKPOINT_INTERVAL,
        })
    }

    pub fn with_recognizer(mut self, engine: Arc<dyn TextRecognizer>) -> Self {
        self.recognizer = Some(engine);
        self
    }

    /// Sets how many events a persisted project accumulates before a new
    /// checkpoint is written. Zero disables checkpoints.
    pub fn with_checkpoint_interval(mut self, events: u64) -> Self {
        self.checkpoint_interval = events;
        self
    }

    pub fn assets(&self) -> &AssetStore {
        &self.assets
    }

    fn slot(&self, id: &ProjectId) -> Result<Arc<Slot>, ServiceError> {
        self.projects
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::UnknownProject(id.to_string()).into())
    }

    /// The project's latest published state.
    pub fn state(&self, id: &ProjectId) -> Result<Arc<ProjectState>, ServiceError> {
        Ok(self.slot(id)?.read())
    }

    fn register(
        &self,
        state: ProjectState,
        genesis: Genesis,
        base: Option<&Snapshot>,
    ) -> Result<ProjectInfo, ServiceError> {
        let files = match &self.projects_dir {
            Some(dir) => Some(ProjectFiles::create(dir, &genesis, base)?),
            None => None,
        };
        let info = ProjectInfo::of(&state);
        let slot = Slot::new(state, Journal::new(genesis), files);
        self.projects.write().insert(info.project.id.clone(), slot);
        Ok(info)
    }

    pub fn create_project(&self, name: &str) -> Result<ProjectInfo, ServiceError> {
        let header = ProjectHeader {
            id: ProjectId::generate(),
            name: validate_name(name)?,
            pinned: false,
            created_at: self.clock.now(),
        };
        let state = ProjectState::new(header.clone());
        self.register(state, Genesis::Created { project: header }, None)
    }

    /// Pinned projects first, then by creation time.
    pub fn list_projects(&self) -> Vec<ProjectInfo> {
        let slots: Vec<Arc<Slot>> = self.projects.read().values().cloned().collect();
        let mut infos: Vec<ProjectInfo> =
            slots.iter().map(|s| ProjectInfo::of(&s.read())).collect();
        infos.sort_by(|a, b| {
            b.project
                .pinned
                .cmp(&a.project.pinned)
                .then(a.project.created_at.cmp(&b.project.created_at))
                .then(a.project.id.cmp(&b.project.id))
        });
        infos
    }

    pub fn overview(&self, id: &ProjectId) -> Result<Overview, ServiceError> {
        Ok(view::project_overview(&*self.state(id)?))
    }

    pub fn reader(&self, id: &ProjectId, root: Option<CardId>) -> Result<ReaderView, ServiceError> {
        let state = self.state(id)?;
        Ok(ReaderView {
            revision: state.revision(),
            entries: view::flatten_reader_view(&state, root)?,
        })
    }

    pub fn peek(&self, key: &CardKey) -> Result<PeekView, ServiceError> {
        let state = self.state(&key.project)?;
        Ok(PeekView {
            revision: state.revision(),
            card: key.to_string(),
            preview_grid: view::preview_grid(&state, key.card)?,
            entries: view::peek(&state, key.card)?,
        })
    }

    pub fn stats(&self, id: &ProjectId) -> Result<ProjectStats, ServiceError> {
        Ok(stats::project_stats(&*self.state(id)?))
    }

    pub fn corpus_report(&self) -> CorpusReport {
        let slots: Vec<Arc<Slot>> = self.projects.read().values().cloned().collect();
        let states: Vec<Arc<ProjectState>> = slots.iter().map(|s| s.read()).collect();
        stats::corpus_report(states.iter().map(|s| s.as_ref()))
    }

    /// Canonical snapshot bytes of the project's current state.
    pub fn export(&self, id: &ProjectId) -> Result<Vec<u8>, ServiceError> {
        Ok(Snapshot::of(&*self.state(id)?, &self.assets)?.to_bytes())
    }

    /// Imports a snapshot as a new project; its assets must already be in
    /// the asset store.
    pub fn import(&self, bytes: &[u8]) -> Result<ProjectInfo, ServiceError> {
        let snapshot = Snapshot::parse(bytes)?;
        snapshot.validate()?;
        snapshot.check_assets(&self.assets)?;
        let state = snapshot.clone().into_state(ProjectId::generate());
        let genesis = Genesis::Imported {
            project: state.header(),
            snapshot_sha256: snapshot.sha256(),
        };
        self.register(state, genesis, Some(&snapshot))
    }

    /// A copy of the project's journal.
    pub fn journal(&self, id: &ProjectId) -> Result<Journal, ServiceError> {
        Ok(self.slot(id)?.writer.lock().journal.clone())
    }

    pub fn put_asset(
        &self,
        bytes: &[u8],
        media_type: &str,
    ) -> Result<(AssetHash, PutOutcome), ServiceError> {
        Ok(self.assets.put(bytes, media_type)?)
    }

    pub fn get_asset(&self, hash: &str) -> Result<Asset, ServiceError> {
        Ok(self.assets.get(hash)?)
    }

    /// Applies a client envelope if the project is still at the expected
    /// revision.
    pub fn apply(
        &self,
        id: &ProjectId,
        envelope: &MutationEnvelope,
    ) -> Result<Applied, ServiceError> {
        let command = envelope.command()?;
        self.execute(id, Some(envelope.expected_revision), command)
    }

    /// Runs one capture interaction. The revision check applies only when
    /// the payload names an expected revision.
    pub fn capture(
        &self,
        id: &ProjectId,
        kind: CaptureKind,
        payload: CapturePayload,
    ) -> Result<Applied, ServiceError> {
        payload.check_kind(kind)?;
        let expected = payload.expected_revision;
        let command = match kind {
            CaptureKind::Text => Command::CaptureText(payload),
            CaptureKind::Image => Command::CaptureImage(payload),
            CaptureKind::Bookmark => Command::CaptureBookmark(payload),
            CaptureKind::Region => Command::CaptureRegion(payload),
            CaptureKind::Tabs => Command::ImportTabs(payload),
        };
        self.execute(id, expected, command)
    }

    fn plan(
        &self,
        state: &ProjectState,
        command: Command,
        now: Timestamp,
    ) -> Result<(Vec<Mutation>, Pending), ServiceError> {
        let assets = &self.assets;
        let single = |m: Mutation| {
            let card = match &m {
                Mutation::CreateCard { card, .. }
                | Mutation::MoveCard { card, .. }
                | Mutation::ReorderCard { card, .. }
                | Mutation::SetAnnotation { card, .. }
                | Mutation::SetColor { card, .. }
                | Mutation::SetCollapsed { card, .. }
                | Mutation::DeleteCard { card }
                | Mutation::AttachRecognizedText { card, .. } => *card,
                other => {
                    other
                        .insertion()
                        .expect("capture planners build insertions")
                        .card
                }
            };
            (vec![m], Pending::Card(card))
        };
        Ok(match command {
            Command::CreateCard {
                kind,
                title,
                parent,
                position,
            } => single(Mutation::CreateCard {
                card: state.next_card_id(),
                kind,
                title,
                parent,
                position,
            }),
            Command::MoveCard {
                card,
                parent,
                position,
            } => single(Mutation::MoveCard {
                card,
                parent,
                position,
            }),
            Command::ReorderCard { card, position } => {
                single(Mutation::ReorderCard { card, position })
            }
            Command::SetAnnotation { card, text } => single(Mutation::SetAnnotation { card, text }),
            Command::SetColor { card, color } => {
                let color = color
                    .map(|name| {
                        name.parse::<Color>()
                            .map_err(|()| StoreError::UnknownColor(name))
                    })
                    .transpose()?;
                single(Mutation::SetColor { card, color })
            }
            Command::SetCollapsed { card, collapsed } => {
                single(Mutation::SetCollapsed { card, collapsed })
            }
            Command::DeleteCard { card } => {
                let removed = state
                    .require_card(card)
                    .map(|_| state.walk(Some(card)).len())?;
                (
                    vec![Mutation::DeleteCard { card }],
                    Pending::Deleted(card, removed),
                )
            }
            Command::SetPinned { pinned } => {
                (vec![Mutation::SetPinned { pinned }], Pending::Project)
            }
            Command::CaptureText(p) => {
                let text = p
                    .text
                    .as_deref()
                    .ok_or_else(|| ServiceError::BadRequest("text capture needs `text`".into()))?;
                single(capture::plan_text(
                    state,
                    assets,
                    text,
                    &p.ctx.decode()?,
                    p.placement(),
                    now,
                )?)
            }
            Command::CaptureImage(p) => {
                let bytes = p.bytes()?.unwrap_or_default();
                let media = match p.media_type.as_deref() {
                    Some(m) => m.to_owned(),
                    None => crate::asset::sniff_image_type(&bytes)
                        .ok_or_else(|| {
                            ServiceError::BadRequest("image capture needs `media_type`".into())
                        })?
                        .to_owned(),
                };
                single(capture::plan_image(
                    state,
                    assets,
                    &bytes,
                    &media,
                    &p.ctx.decode()?,
                    p.placement(),
                    now,
                )?)
            }
            Command::CaptureBookmark(p) => {
                let archive = p.bytes()?;
                single(capture::plan_bookmark(
                    state,
                    assets,
                    &p.ctx.decode()?,
                    archive.as_deref(),
                    p.placement(),
                    now,
                )?)
            }
            Command::CaptureRegion(p) => {
                let rect = p.bbox.ok_or_else(|| {
                    ServiceError::BadRequest("region capture needs `bbox`".into())
                })?;
                let bbox =
                    BoundingBox::try_from(rect).map_err(|_| CaptureError::InvalidBoundingBox)?;
                let screenshot = p.bytes()?.unwrap_or_default();
                let region = RegionCapture {
                    nodes: &p.nodes,
                    bbox,
                    screenshot: &screenshot,
                };
                single(capture::plan_region(
                    state,
                    assets,
                    &region,
                    &p.ctx.decode()?,
                    p.placement(),
                    now,
                )?)
            }
            Command::ImportTabs(p) => {
                let tabs = p
                    .tabs
                    .iter()
                    .map(WireContext::decode)
                    .collect::<Result<Vec<_>, _>>()?;
                let plan = capture::plan_tabs(state, assets, &tabs, now)?;
                (plan.mutations, Pending::Tabs(plan.cards, plan.skipped))
            }
            Command::AttachRecognizedText { card } => {
                let engine = self
                    .recognizer
                    .as_deref()
                    .ok_or(ServiceError::NoRecognizer)?;
                single(capture::plan_recognized_text(state, assets, card, engine)?)
            }
        })
    }

    fn execute(
        &self,
        id: &ProjectId,
        expected: Option<u64>,
        command: Command,
    ) -> Result<Applied, ServiceError> {
        let slot = self.slot(id)?;
        let mut guard = slot.writer.lock();
        let writer = &mut *guard;
        let current = writer.state.revision();
        if expected.is_some_and(|e| e != current) {
            return Err(ServiceError::RevisionConflict { current });
        }

        let now = self.clock.now();
        let (batch, pending) = self.plan(&writer.state, command, now)?;
        let files = &mut writer.files;
        let events = Arc::make_mut(&mut writer.state)
            .commit(&batch, now, |events| match files {
                Some(f) => f.append(events),
                None => Ok(()),
            })
            .map_err(|e| match e {
                CommitError::Store(e) => ServiceError::Store(e),
                CommitError::Persist(e) => {
                    ServiceError::Storage(format!("appending to journal: {e}"))
                }
            })?;
        writer.since_checkpoint += events.len() as u64;
        writer.journal.events.extend(events);

        if let Some(files) = &writer.files {
            if self.checkpoint_interval > 0 && writer.since_checkpoint >= self.checkpoint_interval {
                // A failed checkpoint only costs a longer replay on restart.
                match files.write_checkpoint(&writer.state, &self.assets) {
                    Ok(()) => writer.since_checkpoint = 0,
                    Err(e) => tracing::warn!(project = %id, error = %e, "checkpoint failed"),
                }
            }
        }

        let state = Arc::clone(&writer.state);
        *slot.published.write() = Arc::clone(&state);
        drop(guard);

        let card = |c: CardId| {
            state
                .card(c)
                .cloned()
                .ok_or_else(|| ServiceError::Storage(format!("card {c} vanished after commit")))
        };
        let result = match pending {
            Pending::Card(c) => Outcome::Card(card(c)?),
            Pending::Tabs(ids, skipped) => Outcome::Tabs {
                cards: ids.into_iter().map(card).collect::<Result<_, _>>()?,
                skipped,
            },
            Pending::Deleted(deleted, removed) => Outcome::Deleted { deleted, removed },
            Pending::Project => Outcome::Project(state.project().clone()),
        };
        Ok(Applied {
            revision: state.revision(),
            result,
        })
    }
}

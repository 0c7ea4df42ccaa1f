//! Card/project model store: structural mutations, the journal, and
//! snapshot export/import.

mod journal;
mod mutation;
mod snapshot;
mod state;

use std::sync::Arc;

use thiserror::Error;

pub use journal::{replay_journal, replay_onto, Genesis, Journal, JournalEvent};
pub use mutation::{Insertion, Mutation, KNOWN_OPS};
pub use snapshot::{
    check_structure, Invariant, Snapshot, SnapshotProject, SNAPSHOT_FORMAT, SNAPSHOT_VERSION,
};
pub use state::{CommitError, ProjectHeader, ProjectState};

use crate::asset::AssetCatalog;
use crate::clock::Clock;
use crate::model::{CardId, CardKind, Color, ProjectId};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum StoreError {
    #[error("project name must not be empty")]
    EmptyName,
    #[error("unknown project {0}")]
    UnknownProject(String),
    #[error("unknown card {0}")]
    UnknownCard(CardId),
    #[error("unknown parent card {0}")]
    UnknownParent(CardId),
    #[error("card {0} already exists")]
    DuplicateCard(CardId),
    #[error("folder cards can only be placed at the root or inside other folders")]
    FolderInsideBundle,
    #[error("position {position} is out of range for {len} siblings")]
    PositionOutOfRange { position: usize, len: usize },
    #[error("a card cannot be moved into itself or its own descendants")]
    CycleRejected,
    #[error("unknown color `{0}`")]
    UnknownColor(String),
    #[error("card {0} has no image to recognize")]
    NoImage(CardId),
    #[error("card {0} already has extracted text")]
    AlreadyHasText(CardId),
    #[error("invalid card: {0}")]
    InvalidCard(String),
    #[error("snapshot schema invalid: {0}")]
    SchemaInvalid(String),
    #[error("snapshot violates invariant: {0}")]
    InvariantViolation(Invariant),
    #[error("asset {0} is missing")]
    MissingAsset(String),
    #[error("journal gap: expected seq {expected}, found {found}")]
    GapInSequence { expected: u64, found: u64 },
    #[error("unknown journal op `{0}`")]
    UnknownOp(String),
    #[error("malformed journal event {seq}: {message}")]
    MalformedEvent { seq: u64, message: String },
}

/// Normalizes a project name, rejecting blank ones.
pub fn validate_name(name: &str) -> Result<String, StoreError> {
    let trimmed = name.trim();
    if trimmed.is_empty() {
        return Err(StoreError::EmptyName);
    }
    Ok(trimmed.to_owned())
}

/// A project held in memory together with its full journal.
///
/// Every operation stamps its mutation with the injected clock, applies it,
/// and appends the resulting event.
pub struct LiveProject {
    state: ProjectState,
    journal: Journal,
    clock: Arc<dyn Clock>,
}

impl LiveProject {
    pub fn create(name: &str, clock: Arc<dyn Clock>) -> Result<Self, StoreError> {
        Self::create_with_id(ProjectId::generate(), name, clock)
    }

    pub fn create_with_id(
        id: ProjectId,
        name: &str,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, StoreError> {
        let header = ProjectHeader {
            id,
            name: validate_name(name)?,
            pinned: false,
            created_at: clock.now(),
        };
        Ok(LiveProject {
            state: ProjectState::new(header.clone()),
            journal: Journal::new(Genesis::Created { project: header }),
            clock,
        })
    }

    /// Imports a snapshot as a new project. Revision starts at 0 and the
    /// journal's genesis records the snapshot's hash.
    pub fn import(
        bytes: &[u8],
        catalog: &dyn AssetCatalog,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, StoreError> {
        let snapshot = Snapshot::parse(bytes)?;
        snapshot.validate()?;
        snapshot.check_assets(catalog)?;
        let snapshot_sha256 = snapshot.sha256();
        let state = snapshot.into_state(ProjectId::generate());
        Ok(LiveProject {
            journal: Journal::new(Genesis::Imported {
                project: state.header(),
                snapshot_sha256,
            }),
            state,
            clock,
        })
    }

    pub fn state(&self) -> &ProjectState {
        &self.state
    }

    pub fn journal(&self) -> &Journal {
        &self.journal
    }

    pub fn id(&self) -> &ProjectId {
        &self.state.project().id
    }

    pub fn revision(&self) -> u64 {
        self.state.revision()
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    /// Applies a batch atomically, journaling one event per mutation.
    pub fn commit(&mut self, batch: &[Mutation]) -> Result<&[JournalEvent], StoreError> {
        let at = self.clock.now();
        let events = self
            .state
            .commit(batch, at, |_| Ok::<(), std::convert::Infallible>(()))
            .map_err(|e| match e {
                CommitError::Store(e) => e,
                CommitError::Persist(never) => match never {},
            })?;
        let start = self.journal.events.len();
        self.journal.events.extend(events);
        Ok(&self.journal.events[start..])
    }

    pub fn apply(&mut self, mutation: Mutation) -> Result<(), StoreError> {
        self.commit(std::slice::from_ref(&mutation)).map(drop)
    }

    pub fn create_card(
        &mut self,
        kind: CardKind,
        title: &str,
        parent: Option<CardId>,
        position: Option<usize>,
    ) -> Result<CardId, StoreError> {
        let card = self.state.next_card_id();
        self.apply(Mutation::CreateCard {
            card,
            kind,
            title: title.to_owned(),
            parent,
            position,
        })?;
        Ok(card)
    }

    pub fn move_card(
        &mut self,
        card: CardId,
        parent: Option<CardId>,
        position: usize,
    ) -> Result<(), StoreError> {
        self.apply(Mutation::MoveCard {
            card,
            parent,
            position,
        })
    }

    pub fn reorder_card(&mut self, card: CardId, position: usize) -> Result<(), StoreError> {
        self.apply(Mutation::ReorderCard { card, position })
    }

    pub fn set_annotation(&mut self, card: CardId, text: &str) -> Result<(), StoreError> {
        self.apply(Mutation::SetAnnotation {
            card,
            text: text.to_owned(),
        })
    }

    pub fn set_color(&mut self, card: CardId, color: Option<Color>) -> Result<(), StoreError> {
        self.apply(Mutation::SetColor { card, color })
    }

    /// Like [`LiveProject::set_color`] but takes the color's name.
    pub fn set_color_named(&mut self, card: CardId, color: Option<&str>) -> Result<(), StoreError> {
        let color = color
            .map(|name| {
                name.parse::<Color>()
                    .map_err(|()| StoreError::UnknownColor(name.to_owned()))
            })
            .transpose()?;
        self.set_color(card, color)
    }

    pub fn set_collapsed(&mut self, card: CardId, collapsed: bool) -> Result<(), StoreError> {
        self.apply(Mutation::SetCollapsed { card, collapsed })
    }

    pub fn delete_card(&mut self, card: CardId) -> Result<(), StoreError> {
        self.apply(Mutation::DeleteCard { card })
    }

    pub fn set_pinned(&mut self, pinned: bool) -> Result<(), StoreError> {
        self.apply(Mutation::SetPinned { pinned })
    }

    pub fn export(&self, catalog: &dyn AssetCatalog) -> Result<Vec<u8>, StoreError> {
        Snapshot::of(&self.state, catalog).map(|s| s.to_bytes())
    }

    /// Rebuilds the state from the journal alone (plus `base` for imported
    /// projects, the snapshot the project was imported from).
    pub fn replay(&self, base: Option<&Snapshot>) -> Result<ProjectState, StoreError> {
        let start = match (&self.journal.genesis, base) {
            (Genesis::Created { project }, _) => ProjectState::new(project.clone()),
            (Genesis::Imported { project, .. }, Some(base)) => {
                base.clone().into_state(project.id.clone())
            }
            (Genesis::Imported { .. }, None) => {
                return Err(StoreError::SchemaInvalid(
                    "imported project needs its base snapshot to replay".into(),
                ))
            }
        };
        replay_onto(start, &self.journal.events)
    }
}

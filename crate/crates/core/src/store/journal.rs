//! Append-only mutation journal.
//!
//! On disk a journal is UTF-8 text with one canonical JSON document per
//! line. The first line is the [`Genesis`] record; each following line is a
//! [`JournalEvent`] with `seq` starting at 1 and increasing by one.

use serde::{Deserialize, Serialize};

use super::mutation::Mutation;
use super::state::{ProjectHeader, ProjectState};
use super::StoreError;
use crate::canonical;
use crate::clock::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalEvent {
    pub seq: u64,
    pub op: String,
    pub payload: serde_json::Value,
    pub at: Timestamp,
}

impl JournalEvent {
    pub fn new(seq: u64, mutation: &Mutation, at: Timestamp) -> Self {
        let (op, payload) = mutation.to_parts();
        JournalEvent {
            seq,
            op,
            payload,
            at,
        }
    }

    pub fn decode(&self) -> Result<Mutation, StoreError> {
        match Mutation::from_parts(&self.op, &self.payload) {
            Ok(Some(m)) => Ok(m),
            Ok(None) => Err(StoreError::UnknownOp(self.op.clone())),
            Err(msg) => Err(StoreError::MalformedEvent {
                seq: self.seq,
                message: msg,
            }),
        }
    }

    pub fn to_line(&self) -> String {
        canonical::to_string(self)
    }
}

/// How a project's history begins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "genesis", rename_all = "snake_case")]
pub enum Genesis {
    Created {
        project: ProjectHeader,
    },
    /// Created from a snapshot; replay starts from that snapshot's cards.
    Imported {
        project: ProjectHeader,
        snapshot_sha256: String,
    },
}

impl Genesis {
    pub fn project(&self) -> &ProjectHeader {
        match self {
            Genesis::Created { project } | Genesis::Imported { project, .. } => project,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Journal {
    pub genesis: Genesis,
    pub events: Vec<JournalEvent>,
}

impl Journal {
    pub fn new(genesis: Genesis) -> Self {
        Journal {
            genesis,
            events: Vec::new(),
        }
    }

    pub fn encode(&self) -> String {
        let mut out = canonical::to_string(&self.genesis);
        out.push('\n');
        for event in &self.events {
            out.push_str(&event.to_line());
            out.push('\n');
        }
        out
    }

    /// Parses journal text. A trailing partial line (torn write) is
    /// ignored; any other malformed line is an error.
    pub fn decode(text: &str) -> Result<Self, StoreError> {
        let complete = match text.rfind('\n') {
            Some(end) => &text[..end],
            None => "",
        };
        let mut lines = complete.lines().filter(|l| !l.trim().is_empty());
        let first = lines
            .next()
            .ok_or_else(|| StoreError::SchemaInvalid("journal has no genesis record".into()))?;
        let genesis: Genesis = serde_json::from_str(first)
            .map_err(|e| StoreError::SchemaInvalid(format!("journal genesis: {e}")))?;
        let events = lines
            .map(|line| {
                serde_json::from_str::<JournalEvent>(line)
                    .map_err(|e| StoreError::SchemaInvalid(format!("journal event: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Journal { genesis, events })
    }
}

/// Applies `events` on top of `start`. Their `seq` values must continue
/// `start`'s revision without gaps.
pub fn replay_onto(
    mut start: ProjectState,
    events: &[JournalEvent],
) -> Result<ProjectState, StoreError> {
    for event in events {
        let expected = start.revision() + 1;
        if event.seq != expected {
            return Err(StoreError::GapInSequence {
                expected,
                found: event.seq,
            });
        }
        let mutation = event.decode()?;
        start.apply(&mutation, event.at)?;
    }
    Ok(start)
}

/// Rebuilds a project from an empty state by replaying `events` in order.
pub fn replay_journal(
    header: ProjectHeader,
    events: &[JournalEvent],
) -> Result<ProjectState, StoreError> {
    replay_onto(ProjectState::new(header), events)
}

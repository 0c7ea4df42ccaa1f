//! Versioned snapshot documents.
//!
//! A snapshot is one canonical JSON object:
//!
//! ```text
//! { "assets":  { <hash>: { "byte_length": n, "media_type": t }, ... },
//!   "cards":   [ <card>, ... ],            // depth-first, siblings in order
//!   "format":  "trove.snapshot",
//!   "project": { "created_at", "id", "name", "pinned" },
//!   "version": 1 }
//! ```
//!
//! The revision counter is not part of the document: an imported project
//! starts its own history at revision 0.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::state::{ProjectHeader, ProjectState};
use super::StoreError;
use crate::asset::{AssetCatalog, AssetMeta};
use crate::canonical;
use crate::clock::Timestamp;
use crate::model::{AssetHash, Card, CardId, CardKind, ProjectId, ReprContent, ReprKind};

pub const SNAPSHOT_FORMAT: &str = "trove.snapshot";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotProject {
    pub id: ProjectId,
    pub name: String,
    pub pinned: bool,
    pub created_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    pub format: String,
    pub version: u32,
    pub project: SnapshotProject,
    pub cards: Vec<Card>,
    pub assets: BTreeMap<AssetHash, AssetMeta>,
}

/// The structural rule a rejected snapshot broke.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Invariant {
    UniqueIds,
    ParentExists,
    Acyclic,
    DenseIndices,
    FolderRule,
    FolderRepresentations,
    UniqueRepresentationKinds,
    DirectClipScreenshot,
    RegionClipImage,
    AssetManifest,
}

impl Invariant {
    pub fn name(self) -> &'static str {
        match self {
            Invariant::UniqueIds => "unique ids",
            Invariant::ParentExists => "parent exists",
            Invariant::Acyclic => "acyclic",
            Invariant::DenseIndices => "dense indices",
            Invariant::FolderRule => "folder rule",
            Invariant::FolderRepresentations => "folder representations",
            Invariant::UniqueRepresentationKinds => "unique representation kinds",
            Invariant::DirectClipScreenshot => "no viewport screenshot on direct clips",
            Invariant::RegionClipImage => "region clip image",
            Invariant::AssetManifest => "asset manifest",
        }
    }
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Snapshot {
    /// Captures `state` as a snapshot document.
    pub fn of(state: &ProjectState, catalog: &dyn AssetCatalog) -> Result<Self, StoreError> {
        let project = state.project();
        let cards: Vec<Card> = state
            .walk(None)
            .into_iter()
            .map(|(c, _)| c.clone())
            .collect();
        let mut assets = BTreeMap::new();
        for hash in cards.iter().flat_map(Card::asset_refs) {
            if !assets.contains_key(hash) {
                let meta = catalog
                    .meta(hash)
                    .ok_or_else(|| StoreError::MissingAsset(hash.to_string()))?;
                assets.insert(hash.clone(), meta);
            }
        }
        Ok(Snapshot {
            format: SNAPSHOT_FORMAT.to_owned(),
            version: SNAPSHOT_VERSION,
            project: SnapshotProject {
                id: project.id.clone(),
                name: project.name.clone(),
                pinned: project.pinned,
                created_at: project.created_at,
            },
            cards,
            assets,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        canonical::to_bytes(self)
    }

    /// Canonical bytes with the project id blanked, for comparing a
    /// snapshot against one taken after an import.
    pub fn comparison_bytes(&self) -> Vec<u8> {
        let mut anonymous = self.clone();
        anonymous.project.id = ProjectId::from("");
        anonymous.to_bytes()
    }

    /// Parses and schema-checks a snapshot document.
    pub fn parse(bytes: &[u8]) -> Result<Self, StoreError> {
        let snapshot: Snapshot =
            serde_json::from_slice(bytes).map_err(|e| StoreError::SchemaInvalid(e.to_string()))?;
        if snapshot.format != SNAPSHOT_FORMAT {
            return Err(StoreError::SchemaInvalid(format!(
                "unexpected format `{}`",
                snapshot.format
            )));
        }
        if snapshot.version != SNAPSHOT_VERSION {
            return Err(StoreError::SchemaInvalid(format!(
                "unsupported snapshot version {}",
                snapshot.version
            )));
        }
        Ok(snapshot)
    }

    /// Checks every structural invariant a live project maintains.
    pub fn validate(&self) -> Result<(), StoreError> {
        check_structure(&self.cards).map_err(StoreError::InvariantViolation)
    }

    /// Checks that every referenced asset is listed in the manifest and
    /// held by `catalog` with the same metadata.
    pub fn check_assets(&self, catalog: &dyn AssetCatalog) -> Result<(), StoreError> {
        let referenced: BTreeSet<&AssetHash> =
            self.cards.iter().flat_map(Card::asset_refs).collect();
        for hash in &referenced {
            let listed = self
                .assets
                .get(*hash)
                .ok_or_else(|| StoreError::MissingAsset(hash.to_string()))?;
            let held = catalog
                .meta(hash)
                .ok_or_else(|| StoreError::MissingAsset(hash.to_string()))?;
            if *listed != held {
                return Err(StoreError::InvariantViolation(Invariant::AssetManifest));
            }
        }
        if self.assets.keys().any(|h| !referenced.contains(h)) {
            return Err(StoreError::InvariantViolation(Invariant::AssetManifest));
        }
        Ok(())
    }

    /// Materializes the snapshot under a new project identity.
    pub fn into_state(self, id: ProjectId) -> ProjectState {
        let header = ProjectHeader {
            id,
            name: self.project.name,
            pinned: self.project.pinned,
            created_at: self.project.created_at,
        };
        ProjectState::from_cards(header, self.cards)
    }

    pub fn sha256(&self) -> String {
        canonical::sha256_hex(&self.to_bytes())
    }
}

/// Structural validation shared by snapshot import and tests.
pub fn check_structure(cards: &[Card]) -> Result<(), Invariant> {
    let mut by_id: HashMap<CardId, &Card> = HashMap::with_capacity(cards.len());
    for card in cards {
        if by_id.insert(card.id, card).is_some() {
            return Err(Invariant::UniqueIds);
        }
    }

    let mut siblings: HashMap<Option<CardId>, Vec<usize>> = HashMap::new();
    for card in cards {
        if let Some(parent) = card.parent_id {
            let parent = by_id.get(&parent).ok_or(Invariant::ParentExists)?;
            if card.kind == CardKind::Folder && parent.kind != CardKind::Folder {
                return Err(Invariant::FolderRule);
            }
        }
        siblings
            .entry(card.parent_id)
            .or_default()
            .push(card.order_index);

        if card.kind == CardKind::Folder && !card.representations.is_empty() {
            return Err(Invariant::FolderRepresentations);
        }
        if !card
            .representations
            .windows(2)
            .all(|w| w[0].kind < w[1].kind)
        {
            return Err(Invariant::UniqueRepresentationKinds);
        }
        if card.kind.is_direct_clip()
            && card
                .provenance
                .as_ref()
                .is_some_and(|p| p.viewport_screenshot.is_some())
        {
            return Err(Invariant::DirectClipScreenshot);
        }
        if card.kind == CardKind::RegionClip
            && !matches!(
                card.representation(ReprKind::RegionImage),
                Some(ReprContent::Asset(_))
            )
        {
            return Err(Invariant::RegionClipImage);
        }
    }

    for indices in siblings.values_mut() {
        indices.sort_unstable();
        if indices.iter().enumerate().any(|(i, &idx)| i != idx) {
            return Err(Invariant::DenseIndices);
        }
    }

    // Every chain of parent links must reach a root within `len` steps.
    let mut settled: HashMap<CardId, bool> = HashMap::with_capacity(cards.len());
    for card in cards {
        let mut path = Vec::new();
        let mut cursor = Some(card.id);
        while let Some(id) = cursor {
            if settled.contains_key(&id) {
                break;
            }
            if path.contains(&id) {
                return Err(Invariant::Acyclic);
            }
            path.push(id);
            cursor = by_id[&id].parent_id;
        }
        for id in path {
            settled.insert(id, true);
        }
    }
    Ok(())
}

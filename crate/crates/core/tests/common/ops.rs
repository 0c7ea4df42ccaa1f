//! Random operation sequences, a shadow tree model that predicts their
//! outcome, and a structural invariant checker.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use trove_core::asset::AssetStore;
use trove_core::capture::{
    self, BoundingBox, CaptureContext, LayoutNode, Placement, Rect, RegionCapture,
};
use trove_core::model::{CardId, CardKind};
use trove_core::store::{LiveProject, ProjectState, StoreError};

pub const COLORS: [&str; 9] = [
    "red", "orange", "yellow", "green", "teal", "blue", "purple", "gray", "mauve",
];

const WORDS: [&str; 12] = [
    "battery",
    "noise",
    "cancelling",
    "too",
    "expensive",
    "comfy",
    "bass",
    "case",
    "ANC",
    "fits",
    "well",
    "meh",
];

/// PNG signature followed by filler, enough for media sniffing.
pub const PNG: &[u8] = b"\x89PNG\r\n\x1a\n\0\0\0\rIHDR-fixture";

#[derive(Debug, Clone)]
pub enum Op {
    Create {
        kind: CardKind,
        parent: Option<u64>,
        position: Option<usize>,
    },
    Move {
        card: u64,
        parent: Option<u64>,
        position: usize,
    },
    Reorder {
        card: u64,
        position: usize,
    },
    Annotate {
        card: u64,
        text: String,
    },
    Color {
        card: u64,
        color: Option<&'static str>,
    },
    Collapse {
        card: u64,
        collapsed: bool,
    },
    Delete {
        card: u64,
    },
    Pin(bool),
    Text {
        parent: Option<u64>,
        selection: String,
    },
    Bookmark {
        parent: Option<u64>,
        url: String,
    },
    Region {
        parent: Option<u64>,
        bbox: (f64, f64, f64, f64),
    },
    Tabs(Vec<String>),
}

/// What an op did, as far as the shadow model can tell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    /// A store error, by variant name.
    Err(&'static str),
    /// Rejected by capture validation before reaching the store.
    Rejected,
}

pub fn error_name(err: &StoreError) -> &'static str {
    match err {
        StoreError::EmptyName => "EmptyName",
        StoreError::UnknownProject(_) => "UnknownProject",
        StoreError::UnknownCard(_) => "UnknownCard",
        StoreError::UnknownParent(_) => "UnknownParent",
        StoreError::DuplicateCard(_) => "DuplicateCard",
        StoreError::FolderInsideBundle => "FolderInsideBundle",
        StoreError::PositionOutOfRange { .. } => "PositionOutOfRange",
        StoreError::CycleRejected => "CycleRejected",
        StoreError::UnknownColor(_) => "UnknownColor",
        StoreError::NoImage(_) => "NoImage",
        StoreError::AlreadyHasText(_) => "AlreadyHasText",
        StoreError::InvalidCard(_) => "InvalidCard",
        StoreError::SchemaInvalid(_) => "SchemaInvalid",
        StoreError::InvariantViolation(_) => "InvariantViolation",
        StoreError::MissingAsset(_) => "MissingAsset",
        StoreError::GapInSequence { .. } => "GapInSequence",
        StoreError::UnknownOp(_) => "UnknownOp",
        StoreError::MalformedEvent { .. } => "MalformedEvent",
    }
}

/// Plain-collections model of the card forest.
#[derive(Debug, Clone, Default)]
pub struct Shadow {
    pub kinds: BTreeMap<u64, CardKind>,
    pub parent: BTreeMap<u64, Option<u64>>,
    pub lists: BTreeMap<Option<u64>, Vec<u64>>,
    pub next: u64,
    pub revision: u64,
}

impl Shadow {
    pub fn new() -> Self {
        Shadow {
            next: 1,
            ..Shadow::default()
        }
    }

    fn list(&self, parent: Option<u64>) -> &[u64] {
        self.lists.get(&parent).map_or(&[], Vec::as_slice)
    }

    fn list_mut(&mut self, parent: Option<u64>) -> &mut Vec<u64> {
        self.lists.entry(parent).or_default()
    }

    fn exists(&self, id: u64) -> bool {
        self.kinds.contains_key(&id)
    }

    fn is_within(&self, node: u64, ancestor: u64) -> bool {
        let mut cursor = Some(node);
        while let Some(id) = cursor {
            if id == ancestor {
                return true;
            }
            cursor = self.parent[&id];
        }
        false
    }

    fn folder_ok(&self, kind: CardKind, parent: Option<u64>) -> bool {
        kind != CardKind::Folder || parent.is_none_or(|p| self.kinds[&p] == CardKind::Folder)
    }

    fn insert(&mut self, kind: CardKind, parent: Option<u64>, position: Option<usize>) {
        let id = self.next;
        self.next += 1;
        self.kinds.insert(id, kind);
        self.parent.insert(id, parent);
        let list = self.list_mut(parent);
        let at = position.unwrap_or(list.len());
        list.insert(at, id);
        self.revision += 1;
    }

    fn unlink(&mut self, id: u64) -> Option<u64> {
        let parent = self.parent[&id];
        let list = self.list_mut(parent);
        list.retain(|&c| c != id);
        if list.is_empty() {
            self.lists.remove(&parent);
        }
        parent
    }

    fn check_insert(
        &self,
        kind: CardKind,
        parent: Option<u64>,
        position: Option<usize>,
    ) -> Result<(), &'static str> {
        if let Some(p) = parent {
            if !self.exists(p) {
                return Err("UnknownParent");
            }
        }
        if !self.folder_ok(kind, parent) {
            return Err("FolderInsideBundle");
        }
        if position.is_some_and(|p| p > self.list(parent).len()) {
            return Err("PositionOutOfRange");
        }
        Ok(())
    }

    /// Predicts and applies `op`.
    pub fn apply(&mut self, op: &Op) -> Outcome {
        match self.try_apply(op) {
            Ok(()) => Outcome::Ok,
            Err("Rejected") => Outcome::Rejected,
            Err(name) => Outcome::Err(name),
        }
    }

    fn try_apply(&mut self, op: &Op) -> Result<(), &'static str> {
        match op {
            Op::Create {
                kind,
                parent,
                position,
            } => {
                self.check_insert(*kind, *parent, *position)?;
                self.insert(*kind, *parent, *position);
            }
            Op::Move {
                card,
                parent,
                position,
            } => {
                if !self.exists(*card) {
                    return Err("UnknownCard");
                }
                if let Some(p) = parent {
                    if !self.exists(*p) {
                        return Err("UnknownParent");
                    }
                    if self.is_within(*p, *card) {
                        return Err("CycleRejected");
                    }
                }
                if !self.folder_ok(self.kinds[card], *parent) {
                    return Err("FolderInsideBundle");
                }
                let mut len = self.list(*parent).len();
                if self.parent[card] == *parent {
                    len -= 1;
                }
                if *position > len {
                    return Err("PositionOutOfRange");
                }
                self.unlink(*card);
                self.parent.insert(*card, *parent);
                self.list_mut(*parent).insert(*position, *card);
                self.revision += 1;
            }
            Op::Reorder { card, position } => {
                if !self.exists(*card) {
                    return Err("UnknownCard");
                }
                let parent = self.parent[card];
                if *position >= self.list(parent).len() {
                    return Err("PositionOutOfRange");
                }
                self.unlink(*card);
                self.list_mut(parent).insert(*position, *card);
                self.revision += 1;
            }
            Op::Color { card, color } => {
                if color.is_some_and(|c| c == "mauve") {
                    return Err("UnknownColor");
                }
                if !self.exists(*card) {
                    return Err("UnknownCard");
                }
                self.revision += 1;
            }
            Op::Annotate { card, .. } | Op::Collapse { card, .. } => {
                if !self.exists(*card) {
                    return Err("UnknownCard");
                }
                self.revision += 1;
            }
            Op::Delete { card } => {
                if !self.exists(*card) {
                    return Err("UnknownCard");
                }
                let doomed: Vec<u64> = self
                    .kinds
                    .keys()
                    .copied()
                    .filter(|&c| self.is_within(c, *card))
                    .collect();
                self.unlink(*card);
                for id in doomed {
                    self.kinds.remove(&id);
                    self.parent.remove(&id);
                    self.lists.remove(&Some(id));
                }
                self.revision += 1;
            }
            Op::Pin(_) => self.revision += 1,
            Op::Text { parent, selection } => {
                if selection.trim().is_empty() {
                    return Err("Rejected");
                }
                self.check_insert(CardKind::TextSnippet, *parent, None)?;
                self.insert(CardKind::TextSnippet, *parent, None);
            }
            Op::Bookmark { parent, url } => {
                if !url_ok(url) {
                    return Err("Rejected");
                }
                self.check_insert(CardKind::Bookmark, *parent, None)?;
                self.insert(CardKind::Bookmark, *parent, None);
            }
            Op::Region { parent, .. } => {
                self.check_insert(CardKind::RegionClip, *parent, None)?;
                self.insert(CardKind::RegionClip, *parent, None);
            }
            Op::Tabs(urls) => {
                if urls.is_empty() {
                    return Err("Rejected");
                }
                for url in urls.iter().filter(|u| url_ok(u)) {
                    let _ = url;
                    self.insert(CardKind::Bookmark, None, None);
                }
            }
        }
        Ok(())
    }

    /// Compares the live state's structure with the model.
    pub fn matches(&self, state: &ProjectState) -> Result<(), String> {
        if state.revision() != self.revision {
            return Err(format!(
                "revision {} != model {}",
                state.revision(),
                self.revision
            ));
        }
        if state.len() != self.kinds.len() {
            return Err(format!(
                "{} cards != model {}",
                state.len(),
                self.kinds.len()
            ));
        }
        for (id, kind) in &self.kinds {
            let card = state
                .card(CardId(*id))
                .ok_or(format!("card {id} missing"))?;
            if card.kind != *kind || card.parent_id.map(|c| c.0) != self.parent[id] {
                return Err(format!("card {id} differs from model"));
            }
        }
        let mut parents: BTreeSet<Option<u64>> = self.lists.keys().copied().collect();
        parents.insert(None);
        for parent in parents {
            let live: Vec<u64> = state
                .children(parent.map(CardId))
                .iter()
                .map(|c| c.0)
                .collect();
            if live != self.list(parent) {
                return Err(format!(
                    "children of {parent:?}: {live:?} != model {:?}",
                    self.list(parent)
                ));
            }
        }
        Ok(())
    }
}

/// The url rule the capture layer applies, restated: non-blank, with a
/// scheme (`alpha *( alpha / digit / "+" / "-" / "." ) ":"`) and something
/// after it. Only covers the shapes the generators produce.
pub fn url_ok(url: &str) -> bool {
    let url = url.trim();
    let Some((scheme, rest)) = url.split_once(':') else {
        return false;
    };
    let mut chars = scheme.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || "+-.".contains(c))
        && !rest.is_empty()
        && !rest.contains(' ')
}

/// Structural invariants checked from card fields alone.
pub fn check_invariants(state: &ProjectState) -> Result<(), String> {
    let cards: BTreeMap<u64, _> = state.cards().map(|c| (c.id.0, c)).collect();
    let mut groups: BTreeMap<Option<u64>, Vec<(usize, u64)>> = BTreeMap::new();
    for card in cards.values() {
        if card.id.0 >= state.next_card_id().0 {
            return Err(format!("card {} at or above next id", card.id));
        }
        if let Some(parent) = card.parent_id {
            let parent_card = cards
                .get(&parent.0)
                .ok_or(format!("card {} has missing parent {parent}", card.id))?;
            if card.kind == CardKind::Folder && parent_card.kind != CardKind::Folder {
                return Err(format!("folder {} under non-folder {parent}", card.id));
            }
        }
        // Forest: following parents must reach a root within |cards| steps.
        let mut cursor = card.parent_id;
        let mut steps = 0;
        while let Some(p) = cursor {
            steps += 1;
            if steps > cards.len() {
                return Err(format!("cycle through card {}", card.id));
            }
            cursor = cards.get(&p.0).and_then(|c| c.parent_id);
        }
        groups
            .entry(card.parent_id.map(|p| p.0))
            .or_default()
            .push((card.order_index, card.id.0));
    }
    for (parent, mut group) in groups {
        group.sort();
        let indices: Vec<usize> = group.iter().map(|(i, _)| *i).collect();
        if indices != (0..group.len()).collect::<Vec<_>>() {
            return Err(format!("sibling indices under {parent:?} are {indices:?}"));
        }
        let ordered: Vec<u64> = group.iter().map(|(_, id)| *id).collect();
        let listed: Vec<u64> = state
            .children(parent.map(CardId))
            .iter()
            .map(|c| c.0)
            .collect();
        if ordered != listed {
            return Err(format!(
                "child list under {parent:?} disagrees with order indices"
            ));
        }
    }
    if state
        .roots()
        .iter()
        .any(|r| cards.get(&r.0).is_none_or(|c| c.parent_id.is_some()))
    {
        return Err("root list holds a non-root".into());
    }
    Ok(())
}

fn pick_card(rng: &mut impl Rng, shadow: &Shadow) -> u64 {
    let live: Vec<u64> = shadow.kinds.keys().copied().collect();
    match (rng.gen_range(0..10), live.choose(rng)) {
        (0, _) | (_, None) => rng.gen_range(0..shadow.next + 2),
        (_, Some(id)) => *id,
    }
}

fn pick_parent(rng: &mut impl Rng, shadow: &Shadow) -> Option<u64> {
    if rng.gen_bool(0.35) {
        None
    } else {
        // Bias towards folders so listing trees grow deep.
        let folders: Vec<u64> = shadow
            .kinds
            .iter()
            .filter(|(_, k)| **k == CardKind::Folder)
            .map(|(id, _)| *id)
            .collect();
        match folders.choose(rng) {
            Some(f) if rng.gen_bool(0.5) => Some(*f),
            _ => Some(pick_card(rng, shadow)),
        }
    }
}

fn pick_position(rng: &mut impl Rng, len: usize) -> usize {
    if rng.gen_range(0..12) == 0 {
        len + rng.gen_range(1..3)
    } else {
        rng.gen_range(0..=len)
    }
}

fn words(rng: &mut impl Rng) -> String {
    let n = rng.gen_range(0..8);
    let mut out = String::new();
    for _ in 0..n {
        out.push_str(WORDS.choose(rng).unwrap());
        out.push_str([" ", "  ", "\n", "\t "].choose(rng).unwrap());
    }
    out
}

fn url(rng: &mut impl Rng) -> String {
    match rng.gen_range(0..10) {
        0 => String::new(),
        1 => "not a url".into(),
        2 => "ftp://mirror.example/pkg".into(),
        _ => format!(
            "https://shop{}.example/item/{}",
            rng.gen_range(0..5),
            rng.gen_range(0..1000)
        ),
    }
}

/// Draws the next op against the model's current shape.
pub fn random_op(rng: &mut impl Rng, shadow: &Shadow) -> Op {
    let kinds = [
        CardKind::Manual,
        CardKind::Manual,
        CardKind::Folder,
        CardKind::Folder,
        CardKind::Bookmark,
    ];
    match rng.gen_range(0..100) {
        0..=29 => {
            let parent = pick_parent(rng, shadow);
            let len = shadow.list(parent).len();
            Op::Create {
                kind: *kinds.choose(rng).unwrap(),
                parent,
                position: rng.gen_bool(0.5).then(|| pick_position(rng, len)),
            }
        }
        30..=49 => {
            let parent = pick_parent(rng, shadow);
            let len = shadow.list(parent).len();
            Op::Move {
                card: pick_card(rng, shadow),
                parent,
                position: pick_position(rng, len),
            }
        }
        50..=59 => {
            let card = pick_card(rng, shadow);
            let len = shadow
                .parent
                .get(&card)
                .map_or(1, |p| shadow.list(*p).len());
            Op::Reorder {
                card,
                position: pick_position(rng, len.saturating_sub(1)),
            }
        }
        60..=67 => Op::Annotate {
            card: pick_card(rng, shadow),
            text: words(rng),
        },
        68..=71 => Op::Color {
            card: pick_card(rng, shadow),
            color: if rng.gen_bool(0.2) {
                None
            } else {
                Some(*COLORS.choose(rng).unwrap())
            },
        },
        72..=74 => Op::Collapse {
            card: pick_card(rng, shadow),
            collapsed: rng.gen(),
        },
        75..=79 => Op::Delete {
            card: pick_card(rng, shadow),
        },
        80..=81 => Op::Pin(rng.gen()),
        82..=89 => Op::Text {
            parent: if rng.gen_bool(0.6) {
                None
            } else {
                pick_parent(rng, shadow)
            },
            selection: words(rng),
        },
        90..=95 => Op::Bookmark {
            parent: if rng.gen_bool(0.6) {
                None
            } else {
                pick_parent(rng, shadow)
            },
            url: url(rng),
        },
        96..=97 => Op::Region {
            parent: if rng.gen_bool(0.6) {
                None
            } else {
                pick_parent(rng, shadow)
            },
            bbox: (
                rng.gen_range(0..80) as f64,
                rng.gen_range(0..80) as f64,
                rng.gen_range(1..60) as f64,
                rng.gen_range(1..60) as f64,
            ),
        },
        _ => Op::Tabs((0..rng.gen_range(0..4)).map(|_| url(rng)).collect()),
    }
}

fn region_nodes() -> Vec<LayoutNode> {
    let node = |id: u64, depth: u32, rect: Rect| LayoutNode {
        node_id: id,
        depth,
        rect,
        markup: format!("<section data-n=\"{id}\">review {id}</section>"),
        text: format!("review {id}"),
    };
    vec![
        node(0, 0, Rect::new(0.0, 0.0, 100.0, 100.0)),
        node(1, 1, Rect::new(0.0, 0.0, 50.0, 100.0)),
        node(2, 2, Rect::new(0.0, 0.0, 50.0, 50.0)),
        node(3, 1, Rect::new(50.0, 0.0, 50.0, 100.0)),
    ]
}

/// Runs `op` against the live project and reports what happened.
pub fn run_op(project: &mut LiveProject, assets: &AssetStore, op: &Op) -> Outcome {
    let store = |r: Result<(), StoreError>| match r {
        Ok(()) => Outcome::Ok,
        Err(e) => Outcome::Err(error_name(&e)),
    };
    let captured = |r: Result<CardId, capture::CaptureError>| match r {
        Ok(_) => Outcome::Ok,
        Err(capture::CaptureError::Store(e)) => Outcome::Err(error_name(&e)),
        Err(_) => Outcome::Rejected,
    };
    let at = |parent: &Option<u64>| Placement {
        parent: parent.map(CardId),
        position: None,
    };
    match op {
        Op::Create {
            kind,
            parent,
            position,
        } => store(
            project
                .create_card(*kind, "card", parent.map(CardId), *position)
                .map(drop),
        ),
        Op::Move {
            card,
            parent,
            position,
        } => store(project.move_card(CardId(*card), parent.map(CardId), *position)),
        Op::Reorder { card, position } => store(project.reorder_card(CardId(*card), *position)),
        Op::Annotate { card, text } => store(project.set_annotation(CardId(*card), text)),
        Op::Color { card, color } => store(project.set_color_named(CardId(*card), *color)),
        Op::Collapse { card, collapsed } => store(project.set_collapsed(CardId(*card), *collapsed)),
        Op::Delete { card } => store(project.delete_card(CardId(*card))),
        Op::Pin(pinned) => store(project.set_pinned(*pinned)),
        Op::Text { parent, selection } => {
            let ctx =
                CaptureContext::new("https://www.reddit.com/r/headphones/comments/x", "Thread");
            captured(capture::capture_text(
                project,
                assets,
                selection,
                &ctx,
                at(parent),
            ))
        }
        Op::Bookmark { parent, url } => {
            let mut ctx = CaptureContext::new(url.clone(), "Product page");
            ctx.viewport_screenshot = Some(PNG.to_vec());
            captured(capture::capture_bookmark(
                project,
                assets,
                &ctx,
                None,
                at(parent),
            ))
        }
        Op::Region { parent, bbox } => {
            let nodes = region_nodes();
            let region = RegionCapture {
                nodes: &nodes,
                bbox: BoundingBox::new(bbox.0, bbox.1, bbox.2, bbox.3).expect("positive box"),
                screenshot: PNG,
            };
            let ctx = CaptureContext::new("https://www.rtings.com/headphones", "Best headphones");
            captured(capture::capture_region(
                project,
                assets,
                &region,
                &ctx,
                at(parent),
            ))
        }
        Op::Tabs(urls) => {
            let tabs: Vec<CaptureContext> = urls
                .iter()
                .map(|u| CaptureContext::new(u.clone(), "Tab"))
                .collect();
            match capture::import_tabs(project, assets, &tabs) {
                Ok(_) => Outcome::Ok,
                Err(capture::CaptureError::Store(e)) => Outcome::Err(error_name(&e)),
                Err(_) => Outcome::Rejected,
            }
        }
    }
}

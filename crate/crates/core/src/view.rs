//! Read models for the sidebar.

use serde::{Deserialize, Serialize};

use crate::model::{
    AssetHash, Card, CardId, CardKind, Color, ContainmentMode, ReprContent, ReprKind,
};
use crate::store::{ProjectState, StoreError};

pub const EXCERPT_MAX_CHARS: usize = 140;
pub const PREVIEW_GRID_MAX: usize = 9;

fn excerpt(text: &str) -> String {
    text.chars().take(EXCERPT_MAX_CHARS).collect()
}

/// Host part of a provenance url, or empty.
fn source_host(card: &Card) -> String {
    card.provenance
        .as_ref()
        .and_then(|p| url::Url::parse(&p.source_url).ok())
        .and_then(|u| u.host_str().map(str::to_owned))
        .unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreviewGrid {
    pub squares_shown: usize,
    pub overflow: usize,
}

impl PreviewGrid {
    pub fn for_count(children: usize) -> Self {
        let squares_shown = children.min(PREVIEW_GRID_MAX);
        PreviewGrid {
            squares_shown,
            overflow: children - squares_shown,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CardSummary {
    pub card_id: CardId,
    pub kind: CardKind,
    pub title: String,
    pub header_image: Option<AssetHash>,
    pub source_host: String,
    pub annotation_excerpt: String,
    pub child_count: usize,
    pub collapsed: bool,
    pub color: Option<Color>,
    pub child_mode: ContainmentMode,
    /// Present for cards that bundle children.
    pub preview_grid: Option<PreviewGrid>,
    /// Listing children only; bundled children are summarized by the grid.
    pub children: Vec<CardSummary>,
}

fn summarize(state: &ProjectState, card: &Card) -> CardSummary {
    let child_ids = state.children(Some(card.id));
    let child_mode = card.kind.child_mode();
    let children = match child_mode {
        ContainmentMode::Listing => child_ids
            .iter()
            .filter_map(|id| state.card(*id))
            .map(|c| summarize(state, c))
            .collect(),
        ContainmentMode::Bundle => Vec::new(),
    };
    let preview_grid = (child_mode == ContainmentMode::Bundle && !child_ids.is_empty())
        .then(|| PreviewGrid::for_count(child_ids.len()));
    CardSummary {
        card_id: card.id,
        kind: card.kind,
        title: card.title.clone(),
        header_image: card.header_image().cloned(),
        source_host: source_host(card),
        annotation_excerpt: excerpt(&card.annotation),
        child_count: child_ids.len(),
        collapsed: card.collapsed,
        color: card.color,
        child_mode,
        preview_grid,
        children,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overview {
    pub revision: u64,
    pub cards: Vec<CardSummary>,
}

/// The sidebar forest: folders list their children inline, every other card
/// hides its bundle behind a preview grid.
pub fn project_overview(state: &ProjectState) -> Overview {
    Overview {
        revision: state.revision(),
        cards: state
            .roots()
            .iter()
            .filter_map(|id| state.card(*id))
            .map(|c| summarize(state, c))
            .collect(),
    }
}

pub fn preview_grid(state: &ProjectState, card: CardId) -> Result<PreviewGrid, StoreError> {
    state.require_card(card)?;
    Ok(PreviewGrid::for_count(state.children(Some(card)).len()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Thumbnail {
    Asset { hash: AssetHash },
    Excerpt { text: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeekEntry {
    pub child_id: CardId,
    pub title: String,
    pub thumbnail: Thumbnail,
}

fn thumbnail(card: &Card) -> Thumbnail {
    if let Some(hash) = card.header_image() {
        return Thumbnail::Asset { hash: hash.clone() };
    }
    let text = match card.representation(ReprKind::ExtractedText) {
        Some(ReprContent::Text(t)) if !t.trim().is_empty() => t.as_str(),
        _ if !card.annotation.trim().is_empty() => card.annotation.as_str(),
        _ => card.title.as_str(),
    };
    Thumbnail::Excerpt {
        text: excerpt(text),
    }
}

/// Miniatures of a card's direct children, in sibling order.
pub fn peek(state: &ProjectState, card: CardId) -> Result<Vec<PeekEntry>, StoreError> {
    state.require_card(card)?;
    Ok(state
        .children(Some(card))
        .iter()
        .filter_map(|id| state.card(*id))
        .map(|c| PeekEntry {
            child_id: c.id,
            title: c.title.clone(),
            thumbnail: thumbnail(c),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReaderEntry {
    pub depth: usize,
    pub card: Card,
}

/// Depth-first flattening of a card's subtree (the card itself at depth 0)
/// or, with no root, of the whole project. Bundled and listed children are
/// both included.
pub fn flatten_reader_view(
    state: &ProjectState,
    root: Option<CardId>,
) -> Result<Vec<ReaderEntry>, StoreError> {
    if let Some(id) = root {
        state.require_card(id)?;
    }
    Ok(state
        .walk(root)
        .into_iter()
        .map(|(card, depth)| ReaderEntry {
            depth,
            card: card.clone(),
        })
        .collect())
}

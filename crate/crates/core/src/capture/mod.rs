//! Capture pipelines: turning page content into cards.
//!
//! Each `plan_*` function stores any blobs in the asset store and returns a
//! ready-to-commit [`Mutation`]; the matching free function commits it to a
//! [`LiveProject`]. The service layer uses the planners directly so it can
//! commit under its own concurrency control.

mod resolve;

use thiserror::Error;

pub use resolve::{resolve_region, validate_layout, BoundingBox, LayoutNode, Rect, MIN_MATCH_IOU};

use crate::asset::{self, AssetError, AssetStore};
use crate::clock::Timestamp;
use crate::model::{
    AssetHash, CardId, CardKind, Provenance, ReprContent, ReprKind, Representation,
};
use crate::store::{Insertion, LiveProject, Mutation, ProjectState, StoreError};

/// Longest title derived from a text selection, in characters.
pub const TITLE_MAX_CHARS: usize = 80;
pub const ELLIPSIS: char = '…';

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CaptureError {
    #[error("selection is empty")]
    EmptySelection,
    #[error("payload is empty")]
    EmptyPayload,
    #[error("unsupported media type `{0}`")]
    UnsupportedMediaType(String),
    #[error("capture context has no url")]
    MissingUrl,
    #[error("`{0}` is not an absolute url")]
    InvalidUrl(String),
    #[error("bounding box needs finite coordinates and positive size")]
    InvalidBoundingBox,
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("no tabs to import")]
    EmptyTabList,
    #[error("text recognition failed: {0}")]
    EngineFailure(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Asset(#[from] AssetError),
}

/// Source context sent along with every capture.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CaptureContext {
    pub source_url: String,
    pub page_title: String,
    pub favicon: Option<Vec<u8>>,
    pub viewport_screenshot: Option<Vec<u8>>,
    /// Defaults to the commit time when absent.
    pub captured_at: Option<Timestamp>,
}

impl CaptureContext {
    pub fn new(source_url: impl Into<String>, page_title: impl Into<String>) -> Self {
        CaptureContext {
            source_url: source_url.into(),
            page_title: page_title.into(),
            ..Default::default()
        }
    }

    fn validate_url(&self) -> Result<(), CaptureError> {
        if self.source_url.trim().is_empty() {
            return Err(CaptureError::MissingUrl);
        }
        match url::Url::parse(&self.source_url) {
            Ok(_) => Ok(()),
            Err(_) => Err(CaptureError::InvalidUrl(self.source_url.clone())),
        }
    }

    fn fallback_title(&self) -> String {
        if self.page_title.trim().is_empty() {
            self.source_url.clone()
        } else {
            self.page_title.clone()
        }
    }

    /// Stores the context's images and builds the card's provenance.
    /// Viewport screenshots are kept only when `with_viewport` is set.
    fn provenance(
        &self,
        assets: &AssetStore,
        with_viewport: bool,
        now: Timestamp,
    ) -> Result<Provenance, CaptureError> {
        let favicon = match self.favicon.as_deref() {
            Some(bytes) if !bytes.is_empty() => {
                let media = asset::sniff_image_type(bytes).unwrap_or("image/x-icon");
                Some(assets.put(bytes, media)?.0)
            }
            _ => None,
        };
        let viewport_screenshot = match self.viewport_screenshot.as_deref() {
            Some(bytes) if with_viewport && !bytes.is_empty() => Some(store_image(assets, bytes)?),
            _ => None,
        };
        Ok(Provenance {
            source_url: self.source_url.clone(),
            page_title: self.page_title.clone(),
            favicon,
            viewport_screenshot,
            captured_at: self.captured_at.unwrap_or(now),
        })
    }
}

/// Stores a screenshot, sniffing its format (PNG when unrecognized).
fn store_image(assets: &AssetStore, bytes: &[u8]) -> Result<AssetHash, CaptureError> {
    let media = asset::sniff_image_type(bytes)
        .filter(|m| asset::IMAGE_MEDIA_TYPES.contains(m))
        .unwrap_or("image/png");
    Ok(assets.put(bytes, media)?.0)
}

/// First [`TITLE_MAX_CHARS`] characters of the trimmed selection, with an
/// ellipsis appended when anything was cut.
pub fn title_from_selection(selection: &str) -> String {
    let trimmed = selection.trim();
    let mut chars = trimmed.chars();
    let mut title: String = chars.by_ref().take(TITLE_MAX_CHARS).collect();
    if chars.next().is_some() {
        title.push(ELLIPSIS);
    }
    title
}

/// Where a captured card goes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Placement {
    pub parent: Option<CardId>,
    pub position: Option<usize>,
}

impl Placement {
    pub fn root() -> Self {
        Placement::default()
    }

    pub fn under(parent: CardId) -> Self {
        Placement {
            parent: Some(parent),
            position: None,
        }
    }
}

fn insertion(
    state: &ProjectState,
    kind: CardKind,
    title: String,
    representations: Vec<Representation>,
    provenance: Provenance,
    at: Placement,
) -> Insertion {
    Insertion {
        card: state.next_card_id(),
        kind,
        title,
        representations,
        provenance: Some(provenance),
        parent: at.parent,
        position: at.position,
    }
}

pub fn plan_text(
    state: &ProjectState,
    assets: &AssetStore,
    selection: &str,
    ctx: &CaptureContext,
    at: Placement,
    now: Timestamp,
) -> Result<Mutation, CaptureError> {
    if selection.trim().is_empty() {
        return Err(CaptureError::EmptySelection);
    }
    ctx.validate_url()?;
    let provenance = ctx.provenance(assets, false, now)?;
    Ok(Mutation::CaptureText(insertion(
        state,
        CardKind::TextSnippet,
        title_from_selection(selection),
        vec![Representation::text(ReprKind::ExtractedText, selection)],
        provenance,
        at,
    )))
}

pub fn plan_image(
    state: &ProjectState,
    assets: &AssetStore,
    image: &[u8],
    media_type: &str,
    ctx: &CaptureContext,
    at: Placement,
    now: Timestamp,
) -> Result<Mutation, CaptureError> {
    if image.is_empty() {
        return Err(CaptureError::EmptyPayload);
    }
    let media = asset::normalize_image_type(media_type)
        .ok_or_else(|| CaptureError::UnsupportedMediaType(media_type.to_owned()))?;
    ctx.validate_url()?;
    let hash = assets.put(image, media)?.0;
    let provenance = ctx.provenance(assets, false, now)?;
    Ok(Mutation::CaptureImage(insertion(
        state,
        CardKind::Image,
        ctx.fallback_title(),
        vec![Representation::asset(ReprKind::RegionImage, hash)],
        provenance,
        at,
    )))
}

fn bookmark_insertion(
    state: &ProjectState,
    assets: &AssetStore,
    ctx: &CaptureContext,
    page_archive: Option<&[u8]>,
    at: Placement,
    now: Timestamp,
) -> Result<Insertion, CaptureError> {
    ctx.validate_url()?;
    let mut representations = Vec::new();
    if let Some(archive) = page_archive.filter(|a| !a.is_empty()) {
        let hash = assets.put(archive, asset::PAGE_ARCHIVE_MEDIA_TYPE)?.0;
        representations.push(Representation::asset(ReprKind::PageArchive, hash));
    }
    let provenance = ctx.provenance(assets, true, now)?;
    Ok(insertion(
        state,
        CardKind::Bookmark,
        ctx.fallback_title(),
        representations,
        provenance,
        at,
    ))
}

pub fn plan_bookmark(
    state: &ProjectState,
    assets: &AssetStore,
    ctx: &CaptureContext,
    page_archive: Option<&[u8]>,
    at: Placement,
    now: Timestamp,
) -> Result<Mutation, CaptureError> {
    bookmark_insertion(state, assets, ctx, page_archive, at, now).map(Mutation::CaptureBookmark)
}

/// Request for a bounding-box clip.
#[derive(Debug, Clone)]
pub struct RegionCapture<'a> {
    pub nodes: &'a [LayoutNode],
    pub bbox: BoundingBox,
    pub screenshot: &'a [u8],
}

pub fn plan_region(
    state: &ProjectState,
    assets: &AssetStore,
    region: &RegionCapture<'_>,
    ctx: &CaptureContext,
    at: Placement,
    now: Timestamp,
) -> Result<Mutation, CaptureError> {
    if region.screenshot.is_empty() {
        return Err(CaptureError::EmptyPayload);
    }
    validate_layout(region.nodes).map_err(CaptureError::InvalidLayout)?;
    ctx.validate_url()?;
    let image = store_image(assets, region.screenshot)?;
    let mut representations = vec![Representation::asset(ReprKind::RegionImage, image)];
    if let Some(node) = resolve_region(region.nodes, &region.bbox) {
        representations.push(Representation::text(
            ReprKind::HtmlFragment,
            node.markup.clone(),
        ));
        representations.push(Representation::text(
            ReprKind::ExtractedText,
            node.text.clone(),
        ));
    }
    let provenance = ctx.provenance(assets, false, now)?;
    Ok(Mutation::CaptureRegion(insertion(
        state,
        CardKind::RegionClip,
        ctx.fallback_title(),
        representations,
        provenance,
        at,
    )))
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SkippedTab {
    pub index: usize,
    pub reason: String,
}

/// A batch of bookmark mutations, one per importable tab.
#[derive(Debug, Clone, PartialEq)]
pub struct TabPlan {
    pub mutations: Vec<Mutation>,
    pub cards: Vec<CardId>,
    pub skipped: Vec<SkippedTab>,
}

/// Plans one root bookmark per tab, in order. Tabs without a usable url are
/// skipped and reported rather than failing the batch.
pub fn plan_tabs(
    state: &ProjectState,
    assets: &AssetStore,
    tabs: &[CaptureContext],
    now: Timestamp,
) -> Result<TabPlan, CaptureError> {
    if tabs.is_empty() {
        return Err(CaptureError::EmptyTabList);
    }
    let mut plan = TabPlan {
        mutations: Vec::new(),
        cards: Vec::new(),
        skipped: Vec::new(),
    };
    let mut next = state.next_card_id().0;
    for (index, tab) in tabs.iter().enumerate() {
        match bookmark_insertion(state, assets, tab, None, Placement::root(), now) {
            Ok(mut ins) => {
                ins.card = CardId(next);
                next += 1;
                plan.cards.push(ins.card);
                plan.mutations.push(Mutation::ImportTab(ins));
            }
            Err(err @ (CaptureError::MissingUrl | CaptureError::InvalidUrl(_))) => {
                plan.skipped.push(SkippedTab {
                    index,
                    reason: err.to_string(),
                });
            }
            Err(other) => return Err(other),
        }
    }
    Ok(plan)
}

#[derive(Debug, Error)]
#[error("{0}")]
pub struct RecognitionError(pub String);

/// Pluggable text recognition for image-only clips.
pub trait TextRecognizer: Send + Sync {
    fn recognize(&self, image: &[u8], media_type: &str) -> Result<String, RecognitionError>;
}

impl<F> TextRecognizer for F
where
    F: Fn(&[u8], &str) -> Result<String, RecognitionError> + Send + Sync,
{
    fn recognize(&self, image: &[u8], media_type: &str) -> Result<String, RecognitionError> {
        self(image, media_type)
    }
}

/// Runs `engine` over the card's region image. Nothing is journaled unless
/// recognition succeeds.
pub fn plan_recognized_text(
    state: &ProjectState,
    assets: &AssetStore,
    card: CardId,
    engine: &dyn TextRecognizer,
) -> Result<Mutation, CaptureError> {
    state.check(&Mutation::AttachRecognizedText {
        card,
        text: String::new(),
    })?;
    let Some(ReprContent::Asset(hash)) = state
        .require_card(card)?
        .representation(ReprKind::RegionImage)
    else {
        return Err(StoreError::NoImage(card).into());
    };
    let image = assets.get(hash.as_str())?;
    let text = engine
        .recognize(&image.bytes, &image.media_type)
        .map_err(|e| CaptureError::EngineFailure(e.0))?;
    Ok(Mutation::AttachRecognizedText { card, text })
}

fn commit_one(project: &mut LiveProject, mutation: Mutation) -> Result<CardId, CaptureError> {
    let id = match &mutation {
        Mutation::AttachRecognizedText { card, .. } => *card,
        other => {
            other
                .insertion()
                .expect("capture planners build insertions")
                .card
        }
    };
    project.apply(mutation)?;
    Ok(id)
}

fn now_of(project: &LiveProject) -> Timestamp {
    project.clock().now()
}

pub fn capture_text(
    project: &mut LiveProject,
    assets: &AssetStore,
    selection: &str,
    ctx: &CaptureContext,
    at: Placement,
) -> Result<CardId, CaptureError> {
    let m = plan_text(project.state(), assets, selection, ctx, at, now_of(project))?;
    commit_one(project, m)
}

pub fn capture_image(
    project: &mut LiveProject,
    assets: &AssetStore,
    image: &[u8],
    media_type: &str,
    ctx: &CaptureContext,
    at: Placement,
) -> Result<CardId, CaptureError> {
    let m = plan_image(
        project.state(),
        assets,
        image,
        media_type,
        ctx,
        at,
        now_of(project),
    )?;
    commit_one(project, m)
}

pub fn capture_bookmark(
    project: &mut LiveProject,
    assets: &AssetStore,
    ctx: &CaptureContext,
    page_archive: Option<&[u8]>,
    at: Placement,
) -> Result<CardId, CaptureError> {
    let m = plan_bookmark(
        project.state(),
        assets,
        ctx,
        page_archive,
        at,
        now_of(project),
    )?;
    commit_one(project, m)
}

pub fn capture_region(
    project: &mut LiveProject,
    assets: &AssetStore,
    region: &RegionCapture<'_>,
    ctx: &CaptureContext,
    at: Placement,
) -> Result<CardId, CaptureError> {
    let m = plan_region(project.state(), assets, region, ctx, at, now_of(project))?;
    commit_one(project, m)
}

/// Imports every tab as a root bookmark in one atomic batch.
pub fn import_tabs(
    project: &mut LiveProject,
    assets: &AssetStore,
    tabs: &[CaptureContext],
) -> Result<(Vec<CardId>, Vec<SkippedTab>), CaptureError> {
    let plan = plan_tabs(project.state(), assets, tabs, now_of(project))?;
    project.commit(&plan.mutations)?;
    Ok((plan.cards, plan.skipped))
}

pub fn attach_recognized_text(
    project: &mut LiveProject,
    assets: &AssetStore,
    card: CardId,
    engine: &dyn TextRecognizer,
) -> Result<(), CaptureError> {
    let m = plan_recognized_text(project.state(), assets, card, engine)?;
    commit_one(project, m).map(drop)
}

//! Card and project records.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

use crate::clock::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProjectId(String);

impl ProjectId {
    pub fn generate() -> Self {
        ProjectId(uuid::Uuid::new_v4().simple().to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for ProjectId {
    fn from(s: &str) -> Self {
        ProjectId(s.to_owned())
    }
}

impl From<String> for ProjectId {
    fn from(s: String) -> Self {
        ProjectId(s)
    }
}

impl fmt::Display for ProjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Card identifier, unique within its project.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CardId(pub u64);

impl fmt::Display for CardId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Service-wide card reference, rendered as `<project>:<card>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CardKey {
    pub project: ProjectId,
    pub card: CardId,
}

impl fmt::Display for CardKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.project, self.card)
    }
}

impl FromStr for CardKey {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        let (project, card) = s.rsplit_once(':').ok_or(())?;
        if project.is_empty() {
            return Err(());
        }
        let card = card.parse::<u64>().map_err(|_| ())?;
        Ok(CardKey {
            project: ProjectId::from(project),
            card: CardId(card),
        })
    }
}

/// Lowercase hex SHA-256 of an asset's bytes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct AssetHash(String);

impl AssetHash {
    pub fn of(bytes: &[u8]) -> Self {
        use sha2::{Digest, Sha256};
        AssetHash(hex::encode(Sha256::digest(bytes)))
    }

    /// Accepts exactly 64 lowercase hex digits.
    pub fn parse(text: &str) -> Option<Self> {
        let well_formed = text.len() == 64
            && text
                .bytes()
                .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
        well_formed.then(|| AssetHash(text.to_owned()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AssetHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for AssetHash {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        AssetHash::parse(&text)
            .ok_or_else(|| serde::de::Error::custom(format!("malformed asset hash `{text}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CardKind {
    TextSnippet,
    Image,
    RegionClip,
    Bookmark,
    Manual,
    Folder,
}

impl CardKind {
    pub const ALL: [CardKind; 6] = [
        CardKind::TextSnippet,
        CardKind::Image,
        CardKind::RegionClip,
        CardKind::Bookmark,
        CardKind::Manual,
        CardKind::Folder,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CardKind::TextSnippet => "TEXT_SNIPPET",
            CardKind::Image => "IMAGE",
            CardKind::RegionClip => "REGION_CLIP",
            CardKind::Bookmark => "BOOKMARK",
            CardKind::Manual => "MANUAL",
            CardKind::Folder => "FOLDER",
        }
    }

    /// Kinds whose provenance never carries a viewport screenshot.
    pub fn is_direct_clip(self) -> bool {
        matches!(
            self,
            CardKind::TextSnippet | CardKind::Image | CardKind::RegionClip
        )
    }

    /// How children of a card of this kind are displayed.
    pub fn child_mode(self) -> ContainmentMode {
        if self == CardKind::Folder {
            ContainmentMode::Listing
        } else {
            ContainmentMode::Bundle
        }
    }
}

impl fmt::Display for CardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CardKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        CardKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or(())
    }
}

/// Display mode of a parent's children. Derived from the parent's kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ContainmentMode {
    Listing,
    Bundle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Color {
    Red,
    Orange,
    Yellow,
    Green,
    Teal,
    Blue,
    Purple,
    Gray,
}

impl Color {
    pub const ALL: [Color; 8] = [
        Color::Red,
        Color::Orange,
        Color::Yellow,
        Color::Green,
        Color::Teal,
        Color::Blue,
        Color::Purple,
        Color::Gray,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Color::Red => "RED",
            Color::Orange => "ORANGE",
            Color::Yellow => "YELLOW",
            Color::Green => "GREEN",
            Color::Teal => "TEAL",
            Color::Blue => "BLUE",
            Color::Purple => "PURPLE",
            Color::Gray => "GRAY",
        }
    }
}

impl FromStr for Color {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Color::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReprKind {
    RegionImage,
    HtmlFragment,
    ExtractedText,
    PageArchive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReprContent {
    Asset(AssetHash),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Representation {
    pub kind: ReprKind,
    #[serde(flatten)]
    pub content: ReprContent,
}

impl Representation {
    pub fn asset(kind: ReprKind, hash: AssetHash) -> Self {
        Representation {
            kind,
            content: ReprContent::Asset(hash),
        }
    }

    pub fn text(kind: ReprKind, text: impl Into<String>) -> Self {
        Representation {
            kind,
            content: ReprContent::Text(text.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_url: String,
    pub page_title: String,
    pub favicon: Option<AssetHash>,
    pub viewport_screenshot: Option<AssetHash>,
    pub captured_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Project {
    pub id: ProjectId,
    pub name: String,
    pub pinned: bool,
    pub created_at: Timestamp,
    pub revision: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Card {
    pub id: CardId,
    pub parent_id: Option<CardId>,
    pub kind: CardKind,
    pub title: String,
    pub annotation: String,
    pub color: Option<Color>,
    pub order_index: usize,
    pub collapsed: bool,
    /// Sorted by [`ReprKind`], at most one per kind.
    pub representations: Vec<Representation>,
    pub provenance: Option<Provenance>,
    pub created_at: Timestamp,
    pub updated_at: Timestamp,
}

impl Card {
    pub fn representation(&self, kind: ReprKind) -> Option<&ReprContent> {
        self.representations
            .iter()
            .find(|r| r.kind == kind)
            .map(|r| &r.content)
    }

    /// Inserts or replaces the representation of the same kind, keeping the
    /// list sorted.
    pub fn set_representation(&mut self, repr: Representation) {
        match self
            .representations
            .binary_search_by(|r| r.kind.cmp(&repr.kind))
        {
            Ok(i) => self.representations[i] = repr,
            Err(i) => self.representations.insert(i, repr),
        }
    }

    /// The image shown at the top of the card: the clipped region for
    /// image-bearing clips, else the viewport screenshot of a bookmark.
    pub fn header_image(&self) -> Option<&AssetHash> {
        if let Some(ReprContent::Asset(hash)) = self.representation(ReprKind::RegionImage) {
            return Some(hash);
        }
        self.provenance
            .as_ref()
            .and_then(|p| p.viewport_screenshot.as_ref())
    }

    /// Every asset hash the card refers to.
    pub fn asset_refs(&self) -> impl Iterator<Item = &AssetHash> {
        let reprs = self
            .representations
            .iter()
            .filter_map(|r| match &r.content {
                ReprContent::Asset(h) => Some(h),
                ReprContent::Text(_) => None,
            });
        let prov = self
            .provenance
            .iter()
            .flat_map(|p| p.favicon.iter().chain(p.viewport_screenshot.iter()));
        reprs.chain(prov)
    }
}

/// Number of maximal non-whitespace runs.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

//! JSON request bodies accepted by the service.

use std::str::FromStr;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::ServiceError;
use crate::capture::{CaptureContext, LayoutNode, Placement, Rect, SkippedTab};
use crate::clock::Timestamp;
use crate::model::{Card, CardId, CardKind, Project};

/// A client's request to change a project, valid only if the project is
/// still at `expected_revision`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationEnvelope {
    pub expected_revision: u64,
    pub op: String,
    #[serde(default)]
    pub args: serde_json::Value,
}

/// The operations an envelope may carry, decoded from `op` and `args`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(
    tag = "op",
    content = "args",
    rename_all = "snake_case",
    deny_unknown_fields
)]
pub enum Command {
    CreateCard {
        kind: CardKind,
        title: String,
        #[serde(default)]
        parent: Option<CardId>,
        #[serde(default)]
        position: Option<usize>,
    },
    MoveCard {
        card: CardId,
        #[serde(default)]
        parent: Option<CardId>,
        position: usize,
    },
    ReorderCard {
        card: CardId,
        position: usize,
    },
    SetAnnotation {
        card: CardId,
        text: String,
    },
    SetColor {
        card: CardId,
        #[serde(default)]
        color: Option<String>,
    },
    SetCollapsed {
        card: CardId,
        collapsed: bool,
    },
    DeleteCard {
        card: CardId,
    },
    SetPinned {
        pinned: bool,
    },
    CaptureText(CapturePayload),
    CaptureImage(CapturePayload),
    CaptureBookmark(CapturePayload),
    CaptureRegion(CapturePayload),
    ImportTabs(CapturePayload),
    AttachRecognizedText {
        card: CardId,
    },
}

pub const COMMAND_OPS: [&str; 14] = [
    "create_card",
    "move_card",
    "reorder_card",
    "set_annotation",
    "set_color",
    "set_collapsed",
    "delete_card",
    "set_pinned",
    "capture_text",
    "capture_image",
    "capture_bookmark",
    "capture_region",
    "import_tabs",
    "attach_recognized_text",
];

impl MutationEnvelope {
    pub fn new(expected_revision: u64, op: &str, args: serde_json::Value) -> Self {
        MutationEnvelope {
            expected_revision,
            op: op.to_owned(),
            args,
        }
    }

    pub fn command(&self) -> Result<Command, ServiceError> {
        if !COMMAND_OPS.contains(&self.op.as_str()) {
            return Err(ServiceError::UnknownOp(self.op.clone()));
        }
        let tagged = serde_json::json!({ "op": self.op, "args": self.args });
        serde_json::from_value(tagged)
            .map_err(|e| ServiceError::BadRequest(format!("arguments of `{}`: {e}", self.op)))
    }
}

/// The five capture interactions, as named in capture routes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaptureKind {
    Text,
    Image,
    Bookmark,
    Region,
    Tabs,
}

impl CaptureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CaptureKind::Text => "text",
            CaptureKind::Image => "image",
            CaptureKind::Bookmark => "bookmark",
            CaptureKind::Region => "region",
            CaptureKind::Tabs => "tabs",
        }
    }
}

impl FromStr for CaptureKind {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self, ServiceError> {
        match s {
            "text" => Ok(CaptureKind::Text),
            "image" => Ok(CaptureKind::Image),
            "bookmark" => Ok(CaptureKind::Bookmark),
            "region" => Ok(CaptureKind::Region),
            "tabs" => Ok(CaptureKind::Tabs),
            other => Err(ServiceError::BadRequest(format!(
                "unknown capture kind `{other}`"
            ))),
        }
    }
}

/// Page context as sent by the client. Binary fields are base64.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireContext {
    #[serde(default)]
    pub url: String,
    #[serde(default)]
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub favicon_b64: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub viewport_b64: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub captured_at: Option<Timestamp>,
}

impl WireContext {
    pub fn decode(&self) -> Result<CaptureContext, ServiceError> {
        Ok(CaptureContext {
            source_url: self.url.clone(),
            page_title: self.title.clone(),
            favicon: decode_b64("favicon_b64", self.favicon_b64.as_deref())?,
            viewport_screenshot: decode_b64("viewport_b64", self.viewport_b64.as_deref())?,
            captured_at: self.captured_at,
        })
    }
}

fn decode_b64(field: &str, value: Option<&str>) -> Result<Option<Vec<u8>>, ServiceError> {
    value
        .map(|v| {
            STANDARD
                .decode(v.trim())
                .map_err(|e| ServiceError::BadRequest(format!("{field} is not valid base64: {e}")))
        })
        .transpose()
}

pub fn encode_b64(bytes: &[u8]) -> String {
    STANDARD.encode(bytes)
}

/// Body of every capture request. Which fields are required depends on the
/// capture kind: `text` for text, `bytes_b64` (+ `media_type`) for images,
/// `bbox` + `bytes_b64` (+ `nodes`) for regions, `tabs` for tab import. For
/// bookmarks `bytes_b64` is the optional page archive.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapturePayload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default)]
    pub ctx: WireContext,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<Rect>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<LayoutNode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bytes_b64: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_type: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tabs: Vec<WireContext>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<CardId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<usize>,
    /// When present the capture is rejected unless the project is still at
    /// this revision.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_revision: Option<u64>,
}

impl CapturePayload {
    pub fn placement(&self) -> Placement {
        Placement {
            parent: self.parent_id,
            position: self.position,
        }
    }

    pub fn bytes(&self) -> Result<Option<Vec<u8>>, ServiceError> {
        decode_b64("bytes_b64", self.bytes_b64.as_deref())
    }

    /// Rejects a payload whose `kind` names a different capture.
    pub fn check_kind(&self, expected: CaptureKind) -> Result<(), ServiceError> {
        match self.kind.as_deref() {
            None => Ok(()),
            Some(k) if k == expected.as_str() => Ok(()),
            Some(k) => Err(ServiceError::BadRequest(format!(
                "payload kind `{k}` does not match capture `{}`",
                expected.as_str()
            ))),
        }
    }
}

/// What a committed command produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Outcome {
    Card(Card),
    Tabs {
        cards: Vec<Card>,
        skipped: Vec<SkippedTab>,
    },
    Deleted {
        deleted: CardId,
        removed: usize,
    },
    Project(Project),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Applied {
    pub revision: u64,
    pub result: Outcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewProject {
    pub name: String,
}

use serde::{Deserialize, Serialize};

use crate::model::{CardId, CardKind, Color, Provenance, Representation};

/// A fully resolved structural change: every id and timestamp it needs is
/// already decided, so applying it is deterministic. This is what the
/// journal records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", content = "args", rename_all = "snake_case")]
pub enum Mutation {
    CreateCard {
        card: CardId,
        kind: CardKind,
        title: String,
        parent: Option<CardId>,
        position: Option<usize>,
    },
    CaptureText(Insertion),
    CaptureImage(Insertion),
    CaptureBookmark(Insertion),
    CaptureRegion(Insertion),
    ImportTab(Insertion),
    MoveCard {
        card: CardId,
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
        color: Option<Color>,
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
    AttachRecognizedText {
        card: CardId,
        text: String,
    },
}

/// A captured card, ready to be placed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Insertion {
    pub card: CardId,
    pub kind: CardKind,
    pub title: String,
    pub representations: Vec<Representation>,
    pub provenance: Option<Provenance>,
    pub parent: Option<CardId>,
    pub position: Option<usize>,
}

impl Mutation {
    pub fn op_name(&self) -> &'static str {
        match self {
            Mutation::CreateCard { .. } => "create_card",
            Mutation::CaptureText(_) => "capture_text",
            Mutation::CaptureImage(_) => "capture_image",
            Mutation::CaptureBookmark(_) => "capture_bookmark",
            Mutation::CaptureRegion(_) => "capture_region",
            Mutation::ImportTab(_) => "import_tab",
            Mutation::MoveCard { .. } => "move_card",
            Mutation::ReorderCard { .. } => "reorder_card",
            Mutation::SetAnnotation { .. } => "set_annotation",
            Mutation::SetColor { .. } => "set_color",
            Mutation::SetCollapsed { .. } => "set_collapsed",
            Mutation::DeleteCard { .. } => "delete_card",
            Mutation::SetPinned { .. } => "set_pinned",
            Mutation::AttachRecognizedText { .. } => "attach_recognized_text",
        }
    }

    pub fn insertion(&self) -> Option<&Insertion> {
        match self {
            Mutation::CaptureText(ins)
            | Mutation::CaptureImage(ins)
            | Mutation::CaptureBookmark(ins)
            | Mutation::CaptureRegion(ins)
            | Mutation::ImportTab(ins) => Some(ins),
            _ => None,
        }
    }

    /// Splits into the journal's `(op, payload)` pair.
    pub fn to_parts(&self) -> (String, serde_json::Value) {
        let value = serde_json::to_value(self).expect("mutations always serialize");
        let serde_json::Value::Object(mut map) = value else {
            unreachable!("adjacently tagged enums serialize to objects")
        };
        let payload = map.remove("args").unwrap_or(serde_json::Value::Null);
        (self.op_name().to_owned(), payload)
    }

    /// Rebuilds a mutation from a journal `(op, payload)` pair. Returns
    /// `Ok(None)` when the op name is not recognized.
    pub fn from_parts(op: &str, payload: &serde_json::Value) -> Result<Option<Self>, String> {
        if !KNOWN_OPS.contains(&op) {
            return Ok(None);
        }
        let mut map = serde_json::Map::new();
        map.insert("op".into(), serde_json::Value::String(op.to_owned()));
        if !payload.is_null() {
            map.insert("args".into(), payload.clone());
        }
        serde_json::from_value(serde_json::Value::Object(map))
            .map(Some)
            .map_err(|e| e.to_string())
    }
}

pub const KNOWN_OPS: [&str; 14] = [
    "create_card",
    "capture_text",
    "capture_image",
    "capture_bookmark",
    "capture_region",
    "import_tab",
    "move_card",
    "reorder_card",
    "set_annotation",
    "set_color",
    "set_collapsed",
    "delete_card",
    "set_pinned",
    "attach_recognized_text",
];

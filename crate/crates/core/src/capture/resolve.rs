//! Region-to-element resolution.
//!
//! The client sends every element intersecting the user's selection box as a
//! [`LayoutNode`]; the best match is the node whose rectangle has the highest
//! intersection-over-union with the box.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

/// Below this IoU no element is considered a match and the clip keeps only
/// its image.
pub const MIN_MATCH_IOU: f64 = 0.1;

/// Axis-aligned rectangle in CSS pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    pub const fn new(x: f64, y: f64, width: f64, height: f64) -> Self {
        Rect {
            x,
            y,
            width,
            height,
        }
    }

    pub fn area(&self) -> f64 {
        self.width.max(0.0) * self.height.max(0.0)
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.width.is_finite()
            && self.height.is_finite()
    }

    pub fn intersection_area(&self, other: &Rect) -> f64 {
        let w = (self.x + self.width).min(other.x + other.width) - self.x.max(other.x);
        let h = (self.y + self.height).min(other.y + other.height) - self.y.max(other.y);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Intersection over union, in `[0, 1]`. Two empty rectangles score 0.
    pub fn iou(&self, other: &Rect) -> f64 {
        if !self.is_finite() || !other.is_finite() {
            return 0.0;
        }
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            (inter / union).clamp(0.0, 1.0)
        }
    }
}

/// The user's selection box. Both sides must be positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Rect", into = "Rect")]
pub struct BoundingBox(Rect);

impl BoundingBox {
    pub fn new(x: f64, y: f64, width: f64, height: f64) -> Option<Self> {
        let rect = Rect::new(x, y, width, height);
        (rect.is_finite() && width > 0.0 && height > 0.0).then_some(BoundingBox(rect))
    }

    pub fn rect(&self) -> &Rect {
        &self.0
    }
}

impl TryFrom<Rect> for BoundingBox {
    type Error = String;

    fn try_from(r: Rect) -> Result<Self, String> {
        BoundingBox::new(r.x, r.y, r.width, r.height)
            .ok_or_else(|| "bounding box needs finite coordinates and positive size".to_owned())
    }
}

impl From<BoundingBox> for Rect {
    fn from(b: BoundingBox) -> Rect {
        b.0
    }
}

/// One candidate element, as serialized by the page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutNode {
    /// Position in document order.
    #[serde(alias = "id")]
    pub node_id: u64,
    pub depth: u32,
    pub rect: Rect,
    #[serde(default)]
    pub markup: String,
    #[serde(default)]
    pub text: String,
}

/// Checks that ids increase in document order and every node is at most one
/// level deeper than the node before it.
pub fn validate_layout(nodes: &[LayoutNode]) -> Result<(), String> {
    for pair in nodes.windows(2) {
        if pair[1].node_id <= pair[0].node_id {
            return Err(format!(
                "node ids must increase in document order ({} then {})",
                pair[0].node_id, pair[1].node_id
            ));
        }
        if pair[1].depth > pair[0].depth + 1 {
            return Err(format!("node {} skips a depth level", pair[1].node_id));
        }
    }
    if let Some(bad) = nodes
        .iter()
        .find(|n| !(n.rect.width >= 0.0 && n.rect.height >= 0.0))
    {
        return Err(format!("node {} has a negative size", bad.node_id));
    }
    Ok(())
}

/// Ranks `a` against `b`: higher IoU first, then deeper, then smaller, then
/// earlier in the document.
fn rank(a: (&LayoutNode, f64), b: (&LayoutNode, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then_with(|| b.0.depth.cmp(&a.0.depth))
        .then_with(|| {
            a.0.rect
                .area()
                .partial_cmp(&b.0.rect.area())
                .unwrap_or(Ordering::Equal)
        })
        .then_with(|| a.0.node_id.cmp(&b.0.node_id))
}

/// Returns the node best matching `bbox`, or `None` if even the best match
/// scores below [`MIN_MATCH_IOU`].
pub fn resolve_region<'a>(nodes: &'a [LayoutNode], bbox: &BoundingBox) -> Option<&'a LayoutNode> {
    let mut best: Option<(&LayoutNode, f64)> = None;
    for node in nodes {
        let scored = (node, bbox.rect().iou(&node.rect));
        best = match best {
            Some(current) if rank(current, scored) != Ordering::Greater => Some(current),
            _ => Some(scored),
        };
    }
    best.filter(|(_, iou)| *iou >= MIN_MATCH_IOU)
        .map(|(node, _)| node)
}

//! Random layout trees on an integer grid and an exhaustive resolver
//! oracle that scores with exact rationals.

use std::cmp::Ordering;

use rand::Rng;
use trove_core::capture::{LayoutNode, Rect};

/// Integer rectangle `(x, y, w, h)`.
pub type IRect = (i64, i64, i64, i64);

fn node(id: u64, depth: u32, r: IRect) -> LayoutNode {
    LayoutNode {
        node_id: id,
        depth,
        rect: Rect::new(r.0 as f64, r.1 as f64, r.2 as f64, r.3 as f64),
        markup: format!("<div data-node=\"{id}\"></div>"),
        text: format!("node {id}"),
    }
}

fn sub_rect(rng: &mut impl Rng, parent: IRect) -> IRect {
    // Coarse grid so equal scores (and therefore tie-breaks) are common.
    let step = 5;
    let cols = (parent.2 / step).max(1);
    let rows = (parent.3 / step).max(1);
    match rng.gen_range(0..10) {
        // Same box as the parent: a guaranteed IoU tie.
        0 => parent,
        // Zero-sized node.
        1 => (parent.0, parent.1, 0, rng.gen_range(0..=parent.3)),
        _ => {
            let c0 = rng.gen_range(0..cols);
            let r0 = rng.gen_range(0..rows);
            let c1 = rng.gen_range(c0 + 1..=cols);
            let r1 = rng.gen_range(r0 + 1..=rows);
            (
                parent.0 + c0 * step,
                parent.1 + r0 * step,
                ((c1 - c0) * step).min(parent.2 - c0 * step).max(0),
                ((r1 - r0) * step).min(parent.3 - r0 * step).max(0),
            )
        }
    }
}

/// A document-ordered tree of at most `max_nodes` nodes. Node ids are
/// strictly increasing but not contiguous.
pub fn random_layout(rng: &mut impl Rng, max_nodes: usize) -> (Vec<LayoutNode>, Vec<IRect>) {
    let target = rng.gen_range(1..=max_nodes);
    let root: IRect = (0, 0, 5 * rng.gen_range(8..=40), 5 * rng.gen_range(8..=40));
    let mut nodes = Vec::with_capacity(target);
    let mut rects = Vec::with_capacity(target);
    let mut next_id = rng.gen_range(0..3);
    // Explicit DFS stack of (depth, rect).
    let mut stack = vec![(0u32, root)];
    while let Some((depth, rect)) = stack.pop() {
        if nodes.len() == target {
            break;
        }
        nodes.push(node(next_id, depth, rect));
        rects.push(rect);
        next_id += rng.gen_range(1..3);
        let fanout = match depth {
            0..=1 => rng.gen_range(1..=4),
            2..=7 => rng.gen_range(0..=4),
            _ => 0,
        };
        let children: Vec<IRect> = (0..fanout).map(|_| sub_rect(rng, rect)).collect();
        for child in children.into_iter().rev() {
            stack.push((depth + 1, child));
        }
    }
    (nodes, rects)
}

pub fn random_bbox(rng: &mut impl Rng, root: IRect, rects: &[IRect]) -> IRect {
    match rng.gen_range(0..8) {
        // Exactly some node's box.
        0 => {
            let r = rects[rng.gen_range(0..rects.len())];
            if r.2 > 0 && r.3 > 0 {
                r
            } else {
                (r.0, r.1, 5, 5)
            }
        }
        // Anywhere, possibly spilling outside the root.
        1 => (
            rng.gen_range(-50..root.2 + 50),
            rng.gen_range(-50..root.3 + 50),
            rng.gen_range(1..200),
            rng.gen_range(1..200),
        ),
        // Some node's box, nudged.
        2..=4 => {
            let r = rects[rng.gen_range(0..rects.len())];
            let jitter = |rng: &mut dyn rand::RngCore| 5 * rng.gen_range(-1..=1);
            (
                r.0 + jitter(rng),
                r.1 + jitter(rng),
                (r.2 + jitter(rng)).max(5),
                (r.3 + jitter(rng)).max(5),
            )
        }
        _ => {
            let x = 5 * rng.gen_range(0..root.2 / 5);
            let y = 5 * rng.gen_range(0..root.3 / 5);
            (x, y, 5 * rng.gen_range(1..=12), 5 * rng.gen_range(1..=12))
        }
    }
}

fn inter(a: IRect, b: IRect) -> i64 {
    let w = (a.0 + a.2).min(b.0 + b.2) - a.0.max(b.0);
    let h = (a.1 + a.3).min(b.1 + b.3) - a.1.max(b.1);
    if w <= 0 || h <= 0 {
        0
    } else {
        w * h
    }
}

/// IoU as an exact fraction `(numerator, denominator)`.
pub fn iou(bbox: IRect, r: IRect) -> (i128, i128) {
    let i = inter(bbox, r);
    let union = bbox.2 * bbox.3 + r.2.max(0) * r.3.max(0) - i;
    if union <= 0 {
        (0, 1)
    } else {
        (i as i128, union as i128)
    }
}

fn cmp_frac(a: (i128, i128), b: (i128, i128)) -> Ordering {
    (a.0 * b.1).cmp(&(b.0 * a.1))
}

/// Scores every node, sorts all of them best-first under the full ranking,
/// and returns the head if it reaches IoU 1/10.
pub fn brute_force(nodes: &[LayoutNode], rects: &[IRect], bbox: IRect) -> Option<u64> {
    let mut scored: Vec<(&LayoutNode, IRect, (i128, i128))> = nodes
        .iter()
        .zip(rects)
        .map(|(n, r)| (n, *r, iou(bbox, *r)))
        .collect();
    scored.sort_by(|a, b| {
        cmp_frac(b.2, a.2)
            .then(b.0.depth.cmp(&a.0.depth))
            .then((a.1 .2 * a.1 .3).cmp(&(b.1 .2 * b.1 .3)))
            .then(a.0.node_id.cmp(&b.0.node_id))
    });
    let (best, _, score) = scored.first()?;
    (10 * score.0 >= score.1).then_some(best.node_id)
}

/// Whether the top two candidates share an IoU, so a tie-break decided.
pub fn has_tie(rects: &[IRect], bbox: IRect) -> bool {
    let mut scores: Vec<(i128, i128)> = rects.iter().map(|r| iou(bbox, *r)).collect();
    scores.sort_by(|a, b| cmp_frac(*b, *a));
    scores.len() > 1 && scores[0].0 > 0 && cmp_frac(scores[0], scores[1]) == Ordering::Equal
}

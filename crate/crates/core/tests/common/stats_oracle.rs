//! A naive restatement of the structural statistics, computed from card
//! fields with plain maps and exact integer arithmetic.

use std::collections::BTreeMap;

use trove_core::model::{Card, CardKind};
use trove_core::stats::{CorpusReport, ProjectStats};
use trove_core::store::ProjectState;

fn words(text: &str) -> usize {
    text.split(char::is_whitespace)
        .filter(|w| !w.is_empty())
        .count()
}

fn annotated(card: &Card) -> bool {
    text_has_content(&card.annotation)
}

fn text_has_content(text: &str) -> bool {
    text.chars().any(|c| !c.is_whitespace())
}

/// Per-project figures the oracle derives.
#[derive(Debug, Clone)]
pub struct Naive {
    pub card_count: usize,
    pub counts_by_kind: BTreeMap<CardKind, usize>,
    pub max_depth: usize,
    pub annotated_count: usize,
    pub lengths: BTreeMap<CardKind, Vec<usize>>,
    pub folder_parents: usize,
    pub container_parents: usize,
    /// `(cards, annotated)` for root, internal, leaf.
    pub positions: [(usize, usize); 3],
}

pub fn naive_project(state: &ProjectState) -> Naive {
    let cards: Vec<&Card> = state.cards().collect();
    let by_id: BTreeMap<u64, &Card> = cards.iter().map(|c| (c.id.0, *c)).collect();
    let mut kids: BTreeMap<Option<u64>, Vec<&Card>> = BTreeMap::new();
    for c in &cards {
        kids.entry(c.parent_id.map(|p| p.0)).or_default().push(c);
    }
    for list in kids.values_mut() {
        list.sort_by_key(|c| c.order_index);
    }

    let depth_of = |card: &Card| {
        let mut depth = 1;
        let mut cursor = card.parent_id;
        while let Some(p) = cursor {
            depth += 1;
            cursor = by_id[&p.0].parent_id;
        }
        depth
    };

    let mut naive = Naive {
        card_count: cards.len(),
        counts_by_kind: CardKind::ALL.iter().map(|k| (*k, 0)).collect(),
        max_depth: 0,
        annotated_count: 0,
        lengths: CardKind::ALL.iter().map(|k| (*k, Vec::new())).collect(),
        folder_parents: 0,
        container_parents: 0,
        positions: [(0, 0); 3],
    };

    // Pre-order walk for the length lists.
    let mut stack: Vec<&Card> = kids.get(&None).cloned().unwrap_or_default();
    stack.reverse();
    while let Some(card) = stack.pop() {
        let children = kids.get(&Some(card.id.0)).cloned().unwrap_or_default();
        naive.max_depth = naive.max_depth.max(depth_of(card));
        *naive.counts_by_kind.get_mut(&card.kind).unwrap() += 1;
        if !children.is_empty() {
            if card.kind == CardKind::Folder {
                naive.folder_parents += 1;
            } else {
                naive.container_parents += 1;
            }
        }
        let slot = if card.parent_id.is_none() {
            0
        } else if children.is_empty() {
            2
        } else {
            1
        };
        naive.positions[slot].0 += 1;
        if annotated(card) {
            naive.positions[slot].1 += 1;
            naive.annotated_count += 1;
            naive
                .lengths
                .get_mut(&card.kind)
                .unwrap()
                .push(words(&card.annotation));
        }
        for child in children.into_iter().rev() {
            stack.push(child);
        }
    }
    naive
}

fn frac(num: u128, den: u128) -> f64 {
    if den == 0 {
        0.0
    } else {
        let g = gcd(num, den);
        (num / g) as f64 / (den / g) as f64
    }
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

/// Compares the engine's per-project stats with the oracle, field by field.
pub fn check_project(state: &ProjectState, got: &ProjectStats) -> Result<(), String> {
    let n = naive_project(state);
    let checks: [(&str, bool); 10] = [
        ("card_count", got.card_count == n.card_count),
        ("counts_by_kind", got.counts_by_kind == n.counts_by_kind),
        ("max_depth", got.max_depth == n.max_depth),
        ("has_hierarchy", got.has_hierarchy == (n.max_depth >= 2)),
        ("annotated_count", got.annotated_count == n.annotated_count),
        (
            "annotated_fraction",
            got.annotated_fraction == frac(n.annotated_count as u128, n.card_count as u128),
        ),
        (
            "annotation_word_lengths",
            got.annotation_word_lengths == n.lengths,
        ),
        (
            "folder_parent_count",
            got.folder_parent_count == n.folder_parents,
        ),
        (
            "container_parent_count",
            got.container_parent_count == n.container_parents,
        ),
        (
            "annotation_by_position",
            [
                got.annotation_by_position.root,
                got.annotation_by_position.internal,
                got.annotation_by_position.leaf,
            ]
            .iter()
            .map(|p| (p.cards, p.annotated))
            .eq(n.positions),
        ),
    ];
    match checks.iter().find(|(_, ok)| !ok) {
        Some((field, _)) => Err(format!(
            "project stats field `{field}` disagrees with the oracle"
        )),
        None => Ok(()),
    }
}

/// Mean and standard error of `xs` from exact sums: the standard error is
/// `sqrt(sum((n*x - S)^2) / (n^3 (n-1)))`, which equals `s / sqrt(n)`.
pub fn mean_and_se(xs: &[usize]) -> (f64, f64) {
    let n = xs.len() as u128;
    if n == 0 {
        return (0.0, 0.0);
    }
    let s: u128 = xs.iter().map(|&x| x as u128).sum();
    let mean = frac(s, n);
    if n < 2 {
        return (mean, 0.0);
    }
    let dev: u128 = xs
        .iter()
        .map(|&x| {
            let d = (n * x as u128) as i128 - s as i128;
            (d * d) as u128
        })
        .sum();
    (mean, frac(dev, n * n * n * (n - 1)).sqrt())
}

pub fn check_corpus(states: &[&ProjectState], got: &CorpusReport) -> Result<(), String> {
    let all: Vec<Naive> = states.iter().map(|s| naive_project(s)).collect();
    let eligible: Vec<&Naive> = all
        .iter()
        .filter(|n| n.card_count - n.counts_by_kind[&CardKind::Folder] >= 3)
        .collect();
    let e = eligible.len() as u128;
    let count = |f: &dyn Fn(&Naive) -> bool| eligible.iter().filter(|n| f(n)).count() as u128;
    let folder: u128 = eligible.iter().map(|n| n.folder_parents as u128).sum();
    let container: u128 = eligible.iter().map(|n| n.container_parents as u128).sum();
    let mut positions = [(0u128, 0u128); 3];
    let mut lengths: BTreeMap<CardKind, Vec<usize>> = BTreeMap::new();
    for n in &eligible {
        for (slot, (cards, ann)) in n.positions.iter().enumerate() {
            positions[slot].0 += *cards as u128;
            positions[slot].1 += *ann as u128;
        }
        for (kind, xs) in &n.lengths {
            lengths.entry(*kind).or_default().extend(xs);
        }
    }

    let mut problems = Vec::new();
    let mut expect = |name: &str, ok: bool| {
        if !ok {
            problems.push(name.to_owned());
        }
    };
    expect("project_count", got.project_count == all.len());
    expect(
        "eligible_project_count",
        got.eligible_project_count as u128 == e,
    );
    expect(
        "fraction_with_hierarchy",
        got.fraction_with_hierarchy == frac(count(&|n| n.max_depth >= 2), e),
    );
    expect(
        "fraction_depth_gt2",
        got.fraction_depth_gt2 == frac(count(&|n| n.max_depth >= 3), e),
    );
    expect(
        "fraction_parents_folder",
        got.fraction_parents_folder == frac(folder, folder + container),
    );
    expect(
        "fraction_parents_container",
        got.fraction_parents_container == frac(container, folder + container),
    );
    let rates = got.annotation_rate_by_position;
    expect(
        "annotation_rate_root",
        rates.root == frac(positions[0].1, positions[0].0),
    );
    expect(
        "annotation_rate_internal",
        rates.internal == frac(positions[1].1, positions[1].0),
    );
    expect(
        "annotation_rate_leaf",
        rates.leaf == frac(positions[2].1, positions[2].0),
    );
    for kind in CardKind::ALL {
        let xs = lengths.get(&kind).cloned().unwrap_or_default();
        let (mean, se) = mean_and_se(&xs);
        let l = &got.annotation_lengths[&kind];
        expect(
            &format!("annotation_lengths[{kind}]"),
            l.annotated_cards == xs.len() && l.mean_words == mean && l.standard_error == se,
        );
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(format!(
            "corpus fields disagree with the oracle: {}",
            problems.join(", ")
        ))
    }
}

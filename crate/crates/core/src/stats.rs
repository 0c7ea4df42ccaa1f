//! Structural statistics over projects and corpora of projects.
//!
//! Depth convention: root cards sit at depth 1, so a project is "deeper than
//! two levels" when its maximum depth is 3 or more. A card is annotated when
//! its annotation is non-empty after trimming.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{word_count, CardKind};
use crate::store::ProjectState;

/// Projects with fewer non-folder cards than this only count towards
/// `project_count`.
pub const MIN_NON_FOLDER_CARDS: usize = 3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositionCount {
    pub cards: usize,
    pub annotated: usize,
}

/// Annotation counts by tree position: roots, non-root cards with children,
/// and non-root cards without children.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ByPosition<T> {
    pub root: T,
    pub internal: T,
    pub leaf: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectStats {
    pub card_count: usize,
    pub counts_by_kind: BTreeMap<CardKind, usize>,
    pub max_depth: usize,
    pub has_hierarchy: bool,
    pub annotated_count: usize,
    pub annotated_fraction: f64,
    /// Word counts of annotated cards, in depth-first order.
    pub annotation_word_lengths: BTreeMap<CardKind, Vec<usize>>,
    pub folder_parent_count: usize,
    pub container_parent_count: usize,
    pub annotation_by_position: ByPosition<PositionCount>,
}

impl ProjectStats {
    pub fn non_folder_count(&self) -> usize {
        self.card_count
            - self
                .counts_by_kind
                .get(&CardKind::Folder)
                .copied()
                .unwrap_or(0)
    }

    pub fn is_eligible(&self) -> bool {
        self.non_folder_count() >= MIN_NON_FOLDER_CARDS
    }
}

fn is_annotated(text: &str) -> bool {
    !text.trim().is_empty()
}

pub fn project_stats(state: &ProjectState) -> ProjectStats {
    let mut counts_by_kind: BTreeMap<CardKind, usize> =
        CardKind::ALL.iter().map(|k| (*k, 0)).collect();
    let mut annotation_word_lengths: BTreeMap<CardKind, Vec<usize>> =
        CardKind::ALL.iter().map(|k| (*k, Vec::new())).collect();
    let mut by_position = ByPosition::<PositionCount>::default();
    let (mut max_depth, mut annotated_count) = (0, 0);
    let (mut folder_parent_count, mut container_parent_count) = (0, 0);

    for (card, depth) in state.walk(None) {
        let depth = depth + 1;
        max_depth = max_depth.max(depth);
        *counts_by_kind.entry(card.kind).or_default() += 1;

        let has_children = !state.children(Some(card.id)).is_empty();
        if has_children {
            if card.kind == CardKind::Folder {
                folder_parent_count += 1;
            } else {
                container_parent_count += 1;
            }
        }

        let annotated = is_annotated(&card.annotation);
        let slot = match (card.parent_id, has_children) {
            (None, _) => &mut by_position.root,
            (Some(_), true) => &mut by_position.internal,
            (Some(_), false) => &mut by_position.leaf,
        };
        slot.cards += 1;
        if annotated {
            slot.annotated += 1;
            annotated_count += 1;
            annotation_word_lengths
                .entry(card.kind)
                .or_default()
                .push(word_count(&card.annotation));
        }
    }

    let card_count = state.len();
    ProjectStats {
        card_count,
        counts_by_kind,
        max_depth,
        has_hierarchy: max_depth >= 2,
        annotated_count,
        annotated_fraction: ratio(annotated_count, card_count),
        annotation_word_lengths,
        folder_parent_count,
        container_parent_count,
        annotation_by_position: by_position,
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Mean and standard error of annotation lengths for one card kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub annotated_cards: usize,
    pub mean_words: f64,
    /// Sample standard deviation over `sqrt(n)`; 0 when fewer than two cards.
    pub standard_error: f64,
}

impl LengthStats {
    /// Computed from exact integer moments, so the result does not depend on
    /// the order of the samples.
    pub fn from_moments(n: usize, sum: u128, sum_sq: u128) -> Self {
        if n == 0 {
            return LengthStats {
                annotated_cards: 0,
                mean_words: 0.0,
                standard_error: 0.0,
            };
        }
        let mean_words = sum as f64 / n as f64;
        let standard_error = if n < 2 {
            0.0
        } else {
            let n128 = n as u128;
            // s^2 / n = (n*Σx² - (Σx)²) / (n² (n-1))
            let numerator = n128 * sum_sq - sum * sum;
            let denominator = n128 * n128 * (n128 - 1);
            (numerator as f64 / denominator as f64).sqrt()
        };
        LengthStats {
            annotated_cards: n,
            mean_words,
            standard_error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub project_count: usize,
    pub eligible_project_count: usize,
    pub fraction_with_hierarchy: f64,
    pub fraction_depth_gt2: f64,
    pub fraction_parents_folder: f64,
    pub fraction_parents_container: f64,
    pub annotation_lengths: BTreeMap<CardKind, LengthStats>,
    pub annotation_rate_by_position: ByPosition<f64>,
}

pub fn corpus_report<'a>(projects: impl IntoIterator<Item = &'a ProjectState>) -> CorpusReport {
    let stats: Vec<ProjectStats> = projects.into_iter().map(project_stats).collect();
    aggregate(&stats)
}

/// Aggregates per-project stats over the eligible projects.
pub fn aggregate(stats: &[ProjectStats]) -> CorpusReport {
    let eligible: Vec<&ProjectStats> = stats.iter().filter(|s| s.is_eligible()).collect();
    let n = eligible.len();
    let with_hierarchy = eligible.iter().filter(|s| s.has_hierarchy).count();
    let deep = eligible.iter().filter(|s| s.max_depth >= 3).count();
    let folder_parents: usize = eligible.iter().map(|s| s.folder_parent_count).sum();
    let container_parents: usize = eligible.iter().map(|s| s.container_parent_count).sum();
    let parents = folder_parents + container_parents;

    let mut moments: BTreeMap<CardKind, (usize, u128, u128)> = BTreeMap::new();
    let mut positions = ByPosition::<PositionCount>::default();
    for s in &eligible {
        for (kind, lengths) in &s.annotation_word_lengths {
            let entry = moments.entry(*kind).or_default();
            for &len in lengths {
                entry.0 += 1;
                entry.1 += len as u128;
                entry.2 += (len as u128) * (len as u128);
            }
        }
        let p = &s.annotation_by_position;
        for (total, part) in [
            (&mut positions.root, p.root),
            (&mut positions.internal, p.internal),
            (&mut positions.leaf, p.leaf),
        ] {
            total.cards += part.cards;
            total.annotated += part.annotated;
        }
    }

    CorpusReport {
        project_count: stats.len(),
        eligible_project_count: n,
        fraction_with_hierarchy: ratio(with_hierarchy, n),
        fraction_depth_gt2: ratio(deep, n),
        fraction_parents_folder: ratio(folder_parents, parents),
        fraction_parents_container: ratio(container_parents, parents),
        annotation_lengths: CardKind::ALL
            .iter()
            .map(|k| {
                let (count, sum, sum_sq) = moments.get(k).copied().unwrap_or_default();
                (*k, LengthStats::from_moments(count, sum, sum_sq))
            })
            .collect(),
        annotation_rate_by_position: ByPosition {
            root: ratio(positions.root.annotated, positions.root.cards),
            internal: ratio(positions.internal.annotated, positions.internal.cards),
            leaf: ratio(positions.leaf.annotated, positions.leaf.cards),
        },
    }
}

impl CorpusReport {
    /// Average annotation length by card kind, one CSV row per kind.
    pub fn annotation_table_csv(&self) -> String {
        let mut out = String::from("kind,annotated_cards,mean_words,standard_error\n");
        for (kind, s) in &self.annotation_lengths {
            let _ = writeln!(
                out,
                "{kind},{},{},{}",
                s.annotated_cards, s.mean_words, s.standard_error
            );
        }
        out
    }

    /// The same table, aligned for terminals.
    pub fn annotation_table_text(&self) -> String {
        let mut out = String::from("average lengths of annotations by word\n");
        let _ = writeln!(
            out,
            "{:<14} {:>6} {:>10} {:>10}",
            "kind", "n", "mean", "std.err"
        );
        for (kind, s) in &self.annotation_lengths {
            let _ = writeln!(
                out,
                "{:<14} {:>6} {:>10.3} {:>10.3}",
                kind.as_str(),
                s.annotated_cards,
                s.mean_words,
                s.standard_error
            );
        }
        out
    }

    /// Every field as `metric,value` rows, followed by the annotation table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        let rows: [(&str, String); 9] = [
            ("project_count", self.project_count.to_string()),
            (
                "eligible_project_count",
                self.eligible_project_count.to_string(),
            ),
            (
                "fraction_with_hierarchy",
                self.fraction_with_hierarchy.to_string(),
            ),
            ("fraction_depth_gt2", self.fraction_depth_gt2.to_string()),
            (
                "fraction_parents_folder",
                self.fraction_parents_folder.to_string(),
            ),
            (
                "fraction_parents_container",
                self.fraction_parents_container.to_string(),
            ),
            (
                "annotation_rate_root",
                self.annotation_rate_by_position.root.to_string(),
            ),
            (
                "annotation_rate_internal",
                self.annotation_rate_by_position.internal.to_string(),
            ),
            (
                "annotation_rate_leaf",
                self.annotation_rate_by_position.leaf.to_string(),
            ),
        ];
        for (name, value) in rows {
            let _ = writeln!(out, "{name},{value}");
        }
        out.push('\n');
        out.push_str(&self.annotation_table_csv());
        out
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::clock::{StepClock, Timestamp};
    use crate::model::CardId;
    use crate::store::LiveProject;

    fn project() -> LiveProject {
        LiveProject::create("p", Arc::new(StepClock::new(Timestamp::EPOCH, 1))).unwrap()
    }

    fn add(p: &mut LiveProject, kind: CardKind, parent: Option<CardId>) -> CardId {
        p.create_card(kind, "t", parent, None).unwrap()
    }

    #[test]
    fn flat_unannotated_project() {
        let mut p = project();
        for _ in 0..5 {
            add(&mut p, CardKind::Manual, None);
        }
        let s = project_stats(p.state());
        assert_eq!(s.card_count, 5);
        assert_eq!(s.max_depth, 1);
        assert!(!s.has_hierarchy);
        assert_eq!(s.annotated_fraction, 0.0);
        assert_eq!(s.counts_by_kind[&CardKind::Manual], 5);
        assert_eq!(s.counts_by_kind.values().sum::<usize>(), 5);
    }

    #[test]
    fn folder_chain_is_deeper_than_two_levels() {
        let mut p = project();
        let a = add(&mut p, CardKind::Folder, None);
        let b = add(&mut p, CardKind::Folder, Some(a));
        add(&mut p, CardKind::Manual, Some(b));
        let s = project_stats(p.state());
        assert_eq!(s.max_depth, 3);
        assert!(s.has_hierarchy);
        assert_eq!(s.folder_parent_count, 2);
        assert_eq!(s.container_parent_count, 0);
        assert_eq!(s.annotation_by_position.internal.cards, 1);
        assert_eq!(s.annotation_by_position.leaf.cards, 1);
    }

    #[test]
    fn annotation_words_use_whitespace_runs() {
        let mut p = project();
        let c = add(&mut p, CardKind::Manual, None);
        add(&mut p, CardKind::Manual, None);
        p.set_annotation(c, "nice   jacket ").unwrap();
        let s = project_stats(p.state());
        assert_eq!(s.annotation_word_lengths[&CardKind::Manual], [2]);
        assert_eq!(s.annotated_fraction, 0.5);
        assert_eq!(
            s.annotation_by_position.root,
            PositionCount {
                cards: 2,
                annotated: 1
            }
        );
    }

    #[test]
    fn whitespace_annotations_do_not_count() {
        let mut p = project();
        let c = add(&mut p, CardKind::Manual, None);
        p.set_annotation(c, "   ").unwrap();
        assert_eq!(project_stats(p.state()).annotated_count, 0);
    }

    #[test]
    fn empty_corpus_is_all_zero() {
        let r = corpus_report(std::iter::empty());
        assert_eq!(r.project_count, 0);
        assert_eq!(r.eligible_project_count, 0);
        assert_eq!(r.fraction_with_hierarchy, 0.0);
        assert_eq!(r.fraction_parents_folder, 0.0);
        assert!(r
            .annotation_lengths
            .values()
            .all(|s| s.annotated_cards == 0));
    }

    #[test]
    fn small_projects_are_not_eligible() {
        let mut tiny = project();
        let f = add(&mut tiny, CardKind::Folder, None);
        add(&mut tiny, CardKind::Manual, Some(f));
        add(&mut tiny, CardKind::Manual, Some(f));
        let r = corpus_report([tiny.state()]);
        assert_eq!(r.project_count, 1);
        assert_eq!(r.eligible_project_count, 0);
        assert_eq!(r.fraction_with_hierarchy, 0.0);
    }

    #[test]
    fn length_stats_from_moments() {
        // Samples 2, 4, 4, 4, 5, 5, 7, 9: mean 5, sample variance 32/7.
        let xs = [2u128, 4, 4, 4, 5, 5, 7, 9];
        let s = LengthStats::from_moments(8, xs.iter().sum(), xs.iter().map(|x| x * x).sum());
        assert_eq!(s.mean_words, 5.0);
        assert!((s.standard_error - (32.0f64 / 7.0 / 8.0).sqrt()).abs() < 1e-15);
        assert_eq!(LengthStats::from_moments(1, 9, 81).standard_error, 0.0);
    }

    #[test]
    fn csv_table_shape() {
        let r = corpus_report(std::iter::empty());
        let csv = r.annotation_table_csv();
        assert_eq!(csv.lines().count(), 1 + CardKind::ALL.len());
        assert!(
            csv.starts_with("kind,annotated_cards,mean_words,standard_error\nTEXT_SNIPPET,0,0,0\n")
        );
        assert!(r.to_csv().contains("fraction_with_hierarchy,0\n"));
    }
}

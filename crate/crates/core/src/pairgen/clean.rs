use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Label, LabeledPair};
use crate::embeddings::{cosine, EmbeddingTable};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub kept: usize,
    pub dropped_by_threshold: usize,
    pub dropped_missing_image: usize,
}

/// Keeps positives with image cosine >= `pos_min` and negatives with cosine
/// <= `neg_max`. `images` is keyed by product id; a pair whose image is
/// missing (or all-zero) cannot be checked and is dropped.
pub fn clean_with_images(
    pairs: &[LabeledPair],
    images: &EmbeddingTable,
    pos_min: f64,
    neg_max: f64,
) -> (Vec<LabeledPair>, CleanReport) {
    let mut report = CleanReport::default();
    let mut kept = Vec::with_capacity(pairs.len());
    for p in pairs {
        let sim = match (images.get(&p.a), images.get(&p.b)) {
            (Some(x), Some(y)) => cosine(x, y).ok(),
            _ => None,
        };
        let Some(sim) = sim else {
            report.dropped_missing_image += 1;
            continue;
        };
        let keep = match p.label {
            Label::Positive => sim >= pos_min,
            Label::Negative => sim <= neg_max,
        };
        if keep {
            kept.push(p.clone());
        } else {
            report.dropped_by_threshold += 1;
        }
    }
    report.kept = kept.len();
    (kept, report)
}

/// Drops every pair that carries both labels from both sides.
pub fn remove_conflicts(
    positives: &[LabeledPair],
    negatives: &[LabeledPair],
) -> (Vec<LabeledPair>, Vec<LabeledPair>) {
    let pos: BTreeSet<(&str, &str)> = positives.iter().map(LabeledPair::key).collect();
    let neg: BTreeSet<(&str, &str)> = negatives.iter().map(LabeledPair::key).collect();
    let both: BTreeSet<_> = pos.intersection(&neg).copied().collect();
    let keep = |ps: &[LabeledPair]| {
        ps.iter()
            .filter(|p| !both.contains(&p.key()))
            .cloned()
            .collect::<Vec<_>>()
    };
    (keep(positives), keep(negatives))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::EmbeddingKind;
    use crate::pairgen::Origin;
    use proptest::prelude::*;

    fn pair(a: &str, b: &str, label: Label) -> LabeledPair {
        LabeledPair::new(a, b, label, Origin::Observed).unwrap()
    }

    fn images() -> EmbeddingTable {
        let mut t = EmbeddingTable::new(EmbeddingKind::Image, 4);
        t.insert("base", vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        t.insert("same", vec![2.0, 0.0, 0.0, 0.0]).unwrap();
        t.insert("c080", vec![0.8, 0.6, 0.0, 0.0]).unwrap();
        t.insert("c079", vec![0.79, (1.0f64 - 0.79 * 0.79).sqrt(), 0.0, 0.0]).unwrap();
        t.insert("c051", vec![0.51, (1.0f64 - 0.51 * 0.51).sqrt(), 0.0, 0.0]).unwrap();
        // cosine exactly 0.5
        t.insert("c050", vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        t
    }

    #[test]
    fn positive_thresholds() {
        let pairs = vec![
            pair("base", "same", Label::Positive),
            pair("base", "c080", Label::Positive),
            pair("base", "c079", Label::Positive),
        ];
        let (kept, report) = clean_with_images(&pairs, &images(), 0.8, 0.5);
        let ids: Vec<_> = kept.iter().map(|p| p.b.as_str()).collect();
        assert_eq!(ids, vec!["same", "c080"]);
        assert_eq!(report.dropped_by_threshold, 1);
    }

    #[test]
    fn negative_thresholds_and_missing() {
        let pairs = vec![
            pair("base", "c051", Label::Negative),
            pair("base", "c050", Label::Negative),
            pair("base", "ghost", Label::Negative),
        ];
        let (kept, report) = clean_with_images(&pairs, &images(), 0.8, 0.5);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].b, "c050");
        assert_eq!(report.dropped_missing_image, 1);
        assert_eq!(report.dropped_by_threshold, 1);
    }

    #[test]
    fn conflicts_removed_from_both_sides() {
        let pos = vec![pair("A", "B", Label::Positive), pair("A", "C", Label::Positive)];
        let neg = vec![pair("B", "A", Label::Negative), pair("D", "E", Label::Negative)];
        let (p, n) = remove_conflicts(&pos, &neg);
        assert_eq!(p, vec![pair("A", "C", Label::Positive)]);
        assert_eq!(n, vec![pair("D", "E", Label::Negative)]);
        let (p2, n2) = remove_conflicts(&p, &n);
        assert_eq!((p2, n2), (p, n));
    }

    proptest! {
        #[test]
        fn conflict_free_outputs_are_disjoint(
            pos in prop::collection::vec((0u8..12, 0u8..12), 0..40),
            neg in prop::collection::vec((0u8..12, 0u8..12), 0..40),
        ) {
            let mk = |v: &[(u8, u8)], l| v.iter()
                .filter_map(|(a, b)| LabeledPair::new(&a.to_string(), &b.to_string(), l, Origin::Observed))
                .collect::<Vec<_>>();
            let (p, n) = remove_conflicts(&mk(&pos, Label::Positive), &mk(&neg, Label::Negative));
            let pk: BTreeSet<_> = p.iter().map(|x| x.key()).collect();
            let nk: BTreeSet<_> = n.iter().map(|x| x.key()).collect();
            prop_assert!(pk.is_disjoint(&nk));
        }
    }
}

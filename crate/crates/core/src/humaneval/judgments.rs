//! Raw pairwise responses and their aggregation into a win matrix.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// One crowd response: which of two properties matters more.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawResponse {
    pub item_a: String,
    pub item_b: String,
    pub winner: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_pass: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_answer: Option<String>,
}

impl RawResponse {
    /// With a control key the recorded answer must equal it; otherwise the
    /// precomputed `control_pass` flag decides. Missing information fails.
    pub fn passes(&self, control_key: Option<&str>) -> bool {
        match (control_key, &self.control_answer) {
            (Some(key), Some(answer)) => answer == key,
            _ => self.control_pass.unwrap_or(false),
        }
    }

    fn is_well_formed(&self) -> bool {
        self.item_a != self.item_b && (self.winner == self.item_a || self.winner == self.item_b)
    }
}

/// `wins[i][j]` counts judgments preferring `items[i]` over `items[j]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseJudgments {
    pub items: Vec<String>,
    pub wins: Vec<Vec<u64>>,
}

impl PairwiseJudgments {
    pub fn from_tally(tally: &BTreeMap<(String, String), u64>) -> Self {
        let items: Vec<String> = tally
            .keys()
            .flat_map(|(a, b)| [a.clone(), b.clone()])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: BTreeMap<&str, usize> = items.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let mut wins = vec![vec![0u64; items.len()]; items.len()];
        for ((w, l), c) in tally {
            wins[index[w.as_str()]][index[l.as_str()]] += c;
        }
        Self { items, wins }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn wins_of(&self, winner: &str, loser: &str) -> u64 {
        let i = self.items.iter().position(|s| s == winner);
        let j = self.items.iter().position(|s| s == loser);
        match (i, j) {
            (Some(i), Some(j)) => self.wins[i][j],
            _ => 0,
        }
    }

    pub fn total(&self) -> u64 {
        self.wins.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlReport {
    pub judgments: PairwiseJudgments,
    pub kept: usize,
    pub dropped_control: usize,
    pub dropped_malformed: usize,
}

/// Drops responses failing the control task (and malformed ones) and tallies
/// the rest. Items are the properties seen among surviving responses.
pub fn filter_control(responses: &[RawResponse], control_key: Option<&str>) -> ControlReport {
    let mut tally: BTreeMap<(String, String), u64> = BTreeMap::new();
    let (mut kept, mut dropped_control, mut dropped_malformed) = (0, 0, 0);
    for r in responses {
        if !r.passes(control_key) {
            dropped_control += 1;
        } else if !r.is_well_formed() {
            dropped_malformed += 1;
        } else {
            let loser = if r.winner == r.item_a { &r.item_b } else { &r.item_a };
            *tally.entry((r.winner.clone(), loser.clone())).or_default() += 1;
            kept += 1;
        }
    }
    if dropped_control + dropped_malformed > 0 {
        log::info!("control filter kept {kept}, dropped {dropped_control} failing control, {dropped_malformed} malformed");
    }
    ControlReport {
        judgments: PairwiseJudgments::from_tally(&tally),
        kept,
        dropped_control,
        dropped_malformed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn resp(a: &str, b: &str, w: &str, pass: bool) -> RawResponse {
        RawResponse {
            item_a: a.into(),
            item_b: b.into(),
            winner: w.into(),
            control_pass: Some(pass),
            control_answer: None,
        }
    }

    #[test]
    fn all_pass_equals_raw_tally() {
        let rs = vec![resp("color", "size", "color", true), resp("size", "color", "color", true), resp("color", "size", "size", true)];
        let r = filter_control(&rs, None);
        assert_eq!(r.judgments.items, ["color", "size"]);
        assert_eq!(r.judgments.wins, vec![vec![0, 2], vec![1, 0]]);
        assert_eq!((r.kept, r.dropped_control), (3, 0));
    }

    #[test]
    fn all_fail_gives_empty_matrix() {
        let rs = vec![resp("a", "b", "a", false), resp("a", "b", "b", false)];
        let r = filter_control(&rs, None);
        assert!(r.judgments.is_empty());
        assert_eq!(r.dropped_control, 2);
    }

    #[test]
    fn control_key_compares_answers() {
        let mut good = resp("a", "b", "a", false);
        good.control_answer = Some("blue".into());
        let mut bad = resp("a", "b", "b", true);
        bad.control_answer = Some("red".into());
        let r = filter_control(&[good, bad], Some("blue"));
        assert_eq!(r.judgments.wins_of("a", "b"), 1);
        assert_eq!(r.judgments.wins_of("b", "a"), 0);
        assert_eq!(r.dropped_control, 1);
    }

    #[test]
    fn malformed_winner_dropped() {
        let r = filter_control(&[resp("a", "b", "c", true), resp("a", "a", "a", true)], None);
        assert_eq!(r.dropped_malformed, 2);
        assert!(r.judgments.is_empty());
    }

    proptest! {
        #[test]
        fn matches_independent_tally(raw in prop::collection::vec((0usize..4, 0usize..4, any::<bool>(), any::<bool>()), 0..60)) {
            let names = ["a", "b", "c", "d"];
            let rs: Vec<RawResponse> = raw.iter()
                .filter(|(a, b, _, _)| a != b)
                .map(|(a, b, first, pass)| resp(names[*a], names[*b], if *first { names[*a] } else { names[*b] }, *pass))
                .collect();
            let got = filter_control(&rs, None);
            let unfiltered = filter_control(&rs.iter().cloned().map(|mut r| { r.control_pass = Some(true); r }).collect::<Vec<_>>(), None);
            for w in names {
                for l in names {
                    let oracle = rs.iter().filter(|r| r.control_pass == Some(true) && r.winner == w
                        && (if r.item_a == w { r.item_b == l } else { r.item_a == l })).count() as u64;
                    prop_assert_eq!(got.judgments.wins_of(w, l), oracle);
                    prop_assert!(got.judgments.wins_of(w, l) <= unfiltered.judgments.wins_of(w, l));
                }
            }
            prop_assert_eq!(got.kept + got.dropped_control, rs.len());
        }
    }
}

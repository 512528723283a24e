use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{canonical, CountedPair, Label, LabeledPair, Origin};
use crate::catalog::{Session, SessionKind};

/// How far apart two events may be to count as co-occurring.
/// `None` for purchases means anywhere in the same session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiningConfig {
    pub view_adjacency: usize,
    pub purchase_window: Option<usize>,
}

impl Default for MiningConfig {
    fn default() -> Self {
        Self {
            view_adjacency: 1,
            purchase_window: None,
        }
    }
}

fn finish(counts: BTreeMap<(String, String), u64>, min_count: u64) -> Vec<CountedPair> {
    counts
        .into_iter()
        .filter(|(_, c)| *c >= min_count)
        .map(|((a, b), count)| CountedPair { a, b, count })
        .collect()
}

/// Counts each pair of browse events at most `adjacency` positions apart,
/// once per occurrence; returns pairs seen at least `min_count` times.
pub fn mine_coview(sessions: &[Session], min_count: u64, adjacency: usize) -> Vec<CountedPair> {
    let mut counts: BTreeMap<(String, String), u64> = BTreeMap::new();
    for s in sessions.iter().filter(|s| s.kind == SessionKind::Browse) {
        let ids: Vec<&str> = s.product_ids().collect();
        for i in 0..ids.len() {
            for j in i + 1..ids.len().min(i + adjacency + 1) {
                if ids[i] != ids[j] {
                    *counts.entry(canonical(ids[i], ids[j])).or_default() += 1;
                }
            }
        }
    }
    finish(counts, min_count)
}

/// Counts each distinct pair of products bought in one purchase session once
/// per session.
pub fn mine_copurchase(
    sessions: &[Session],
    min_count: u64,
    window: Option<usize>,
) -> Vec<CountedPair> {
    let mut counts: BTreeMap<(String, String), u64> = BTreeMap::new();
    for s in sessions.iter().filter(|s| s.kind == SessionKind::Purchase) {
        let ids: Vec<&str> = s.product_ids().collect();
        let reach = window.unwrap_or(ids.len());
        let mut seen = BTreeSet::new();
        for i in 0..ids.len() {
            for j in i + 1..ids.len().min(i.saturating_add(reach).saturating_add(1)) {
                if ids[i] != ids[j] {
                    seen.insert(canonical(ids[i], ids[j]));
                }
            }
        }
        for key in seen {
            *counts.entry(key).or_default() += 1;
        }
    }
    finish(counts, min_count)
}

pub fn label_pairs(pairs: &[CountedPair], label: Label) -> Vec<LabeledPair> {
    pairs
        .iter()
        .filter_map(|p| LabeledPair::new(&p.a, &p.b, label, Origin::Observed))
        .collect()
}

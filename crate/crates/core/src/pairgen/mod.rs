//! Unsupervised training pairs for the substitute classifier.
//!
//! Co-viewed products become positives, co-purchased products negatives.
//! Pairs can then be cleaned by image similarity, stripped of conflicting
//! labels, grouped into substitute clusters and augmented by swapping one
//! member for another product of its cluster.

mod augment;
mod clean;
mod cluster;
mod mining;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::ProductSplit;

pub use augment::augment_synthetic;
pub use clean::{clean_with_images, remove_conflicts, CleanReport};
pub use cluster::{build_clusters, cluster_index, UnionFind};
pub use mining::{label_pairs, mine_copurchase, mine_coview, MiningConfig};

pub const DEFAULT_COVIEW_MIN: u64 = 10;
pub const DEFAULT_COPURCHASE_MIN: u64 = 1;
pub const DEFAULT_MAX_CLUSTER: usize = 40;
pub const DEFAULT_POSITIVE_MIN_COSINE: f64 = 0.8;
pub const DEFAULT_NEGATIVE_MAX_COSINE: f64 = 0.5;
pub const DEFAULT_SYNTHETIC_PER_PAIR: usize = 5;

/// Orders two ids so an unordered pair has a single representation.
pub fn canonical(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CountedPair {
    pub a: String,
    pub b: String,
    pub count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn as_f64(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Observed,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabeledPair {
    pub a: String,
    pub b: String,
    pub label: Label,
    pub origin: Origin,
}

impl LabeledPair {
    /// Canonically ordered pair; `None` for a self-pair.
    pub fn new(a: &str, b: &str, label: Label, origin: Origin) -> Option<Self> {
        if a == b {
            return None;
        }
        let (a, b) = canonical(a, b);
        Some(Self {
            a,
            b,
            label,
            origin,
        })
    }

    pub fn key(&self) -> (&str, &str) {
        (&self.a, &self.b)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.a == id || self.b == id
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubstituteCluster {
    pub cluster_id: usize,
    pub members: Vec<String>,
}

/// A pair belongs to validation when either endpoint is a validation product.
pub fn partition_by_split(
    pairs: &[LabeledPair],
    split: &ProductSplit,
) -> (Vec<LabeledPair>, Vec<LabeledPair>) {
    pairs
        .iter()
        .cloned()
        .partition(|p| !(split.is_validation(&p.a) || split.is_validation(&p.b)))
}

/// Pair counts in the train/validation positive/negative layout.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairStats {
    pub train_pos: usize,
    pub train_neg: usize,
    pub validation_pos: usize,
    pub validation_neg: usize,
    pub synthetic: usize,
    pub clusters: usize,
    pub dropped_by_cleaning: usize,
    pub dropped_missing_image: usize,
    pub conflicts_removed: usize,
}

impl PairStats {
    pub fn count(train: &[LabeledPair], validation: &[LabeledPair]) -> Self {
        let tally = |ps: &[LabeledPair], l: Label| ps.iter().filter(|p| p.label == l).count();
        Self {
            train_pos: tally(train, Label::Positive),
            train_neg: tally(train, Label::Negative),
            validation_pos: tally(validation, Label::Positive),
            validation_neg: tally(validation, Label::Negative),
            synthetic: train
                .iter()
                .chain(validation)
                .filter(|p| p.origin == Origin::Synthetic)
                .count(),
            ..Self::default()
        }
    }
}

/// Cluster lookup: product id → (cluster id, cluster size).
pub type ClusterIndex = BTreeMap<String, (usize, usize)>;

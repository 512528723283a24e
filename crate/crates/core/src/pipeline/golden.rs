//! Golden evaluation pairs drawn from the generator's ground-truth clusters.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::simulate::ShopManifest;
use crate::catalog::ProductSplit;
use crate::embeddings::CandidateList;
use crate::error::{Error, Result};
use crate::pairgen::{canonical, Label, LabeledPair, Origin};

/// Balanced golden pairs over validation products only. Positives join two
/// members of one cluster; negatives join products of different clusters
/// where one appears in the other's retrieved candidate list. With
/// `count = None` every available positive is used.
pub fn golden_pairs(
    manifest: &ShopManifest,
    split: &ProductSplit,
    candidates: &BTreeMap<String, CandidateList>,
    count: Option<usize>,
    seed: u64,
) -> Result<Vec<LabeledPair>> {
    if manifest.clusters.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "golden pairs need at least 2 clusters, manifest has {}",
            manifest.clusters.len()
        )));
    }
    let cluster = manifest.cluster_of();

    let mut positives: Vec<(String, String)> = Vec::new();
    for c in &manifest.clusters {
        let held: Vec<&String> = c.members.iter().filter(|m| split.is_validation(m)).collect();
        for i in 0..held.len() {
            for j in i + 1..held.len() {
                positives.push(canonical(held[i], held[j]));
            }
        }
    }
    let mut negatives: BTreeSet<(String, String)> = BTreeSet::new();
    for (query, list) in candidates {
        let Some(&qc) = cluster.get(query.as_str()) else { continue };
        if !split.is_validation(query) {
            continue;
        }
        for id in list.ids() {
            if split.is_validation(id) && cluster.get(id).is_some_and(|&c| c != qc) {
                negatives.insert(canonical(query, id));
            }
        }
    }
    positives.sort();
    let negatives: Vec<(String, String)> = negatives.into_iter().collect();

    let (n_pos, n_neg) = match count {
        Some(n) => (n / 2, n - n / 2),
        None => {
            let n = positives.len().min(negatives.len());
            (n, n)
        }
    };
    if n_pos == 0 || n_pos > positives.len() || n_neg > negatives.len() {
        return Err(Error::InvalidArgument(format!(
            "golden pairs: requested {n_pos} positives / {n_neg} negatives, available {} / {}",
            positives.len(),
            negatives.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<LabeledPair> = positives
        .choose_multiple(&mut rng, n_pos)
        .filter_map(|(a, b)| LabeledPair::new(a, b, Label::Positive, Origin::Observed))
        .chain(
            negatives
                .choose_multiple(&mut rng, n_neg)
                .filter_map(|(a, b)| LabeledPair::new(a, b, Label::Negative, Origin::Observed)),
        )
        .collect();
    out.sort_by(|x, y| x.key().cmp(&y.key()));
    Ok(out)
}

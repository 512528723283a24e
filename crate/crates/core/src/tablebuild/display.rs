//! Final display selection: one substitute per target price bin, chosen
//! greedily for entropy-weighted Hamming diversity.

use std::collections::{BTreeMap, BTreeSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pricing::{PriceBinning, ALLOWED_BINS, CENTER_BIN};
use super::properties::property_entropy;
use crate::catalog::Product;
use crate::error::{Error, Result};

pub const DEFAULT_DISPLAY_WIDTH: usize = 3;

/// A retrieved substitute together with its classifier score.
#[derive(Debug, Clone, Copy)]
pub struct ScoredCandidate<'a> {
    pub product: &'a Product,
    pub score: f64,
}

/// Per-property weight `exp(-H_p)`, with `H_p` measured over `products`.
pub fn entropy_weights(products: &[&Product]) -> BTreeMap<String, f64> {
    let names: BTreeSet<&String> = products.iter().flat_map(|p| p.properties.keys()).collect();
    names
        .into_iter()
        .map(|n| (n.clone(), (-property_entropy(products, n)).exp()))
        .collect()
}

/// Weighted Hamming distance; a property missing on both sides counts as equal.
pub fn weighted_hamming(a: &Product, b: &Product, weights: &BTreeMap<String, f64>) -> f64 {
    weights
        .iter()
        .filter(|(p, _)| a.properties.get(*p) != b.properties.get(*p))
        .map(|(_, w)| w)
        .sum()
}

/// Sum of pairwise distances within `set`.
pub fn total_diversity(set: &[&Product], weights: &BTreeMap<String, f64>) -> f64 {
    let mut total = 0.0;
    for i in 0..set.len() {
        for j in i + 1..set.len() {
            total += weighted_hamming(set[i], set[j], weights);
        }
    }
    total
}

/// How the first pick is made.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Seeding {
    /// Highest-scoring candidate of the first target bin.
    TopScore,
    /// Run the greedy pass once per candidate of the first target bin,
    /// improve each result by per-slot swaps within its bin, and keep the
    /// most diverse one.
    #[default]
    MultiStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum SelectionMode {
    Greedy { seeding: Seeding },
    /// Each slot draws a candidate with probability proportional to
    /// `1 + marginal diversity`.
    Sampled { seed: u64 },
}

impl Default for SelectionMode {
    fn default() -> Self {
        SelectionMode::Greedy {
            seeding: Seeding::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Fallback {
    /// Target bin had no remaining candidate; `used` was the nearest bin that did.
    NeighborBin { target: usize, used: usize },
    /// Fewer allowed-bin candidates than display slots.
    TooFewCandidates { available: usize, requested: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub query_id: String,
    pub substitutes: Vec<String>,
    pub properties: Vec<String>,
    pub property_scores: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fallback: Vec<Fallback>,
}

/// Target bins for `w` slots: the query bin, then alternately one step
/// cheaper and one step dearer, clamped to the allowed range.
pub fn target_bins(query_bin: usize, w: usize) -> Vec<usize> {
    let (lo, hi) = (*ALLOWED_BINS.start() as i64, *ALLOWED_BINS.end() as i64);
    let qb = (query_bin as i64).clamp(lo, hi);
    (0..w as i64)
        .map(|i| {
            let step = (i + 1) / 2;
            let off = if i % 2 == 1 { -step } else { step };
            (qb + off).clamp(lo, hi) as usize
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub ids: Vec<String>,
    pub fallback: Vec<Fallback>,
}

struct Pool<'a> {
    cands: Vec<(ScoredCandidate<'a>, usize)>,
}

impl<'a> Pool<'a> {
    /// Index set eligible for `target`, falling back to the nearest non-empty
    /// allowed bin (ties go to the cheaper bin).
    fn eligible(&self, taken: &[usize], target: usize) -> Option<(Vec<usize>, usize)> {
        let free: Vec<usize> = (0..self.cands.len()).filter(|i| !taken.contains(i)).collect();
        let mut bins: Vec<usize> = free.iter().map(|&i| self.cands[i].1).collect();
        bins.sort_unstable();
        bins.dedup();
        let used = *bins.iter().min_by_key(|&&b| (b.abs_diff(target), b))?;
        Some((free.into_iter().filter(|&i| self.cands[i].1 == used).collect(), used))
    }
}

fn better(a: (f64, f64, &str), b: (f64, f64, &str)) -> bool {
    // (diversity, score, id): larger diversity, then larger score, then smaller id.
    match a.0.total_cmp(&b.0) {
        std::cmp::Ordering::Equal => match a.1.total_cmp(&b.1) {
            std::cmp::Ordering::Equal => a.2 < b.2,
            o => o.is_gt(),
        },
        o => o.is_gt(),
    }
}

fn marginal(pool: &Pool, taken: &[usize], i: usize, weights: &BTreeMap<String, f64>) -> f64 {
    taken
        .iter()
        .map(|&j| weighted_hamming(pool.cands[i].0.product, pool.cands[j].0.product, weights))
        .sum()
}

fn greedy_pass(
    pool: &Pool,
    targets: &[usize],
    weights: &BTreeMap<String, f64>,
    first: Option<usize>,
    mut rng: Option<&mut ChaCha8Rng>,
) -> (Vec<usize>, Vec<Fallback>) {
    let mut taken: Vec<usize> = Vec::new();
    let mut fallback = Vec::new();
    for (slot, &target) in targets.iter().enumerate() {
        let Some((eligible, used)) = pool.eligible(&taken, target) else {
            break;
        };
        if used != target {
            fallback.push(Fallback::NeighborBin { target, used });
        }
        let pick = match (slot, first) {
            (0, Some(f)) => f,
            _ => match rng.as_deref_mut() {
                Some(rng) => {
                    let w: Vec<f64> = eligible.iter().map(|&i| 1.0 + marginal(pool, &taken, i, weights)).collect();
                    eligible[WeightedIndex::new(&w).expect("positive weights").sample(rng)]
                }
                None => {
                    let mut best = eligible[0];
                    let key = |i: usize| {
                        let c = &pool.cands[i].0;
                        (marginal(pool, &taken, i, weights), c.score, c.product.id.as_str())
                    };
                    for &i in &eligible[1..] {
                        if better(key(i), key(best)) {
                            best = i;
                        }
                    }
                    best
                }
            },
        };
        taken.push(pick);
    }
    (taken, fallback)
}

/// Coordinate ascent: repeatedly re-picks each slot within its bin given the
/// other picks, keeping a change only if it strictly raises diversity.
fn refine(pool: &Pool, taken: &mut [usize], weights: &BTreeMap<String, f64>) {
    loop {
        let mut improved = false;
        for slot in 0..taken.len() {
            let others: Vec<usize> = taken.iter().enumerate().filter(|(k, _)| *k != slot).map(|(_, &i)| i).collect();
            let bin = pool.cands[taken[slot]].1;
            let current = marginal(pool, &others, taken[slot], weights);
            let best = (0..pool.cands.len())
                .filter(|i| pool.cands[*i].1 == bin && !others.contains(i))
                .map(|i| (marginal(pool, &others, i, weights), i))
                .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
            if let Some((gain, i)) = best {
                if gain > current + 1e-12 {
                    taken[slot] = i;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
}

/// Picks up to `w` display substitutes. Candidates in discard bins, the query
/// itself and duplicate ids are never chosen.
pub fn select_display(
    query: &Product,
    substitutes: &[ScoredCandidate],
    binning: &PriceBinning,
    weights: &BTreeMap<String, f64>,
    w: usize,
    mode: SelectionMode,
) -> Result<Selection> {
    if substitutes.is_empty() {
        return Err(Error::EmptyCandidates(query.id.clone()));
    }
    if w == 0 {
        return Err(Error::InvalidArgument("display width must be positive".into()));
    }
    let mut seen = BTreeSet::new();
    let mut cands = Vec::new();
    for c in substitutes {
        if c.product.id == query.id || !seen.insert(c.product.id.as_str()) {
            continue;
        }
        let bin = binning
            .bin_of(&c.product.id)
            .unwrap_or_else(|| binning.bin_for_log_price(c.product.price.ln()));
        if PriceBinning::is_allowed(bin) {
            cands.push((*c, bin));
        }
    }
    let pool = Pool { cands };
    let query_bin = binning.bin_of(&query.id).unwrap_or(CENTER_BIN);
    let targets = target_bins(query_bin, w.min(pool.cands.len()));

    let (taken, mut fallback) = match mode {
        SelectionMode::Sampled { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            greedy_pass(&pool, &targets, weights, None, Some(&mut rng))
        }
        SelectionMode::Greedy { seeding: Seeding::TopScore } => greedy_pass(&pool, &targets, weights, None, None),
        SelectionMode::Greedy { seeding: Seeding::MultiStart } => {
            let starts = targets
                .first()
                .and_then(|&t| pool.eligible(&[], t))
                .map(|(e, _)| e)
                .unwrap_or_default();
            let mut best: Option<((Vec<usize>, Vec<Fallback>), (f64, f64, &str))> = None;
            for s in starts {
                let mut run = greedy_pass(&pool, &targets, weights, Some(s), None);
                refine(&pool, &mut run.0, weights);
                let products: Vec<&Product> = run.0.iter().map(|&i| pool.cands[i].0.product).collect();
                let key = (
                    total_diversity(&products, weights),
                    pool.cands[s].0.score,
                    pool.cands[s].0.product.id.as_str(),
                );
                if best.as_ref().is_none_or(|(_, k)| better(key, *k)) {
                    best = Some((run, key));
                }
            }
            best.map(|(r, _)| r).unwrap_or_default()
        }
    };
    if taken.len() < w {
        fallback.push(Fallback::TooFewCandidates {
            available: pool.cands.len(),
            requested: w,
        });
    }
    Ok(Selection {
        ids: taken.iter().map(|&i| pool.cands[i].0.product.id.clone()).collect(),
        fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::test_product;
    use proptest::prelude::*;

    fn prod(id: &str, price: f64, props: &[(&str, &str)]) -> Product {
        let mut p = test_product(id, price);
        for (k, v) in props {
            p.properties.insert(k.to_string(), v.to_string());
        }
        p
    }

    fn binning(assign: &[(&str, usize)]) -> PriceBinning {
        PriceBinning {
            center: 0.0,
            width: 1.0,
            assignment: assign.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    fn scored<'a>(ps: &'a [Product]) -> Vec<ScoredCandidate<'a>> {
        ps.iter().map(|p| ScoredCandidate { product: p, score: 0.9 }).collect()
    }

    fn unit_weights(names: &[&str]) -> BTreeMap<String, f64> {
        names.iter().map(|n| (n.to_string(), 1.0)).collect()
    }

    #[test]
    fn hamming_hand_values() {
        let a = prod("a", 1.0, &[("color", "red"), ("size", "m")]);
        let b = prod("b", 1.0, &[("color", "blue"), ("size", "m")]);
        assert_eq!(weighted_hamming(&a, &a, &unit_weights(&["color", "size"])), 0.0);
        assert_eq!(weighted_hamming(&a, &b, &unit_weights(&["color", "size"])), 1.0);
        let mut w = BTreeMap::new();
        w.insert("color".to_string(), (-(2f64.ln())).exp());
        assert!((weighted_hamming(&a, &b, &w) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn entropy_weights_from_distribution() {
        let ps = [prod("a", 1.0, &[("c", "x"), ("s", "1")]), prod("b", 1.0, &[("c", "y"), ("s", "1")])];
        let refs: Vec<&Product> = ps.iter().collect();
        let w = entropy_weights(&refs);
        assert!((w["c"] - 0.5).abs() < 1e-12);
        assert!((w["s"] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn target_bin_order() {
        assert_eq!(target_bins(3, 3), [3, 2, 4]);
        assert_eq!(target_bins(1, 3), [1, 1, 2]);
        assert_eq!(target_bins(0, 3), [1, 1, 2]);
        assert_eq!(target_bins(6, 3), [5, 4, 5]);
        assert_eq!(target_bins(3, 5), [3, 2, 4, 1, 5]);
    }

    #[test]
    fn forced_selection() {
        let q = prod("q", 1.0, &[]);
        let ps = [prod("a", 1.0, &[]), prod("b", 1.0, &[]), prod("c", 1.0, &[])];
        let b = binning(&[("q", 3), ("a", 2), ("b", 3), ("c", 4)]);
        for mode in [
            SelectionMode::default(),
            SelectionMode::Greedy { seeding: Seeding::TopScore },
            SelectionMode::Sampled { seed: 3 },
        ] {
            let s = select_display(&q, &scored(&ps), &b, &BTreeMap::new(), 3, mode).unwrap();
            assert_eq!(s.ids, ["b", "a", "c"]);
            assert!(s.fallback.is_empty());
        }
    }

    #[test]
    fn distinct_profile_preferred() {
        let q = prod("q", 1.0, &[("c", "x")]);
        let ps = [
            prod("first", 1.0, &[("c", "x")]),
            prod("dup", 1.0, &[("c", "x")]),
            prod("other", 1.0, &[("c", "y")]),
        ];
        let b = binning(&[("q", 3), ("first", 3), ("dup", 2), ("other", 2)]);
        let mut cands = scored(&ps);
        cands[1].score = 0.99;
        // Width 2: the bin-3 pick is forced; in bin 2 the duplicate profile
        // loses despite its higher score.
        for seeding in [Seeding::TopScore, Seeding::MultiStart] {
            let s = select_display(&q, &cands, &b, &unit_weights(&["c"]), 2, SelectionMode::Greedy { seeding })
                .unwrap();
            assert_eq!(s.ids, ["first", "other"], "{seeding:?}");
        }
    }

    #[test]
    fn score_breaks_ties() {
        let q = prod("q", 1.0, &[]);
        let ps = [prod("lo", 1.0, &[]), prod("hi", 1.0, &[])];
        let b = binning(&[("q", 3), ("lo", 3), ("hi", 3)]);
        let mut cands = scored(&ps);
        cands[1].score = 0.95;
        let s = select_display(&q, &cands, &b, &BTreeMap::new(), 1, SelectionMode::default()).unwrap();
        assert_eq!(s.ids, ["hi"]);
    }

    #[test]
    fn neighbor_fallback_and_too_few() {
        let q = prod("q", 1.0, &[]);
        let ps = [prod("a", 1.0, &[]), prod("b", 1.0, &[]), prod("out", 1.0, &[])];
        let b = binning(&[("q", 3), ("a", 3), ("b", 5), ("out", 0)]);
        let s = select_display(&q, &scored(&ps), &b, &BTreeMap::new(), 3, SelectionMode::default()).unwrap();
        assert_eq!(s.ids, ["a", "b"]);
        assert!(s.fallback.contains(&Fallback::NeighborBin { target: 2, used: 5 }));
        assert!(s.fallback.contains(&Fallback::TooFewCandidates { available: 2, requested: 3 }));
    }

    #[test]
    fn query_and_duplicates_skipped() {
        let q = prod("q", 1.0, &[]);
        let ps = [prod("q", 1.0, &[]), prod("a", 1.0, &[]), prod("a", 1.0, &[])];
        let b = binning(&[("q", 3), ("a", 3)]);
        let s = select_display(&q, &scored(&ps), &b, &BTreeMap::new(), 3, SelectionMode::default()).unwrap();
        assert_eq!(s.ids, ["a"]);
        assert!(select_display(&q, &[], &b, &BTreeMap::new(), 3, SelectionMode::default()).is_err());
    }

    fn profile_strategy() -> impl Strategy<Value = Vec<(u8, u8, u8)>> {
        prop::collection::vec((0u8..3, 0u8..3, 0u8..3), 0..4)
    }

    fn build(profiles: &[(u8, u8, u8)]) -> Vec<Product> {
        profiles
            .iter()
            .enumerate()
            .map(|(i, (a, b, c))| {
                let mut p = prod(&format!("p{i}"), 1.0, &[("a", &a.to_string()), ("b", &b.to_string())]);
                if *c > 0 {
                    p.properties.insert("c".into(), c.to_string());
                }
                p
            })
            .collect()
    }

    proptest! {
        #[test]
        fn hamming_is_pseudometric(ps in profile_strategy(), w in (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0)) {
            let prods = build(&ps);
            let weights: BTreeMap<String, f64> = [("a", w.0), ("b", w.1), ("c", w.2)]
                .iter().map(|(k, v)| (k.to_string(), *v)).collect();
            for x in &prods {
                prop_assert_eq!(weighted_hamming(x, x, &weights), 0.0);
                for y in &prods {
                    let d = weighted_hamming(x, y, &weights);
                    prop_assert!(d >= 0.0);
                    prop_assert_eq!(d, weighted_hamming(y, x, &weights));
                    for z in &prods {
                        prop_assert!(weighted_hamming(x, z, &weights) <= d + weighted_hamming(y, z, &weights) + 1e-12);
                    }
                }
            }
        }

        #[test]
        fn selection_structure(
            bins in prop::collection::vec(0usize..7, 1..15),
            qbin in 0usize..7,
            w in 1usize..5,
            sampled in any::<bool>(),
        ) {
            let profiles: Vec<(u8, u8, u8)> = (0..bins.len()).map(|i| ((i % 3) as u8, (i % 2) as u8, 0)).collect();
            let ps = build(&profiles);
            let q = prod("q", 1.0, &[]);
            let mut assign: Vec<(String, usize)> = ps.iter().zip(&bins).map(|(p, b)| (p.id.clone(), *b)).collect();
            assign.push(("q".into(), qbin));
            let binning = PriceBinning { center: 0.0, width: 1.0, assignment: assign.into_iter().collect() };
            let refs: Vec<&Product> = ps.iter().collect();
            let weights = entropy_weights(&refs);
            let mode = if sampled { SelectionMode::Sampled { seed: 5 } } else { SelectionMode::default() };
            let s = select_display(&q, &scored(&ps), &binning, &weights, w, mode).unwrap();
            let allowed = bins.iter().filter(|b| PriceBinning::is_allowed(**b)).count();
            prop_assert_eq!(s.ids.len(), w.min(allowed));
            let distinct: BTreeSet<_> = s.ids.iter().collect();
            prop_assert_eq!(distinct.len(), s.ids.len());
            prop_assert!(!s.ids.contains(&"q".to_string()));
            for id in &s.ids {
                prop_assert!(PriceBinning::is_allowed(binning.bin_of(id).unwrap()));
            }
            if s.ids.len() < w {
                let has_too_few = s.fallback.iter().any(|f| matches!(f, Fallback::TooFewCandidates { .. }));
                prop_assert!(has_too_few);
            }
        }
    }
}

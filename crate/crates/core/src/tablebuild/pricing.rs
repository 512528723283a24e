//! Seven equal-width log-price bins centered on the mean log price.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::Product;
use crate::error::{Error, Result};

pub const NUM_BINS: usize = 7;
pub const CENTER_BIN: usize = 3;
/// Bins eligible for display; 0 and 6 hold price outliers and are discarded.
pub const ALLOWED_BINS: std::ops::RangeInclusive<usize> = 1..=5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceBinning {
    /// Mean log price.
    pub center: f64,
    /// Population standard deviation of log price; also the bin width.
    pub width: f64,
    pub assignment: BTreeMap<String, usize>,
}

impl PriceBinning {
    pub fn bin_of(&self, id: &str) -> Option<usize> {
        self.assignment.get(id).copied()
    }

    pub fn bin_for_log_price(&self, log_price: f64) -> usize {
        if self.width <= 0.0 {
            return CENTER_BIN;
        }
        let raw = ((log_price - self.center) / self.width + 3.5).floor();
        raw.clamp(0.0, (NUM_BINS - 1) as f64) as usize
    }

    /// Half-open log-price interval of `bin`; the outer bins are unbounded
    /// on their outer side.
    pub fn interval(&self, bin: usize) -> (f64, f64) {
        let lo = self.center + (bin as f64 - 3.5) * self.width;
        let hi = lo + self.width;
        match bin {
            0 => (f64::NEG_INFINITY, hi),
            b if b == NUM_BINS - 1 => (lo, f64::INFINITY),
            _ => (lo, hi),
        }
    }

    pub fn is_allowed(bin: usize) -> bool {
        ALLOWED_BINS.contains(&bin)
    }
}

pub fn bin_by_price(query: &Product, candidates: &[&Product]) -> Result<PriceBinning> {
    let all: Vec<&Product> = std::iter::once(query).chain(candidates.iter().copied()).collect();
    if let Some(bad) = all.iter().find(|p| !(p.price > 0.0 && p.price.is_finite())) {
        return Err(Error::NonpositivePrice(bad.id.clone()));
    }
    let logs: Vec<f64> = all.iter().map(|p| p.price.ln()).collect();
    let n = logs.len() as f64;
    let center = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|l| (l - center).powi(2)).sum::<f64>() / n;
    let mut binning = PriceBinning {
        center,
        width: var.sqrt(),
        assignment: BTreeMap::new(),
    };
    for (p, l) in all.iter().zip(&logs) {
        let bin = binning.bin_for_log_price(*l);
        binning.assignment.insert(p.id.clone(), bin);
    }
    Ok(binning)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::test_product;
    use proptest::prelude::*;

    #[test]
    fn equal_prices_share_center_bin() {
        let q = test_product("q", 20.0);
        let cs: Vec<_> = (0..5).map(|i| test_product(&format!("c{i}"), 20.0)).collect();
        let refs: Vec<&Product> = cs.iter().collect();
        let b = bin_by_price(&q, &refs).unwrap();
        assert_eq!(b.width, 0.0);
        assert!(b.assignment.values().all(|&v| v == CENTER_BIN));
    }

    #[test]
    fn mean_price_is_center_bin() {
        let q = test_product("q", 10.0);
        let cs = [test_product("a", 1.0), test_product("b", 100.0)];
        let refs: Vec<&Product> = cs.iter().collect();
        let b = bin_by_price(&q, &refs).unwrap();
        assert_eq!(b.bin_of("q"), Some(3));
    }

    #[test]
    fn geometric_ladder_matches_hand_intervals() {
        // Prices 2^0 .. 2^13: log prices k·ln2, mean 6.5·ln2, population SD
        // ln2·sqrt((14²−1)/12). In units of ln2 the bin index is
        // floor((k − 6.5)/sd + 3.5) with sd = sqrt(195/12) ≈ 4.0311.
        let q = test_product("p00", 1.0);
        let cs: Vec<_> = (1..14).map(|k| test_product(&format!("p{k:02}"), 2f64.powi(k))).collect();
        let refs: Vec<&Product> = cs.iter().collect();
        let b = bin_by_price(&q, &refs).unwrap();
        let ln2 = 2f64.ln();
        assert!((b.center - 6.5 * ln2).abs() < 1e-12);
        assert!((b.width - ln2 * (195.0f64 / 12.0).sqrt()).abs() < 1e-12);
        // k:     0 1 2 3 4 5 6 7 8 9 10 11 12 13
        // (k−6.5)/4.0311+3.5 floors to:
        let expected = [1, 2, 2, 2, 2, 3, 3, 3, 3, 4, 4, 4, 4, 5];
        for (k, e) in expected.iter().enumerate() {
            assert_eq!(b.bin_of(&format!("p{k:02}")), Some(*e), "k = {k}");
        }
    }

    #[test]
    fn outliers_land_in_discard_bins() {
        let q = test_product("q", 10.0);
        let mut cs: Vec<_> = (0..20).map(|i| test_product(&format!("c{i}"), 10.0)).collect();
        cs.push(test_product("cheap", 0.001));
        cs.push(test_product("dear", 1e6));
        let refs: Vec<&Product> = cs.iter().collect();
        let b = bin_by_price(&q, &refs).unwrap();
        assert_eq!(b.bin_of("cheap"), Some(0));
        assert_eq!(b.bin_of("dear"), Some(6));
    }

    #[test]
    fn nonpositive_price_rejected() {
        let q = test_product("q", 10.0);
        let c = [test_product("z", 0.0)];
        let refs: Vec<&Product> = c.iter().collect();
        assert!(matches!(bin_by_price(&q, &refs), Err(Error::NonpositivePrice(id)) if id == "z"));
    }

    proptest! {
        #[test]
        fn assignment_consistent_with_intervals(prices in prop::collection::vec(0.01f64..1e4, 1..30)) {
            let q = test_product("q", prices[0]);
            let cs: Vec<_> = prices.iter().enumerate().map(|(i, p)| test_product(&format!("c{i}"), *p)).collect();
            let refs: Vec<&Product> = cs.iter().collect();
            let b = bin_by_price(&q, &refs).unwrap();
            for c in &cs {
                let bin = b.bin_of(&c.id).unwrap();
                prop_assert!(bin < NUM_BINS);
                if b.width > 0.0 {
                    let (lo, hi) = b.interval(bin);
                    let l = c.price.ln();
                    prop_assert!(l >= lo - 1e-9 && l <= hi + 1e-9);
                }
            }
        }

        #[test]
        fn bins_monotone_in_price(prices in prop::collection::vec(0.01f64..1e4, 2..30)) {
            let q = test_product("q", 1.0);
            let cs: Vec<_> = prices.iter().enumerate().map(|(i, p)| test_product(&format!("c{i}"), *p)).collect();
            let refs: Vec<&Product> = cs.iter().collect();
            let b = bin_by_price(&q, &refs).unwrap();
            for x in &cs {
                for y in &cs {
                    if x.price < y.price {
                        prop_assert!(b.bin_of(&x.id) <= b.bin_of(&y.id));
                    }
                }
            }
        }
    }
}

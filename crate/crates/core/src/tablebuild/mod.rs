//! Comparison-table assembly: property ranking and display selection.

mod display;
mod pricing;
mod properties;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use display::{
    entropy_weights, select_display, target_bins, total_diversity, weighted_hamming, ComparisonTable, Fallback,
    ScoredCandidate, Seeding, Selection, SelectionMode, DEFAULT_DISPLAY_WIDTH,
};
pub use pricing::{bin_by_price, PriceBinning, ALLOWED_BINS, CENTER_BIN, NUM_BINS};
pub use properties::{
    pdp_frequency, property_entropy, property_vocabulary, query_frequency, rank_properties, ComponentWeights,
    PropertyScore, PropertyVocabulary,
};

use crate::catalog::Product;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TableConfig {
    pub weights: ComponentWeights,
    pub display_width: usize,
    pub max_properties: usize,
    pub selection: SelectionMode,
}

impl Default for TableConfig {
    fn default() -> Self {
        Self {
            weights: ComponentWeights::default(),
            display_width: DEFAULT_DISPLAY_WIDTH,
            max_properties: 6,
            selection: SelectionMode::default(),
        }
    }
}

/// Builds the table for `query` from its classifier-accepted substitutes.
/// Only properties carried by the query or a substitute are ranked. With no
/// substitutes the table is empty and flagged.
pub fn build_table(
    query: &Product,
    substitutes: &[ScoredCandidate],
    query_freq: &BTreeMap<String, f64>,
    pdp_freq: &BTreeMap<String, f64>,
    config: &TableConfig,
) -> Result<ComparisonTable> {
    let subs: Vec<&Product> = substitutes.iter().map(|c| c.product).collect();
    let present: BTreeSet<&String> = std::iter::once(query)
        .chain(subs.iter().copied())
        .flat_map(|p| p.properties.keys())
        .collect();
    let restrict = |m: &BTreeMap<String, f64>| -> BTreeMap<String, f64> {
        present.iter().map(|k| ((*k).clone(), m.get(*k).copied().unwrap_or(0.0))).collect()
    };
    let entropy: BTreeMap<String, f64> = present
        .iter()
        .map(|k| ((*k).clone(), property_entropy(&subs, k)))
        .collect();

    let selection = if substitutes.is_empty() {
        Selection {
            ids: Vec::new(),
            fallback: vec![Fallback::TooFewCandidates {
                available: 0,
                requested: config.display_width,
            }],
        }
    } else {
        let binning = bin_by_price(query, &subs)?;
        let weights = entropy_weights(&subs);
        select_display(query, substitutes, &binning, &weights, config.display_width, config.selection)?
    };
    let ranked = if present.is_empty() {
        Vec::new()
    } else {
        rank_properties(&restrict(query_freq), &restrict(pdp_freq), &entropy, config.weights)?
    };
    let shown: Vec<&PropertyScore> = ranked.iter().take(config.max_properties).collect();
    Ok(ComparisonTable {
        query_id: query.id.clone(),
        substitutes: selection.ids,
        properties: shown.iter().map(|s| s.property.clone()).collect(),
        property_scores: shown.iter().map(|s| (s.property.clone(), s.total)).collect(),
        fallback: selection.fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::test_product;

    #[test]
    fn no_substitutes_is_flagged() {
        let q = test_product("q", 1.0);
        let t = build_table(&q, &[], &BTreeMap::new(), &BTreeMap::new(), &TableConfig::default()).unwrap();
        assert!(t.substitutes.is_empty());
        assert_eq!(t.fallback, [Fallback::TooFewCandidates { available: 0, requested: 3 }]);
    }

    #[test]
    fn builds_table_with_ranked_properties() {
        let mk = |id: &str, price: f64, color: &str, size: &str| {
            let mut p = test_product(id, price);
            p.properties.insert("color".into(), color.into());
            p.properties.insert("size".into(), size.into());
            p
        };
        let q = mk("q", 10.0, "red", "m");
        let subs = [
            mk("a", 9.0, "red", "m"),
            mk("b", 10.0, "blue", "m"),
            mk("c", 11.0, "green", "m"),
            mk("d", 10.5, "black", "m"),
        ];
        let cands: Vec<ScoredCandidate> = subs.iter().map(|p| ScoredCandidate { product: p, score: 0.9 }).collect();
        let qf: BTreeMap<String, f64> = [("size".to_string(), 1.0), ("brand".to_string(), 1.0)].into();
        let config = TableConfig {
            weights: ComponentWeights::new(0.0, 0.0, 1.0).unwrap(),
            ..Default::default()
        };
        let t = build_table(&q, &cands, &qf, &BTreeMap::new(), &config).unwrap();
        assert_eq!(t.properties, ["color", "size"]);
        assert_eq!(t.substitutes.len(), 3);
        assert!(!t.substitutes.contains(&"q".to_string()));
        let json = serde_json::to_value(&t).unwrap();
        for key in ["query_id", "substitutes", "properties", "property_scores"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }
}

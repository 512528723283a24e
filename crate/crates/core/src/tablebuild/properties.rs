//! Property relevance: query frequency, description frequency and value
//! entropy across the substitute list.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::{Product, SearchLogEntry};
use crate::error::{Error, Result};
use crate::text::{contains_phrase, tokenize};

/// Property name → every value seen in the catalog.
pub type PropertyVocabulary = BTreeMap<String, BTreeSet<String>>;

pub fn property_vocabulary<'a>(products: impl IntoIterator<Item = &'a Product>) -> PropertyVocabulary {
    let mut vocab = PropertyVocabulary::new();
    for p in products {
        for (k, v) in &p.properties {
            vocab.entry(k.clone()).or_default().insert(v.clone());
        }
    }
    vocab
}

struct Matcher {
    property: String,
    phrases: Vec<Vec<String>>,
}

fn matchers(vocab: &PropertyVocabulary) -> Vec<Matcher> {
    vocab
        .iter()
        .map(|(name, values)| Matcher {
            property: name.clone(),
            phrases: std::iter::once(name)
                .chain(values)
                .map(|s| tokenize(s))
                .filter(|t| !t.is_empty())
                .collect(),
        })
        .collect()
}

/// Per property, the number of texts mentioning its name or any of its
/// values, divided by the largest such count.
fn normalized_mentions<'a>(
    texts: impl IntoIterator<Item = &'a str>,
    vocab: &PropertyVocabulary,
) -> BTreeMap<String, f64> {
    let ms = matchers(vocab);
    let mut counts = vec![0usize; ms.len()];
    for text in texts {
        let tokens = tokenize(text);
        for (m, c) in ms.iter().zip(counts.iter_mut()) {
            if m.phrases.iter().any(|p| contains_phrase(&tokens, p)) {
                *c += 1;
            }
        }
    }
    let max = counts.iter().copied().max().unwrap_or(0);
    ms.into_iter()
        .zip(counts)
        .map(|(m, c)| {
            let score = if max == 0 { 0.0 } else { c as f64 / max as f64 };
            (m.property, score)
        })
        .collect()
}

pub fn query_frequency(logs: &[SearchLogEntry], vocab: &PropertyVocabulary) -> BTreeMap<String, f64> {
    normalized_mentions(logs.iter().map(|l| l.query.as_str()), vocab)
}

pub fn pdp_frequency(catalog: &[Product], vocab: &PropertyVocabulary) -> BTreeMap<String, f64> {
    normalized_mentions(catalog.iter().map(|p| p.description.as_str()), vocab)
}

/// Shannon entropy (nats) of the property's values over `products`;
/// products lacking the property count as one shared "absent" value.
pub fn property_entropy(products: &[&Product], property: &str) -> f64 {
    if products.is_empty() {
        return 0.0;
    }
    let mut counts: BTreeMap<Option<&str>, usize> = BTreeMap::new();
    for p in products {
        *counts.entry(p.properties.get(property).map(String::as_str)).or_default() += 1;
    }
    let n = products.len() as f64;
    let h: f64 = counts
        .values()
        .map(|&c| {
            let q = c as f64 / n;
            -q * q.ln()
        })
        .sum();
    h.max(0.0)
}

/// Weights of the three relevance components, in the order
/// query frequency, description frequency, entropy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentWeights {
    pub query: f64,
    pub pdp: f64,
    pub entropy: f64,
}

impl Default for ComponentWeights {
    fn default() -> Self {
        Self {
            query: 1.0 / 3.0,
            pdp: 1.0 / 3.0,
            entropy: 1.0 / 3.0,
        }
    }
}

impl ComponentWeights {
    pub fn new(query: f64, pdp: f64, entropy: f64) -> Result<Self> {
        let w = Self { query, pdp, entropy };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.query, self.pdp, self.entropy];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || all.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "weights must be nonnegative with a positive sum, got {all:?}"
            )));
        }
        Ok(())
    }
}

impl FromStr for ComponentWeights {
    type Err = Error;

    /// Parses `w1,w2,w3`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidArgument(format!("weight {p:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        match parts[..] {
            [a, b, c] => Self::new(a, b, c),
            _ => Err(Error::InvalidArgument(format!("expected three weights, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyScore {
    pub property: String,
    pub query_freq: f64,
    pub pdp_freq: f64,
    /// Raw entropy in nats.
    pub entropy: f64,
    pub normalized_entropy: f64,
    pub total: f64,
}

/// Ranks every property appearing in any component map by the weighted sum,
/// highest first, ties alphabetical. Entropy is divided by the largest
/// entropy in the set before weighting.
pub fn rank_properties(
    query_freq: &BTreeMap<String, f64>,
    pdp_freq: &BTreeMap<String, f64>,
    entropy: &BTreeMap<String, f64>,
    weights: ComponentWeights,
) -> Result<Vec<PropertyScore>> {
    weights.validate()?;
    let names: BTreeSet<&String> = query_freq.keys().chain(pdp_freq.keys()).chain(entropy.keys()).collect();
    if names.is_empty() {
        return Err(Error::InvalidArgument("no properties to rank".into()));
    }
    let max_h = entropy.values().copied().fold(0.0, f64::max);
    let mut scores: Vec<PropertyScore> = names
        .into_iter()
        .map(|name| {
            let q = query_freq.get(name).copied().unwrap_or(0.0);
            let d = pdp_freq.get(name).copied().unwrap_or(0.0);
            let h = entropy.get(name).copied().unwrap_or(0.0);
            let hn = if max_h > 0.0 { h / max_h } else { 0.0 };
            PropertyScore {
                property: name.clone(),
                query_freq: q,
                pdp_freq: d,
                entropy: h,
                normalized_entropy: hn,
                total: weights.query * q + weights.pdp * d + weights.entropy * hn,
            }
        })
        .collect();
    scores.sort_by(|a, b| b.total.total_cmp(&a.total).then_with(|| a.property.cmp(&b.property)));
    Ok(scores)
}

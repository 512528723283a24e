use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embeddings::{EmbeddingKind, EmbeddingTable};
use crate::error::{Error, Result};

/// Product representations the classifier can consume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Categories,
    Description,
    Name,
    Prod2vec,
}

/// The feature set that performed best; the default configuration.
pub const BEST_FEATURES: [FeatureKind; 4] = [
    FeatureKind::Categories,
    FeatureKind::Description,
    FeatureKind::Name,
    FeatureKind::Prod2vec,
];

impl FeatureKind {
    pub fn embedding_kind(self) -> EmbeddingKind {
        match self {
            FeatureKind::Categories => EmbeddingKind::CategoriesText,
            FeatureKind::Description => EmbeddingKind::DescriptionText,
            FeatureKind::Name => EmbeddingKind::NameText,
            FeatureKind::Prod2vec => EmbeddingKind::Prod2vec,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Categories => "categories",
            FeatureKind::Description => "description",
            FeatureKind::Name => "name",
            FeatureKind::Prod2vec => "prod2vec",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "categories" => Ok(FeatureKind::Categories),
            "description" => Ok(FeatureKind::Description),
            "name" => Ok(FeatureKind::Name),
            "prod2vec" => Ok(FeatureKind::Prod2vec),
            other => Err(Error::InvalidArgument(format!("unknown feature kind {other:?}"))),
        }
    }
}

/// One vector per configured feature kind, in configuration order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBundle {
    pub parts: Vec<Vec<f64>>,
}

/// Bundles for every product that has all configured features.
#[derive(Debug, Clone)]
pub struct FeatureStore {
    pub kinds: Vec<FeatureKind>,
    pub dims: Vec<usize>,
    pub bundles: BTreeMap<String, FeatureBundle>,
}

impl FeatureStore {
    /// Assembles bundles from embedding tables. Products missing any
    /// configured kind are left out.
    pub fn from_tables(kinds: &[FeatureKind], tables: &[&EmbeddingTable]) -> Result<Self> {
        let mut selected = Vec::with_capacity(kinds.len());
        for &k in kinds {
            let t = tables
                .iter()
                .find(|t| t.kind == k.embedding_kind())
                .ok_or_else(|| Error::InvalidArgument(format!("no table for feature {k}")))?;
            selected.push(*t);
        }
        let dims = selected.iter().map(|t| t.dim).collect();
        let mut bundles = BTreeMap::new();
        if let Some(first) = selected.first() {
            'ids: for id in first.vectors.keys() {
                let mut parts = Vec::with_capacity(selected.len());
                for t in &selected {
                    match t.get(id) {
                        Some(v) => parts.push(v.to_vec()),
                        None => continue 'ids,
                    }
                }
                bundles.insert(id.clone(), FeatureBundle { parts });
            }
        }
        Ok(Self {
            kinds: kinds.to_vec(),
            dims,
            bundles,
        })
    }

    pub fn get(&self, id: &str) -> Result<&FeatureBundle> {
        self.bundles.get(id).ok_or_else(|| Error::MissingFeature {
            id: id.to_string(),
            kind: self
                .kinds
                .iter()
                .map(|k| k.as_str())
                .collect::<Vec<_>>()
                .join(","),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_feature_names() {
        let kinds: Vec<FeatureKind> = "categories,description,name,prod2vec"
            .split(',')
            .map(|s| s.parse().unwrap())
            .collect();
        assert_eq!(kinds, BEST_FEATURES.to_vec());
        assert!("image".parse::<FeatureKind>().is_err());
    }

    #[test]
    fn store_skips_incomplete_products() {
        let mut p = EmbeddingTable::new(EmbeddingKind::Prod2vec, 2);
        p.insert("a", vec![1.0, 2.0]).unwrap();
        p.insert("b", vec![3.0, 4.0]).unwrap();
        let mut n = EmbeddingTable::new(EmbeddingKind::NameText, 1);
        n.insert("a", vec![5.0]).unwrap();
        let store =
            FeatureStore::from_tables(&[FeatureKind::Name, FeatureKind::Prod2vec], &[&p, &n]).unwrap();
        assert_eq!(store.dims, vec![1, 2]);
        assert_eq!(store.get("a").unwrap().parts, vec![vec![5.0], vec![1.0, 2.0]]);
        assert!(store.get("b").is_err());
        assert!(FeatureStore::from_tables(&[FeatureKind::Categories], &[&p]).is_err());
    }
}

//! Catalog, session and search-log records, their ingestion, and the
//! product-level train/validation split.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_jsonl, sha256_hex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Product {
    pub id: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub categories: Vec<String>,
    pub price: f64,
    #[serde(default)]
    pub properties: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
}

impl Product {
    /// Key used to look the product up in the image-embedding table.
    pub fn image_key(&self) -> &str {
        self.image_ref.as_deref().unwrap_or(&self.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionKind {
    Browse,
    Purchase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub product_id: String,
    pub ts: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub kind: SessionKind,
    pub events: Vec<Event>,
}

impl Session {
    pub fn product_ids(&self) -> impl Iterator<Item = &str> {
        self.events.iter().map(|e| e.product_id.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchLogEntry {
    pub query: String,
    pub ts: i64,
}

/// Counts of what session ingestion threw away.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionLoadReport {
    pub unknown_events: usize,
    pub empty_sessions: usize,
}

pub fn validate_catalog(products: &[Product]) -> Result<()> {
    let mut seen = HashSet::with_capacity(products.len());
    for p in products {
        if !(p.price > 0.0) || !p.price.is_finite() {
            return Err(Error::NonpositivePrice(p.id.clone()));
        }
        if !seen.insert(p.id.as_str()) {
            return Err(Error::DuplicateId(p.id.clone()));
        }
    }
    Ok(())
}

pub fn load_catalog(path: &Path) -> Result<Vec<Product>> {
    let products: Vec<Product> = read_jsonl(path)?;
    validate_catalog(&products)?;
    Ok(products)
}

/// Drops events whose product is not in the catalog, then sessions left empty.
pub fn filter_sessions(
    sessions: Vec<Session>,
    catalog: &[Product],
) -> (Vec<Session>, SessionLoadReport) {
    let known: HashSet<&str> = catalog.iter().map(|p| p.id.as_str()).collect();
    let mut report = SessionLoadReport::default();
    let mut kept = Vec::with_capacity(sessions.len());
    for mut s in sessions {
        let before = s.events.len();
        s.events.retain(|e| known.contains(e.product_id.as_str()));
        report.unknown_events += before - s.events.len();
        if s.events.is_empty() {
            report.empty_sessions += 1;
        } else {
            kept.push(s);
        }
    }
    (kept, report)
}

pub fn load_sessions(path: &Path, catalog: &[Product]) -> Result<(Vec<Session>, SessionLoadReport)> {
    let raw: Vec<Session> = read_jsonl(path)?;
    for (idx, s) in raw.iter().enumerate() {
        if s.events.windows(2).any(|w| w[1].ts < w[0].ts) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message: format!("session {}: timestamps decrease", s.session_id),
            });
        }
    }
    let (sessions, report) = filter_sessions(raw, catalog);
    if report.unknown_events > 0 || report.empty_sessions > 0 {
        warn!(
            "{}: dropped {} events with unknown products and {} empty sessions",
            path.display(),
            report.unknown_events,
            report.empty_sessions
        );
    }
    Ok((sessions, report))
}

pub fn load_search_logs(path: &Path) -> Result<Vec<SearchLogEntry>> {
    let entries: Vec<SearchLogEntry> = read_jsonl(path)?;
    let before = entries.len();
    let kept: Vec<_> = entries
        .into_iter()
        .filter(|e| !e.query.trim().is_empty())
        .collect();
    if kept.len() < before {
        warn!("{}: dropped {} blank queries", path.display(), before - kept.len());
    }
    Ok(kept)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductSplit {
    pub train_ids: BTreeSet<String>,
    pub validation_ids: BTreeSet<String>,
}

impl ProductSplit {
    pub fn is_validation(&self, id: &str) -> bool {
        self.validation_ids.contains(id)
    }

    pub fn is_train(&self, id: &str) -> bool {
        self.train_ids.contains(id)
    }
}

/// Splits products by their seeded hash order, so the split does not depend
/// on the order of records in the catalog file.
pub fn split_products(catalog: &[Product], train_fraction: f64, seed: u64) -> Result<ProductSplit> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut keyed: Vec<(String, &str)> = catalog
        .iter()
        .map(|p| (sha256_hex(format!("{seed}:{}", p.id).as_bytes()), p.id.as_str()))
        .collect();
    keyed.sort();
    let n = keyed.len();
    let mut n_train = (train_fraction * n as f64).round() as usize;
    if n >= 2 {
        n_train = n_train.clamp(1, n - 1);
    }
    let train_ids = keyed[..n_train].iter().map(|(_, id)| id.to_string()).collect();
    let validation_ids = keyed[n_train..].iter().map(|(_, id)| id.to_string()).collect();
    Ok(ProductSplit {
        train_ids,
        validation_ids,
    })
}

#[cfg(test)]
pub(crate) fn test_product(id: &str, price: f64) -> Product {
    Product {
        id: id.to_string(),
        name: String::new(),
        description: String::new(),
        categories: Vec::new(),
        price,
        properties: BTreeMap::new(),
        image_ref: None,
    }
}

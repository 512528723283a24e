//! Product embeddings: behavioral (prod2vec) and textual vectors trained with
//! CBOW + negative sampling, precomputed image vectors, and exact cosine kNN.

mod cbow;
mod knn;
mod text;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::Product;
use crate::error::{Error, Result};
use crate::io::{read_jsonl, write_jsonl};

pub use cbow::{train_prod2vec, train_prod2vec_with_history, CbowConfig, TrainedCbow};
pub use knn::{knn_candidates, Candidate, CandidateList, KnnIndex, DEFAULT_K};
pub use text::{
    pool_text_field, product_text_tables, train_text_embeddings, PooledText, TextTables,
    WordVectors,
};

pub const BEHAVIOR_DIM: usize = 48;
pub const IMAGE_DIM: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    Prod2vec,
    NameText,
    DescriptionText,
    CategoriesText,
    Image,
}

impl EmbeddingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingKind::Prod2vec => "prod2vec",
            EmbeddingKind::NameText => "name_text",
            EmbeddingKind::DescriptionText => "description_text",
            EmbeddingKind::CategoriesText => "categories_text",
            EmbeddingKind::Image => "image",
        }
    }
}

impl fmt::Display for EmbeddingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Fixed-dimension vectors keyed by product id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub kind: EmbeddingKind,
    pub dim: usize,
    pub vectors: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EmbeddingRecord {
    id: String,
    kind: EmbeddingKind,
    vector: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(kind: EmbeddingKind, dim: usize) -> Self {
        Self {
            kind,
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let id = id.into();
        check_vector(&id, &vector, self.dim)?;
        self.vectors.insert(id, vector);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let records: Vec<EmbeddingRecord> = self
            .vectors
            .iter()
            .map(|(id, v)| EmbeddingRecord {
                id: id.clone(),
                kind: self.kind,
                vector: v.clone(),
            })
            .collect();
        write_jsonl(path, &records)
    }

    /// Loads a table, checking every vector against `expected_dim`.
    /// Records of a different kind than `kind` are rejected.
    pub fn load(path: &Path, kind: EmbeddingKind, expected_dim: usize) -> Result<Self> {
        let records: Vec<EmbeddingRecord> = read_jsonl(path)?;
        let mut table = Self::new(kind, expected_dim);
        for (idx, r) in records.into_iter().enumerate() {
            if r.kind != kind {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    message: format!("expected kind {kind}, found {}", r.kind),
                });
            }
            table.insert(r.id, r.vector)?;
        }
        Ok(table)
    }
}

fn check_vector(id: &str, v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(Error::Dimension {
            id: id.to_string(),
            expected: dim,
            actual: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "product {id}: non-finite vector component"
        )));
    }
    Ok(())
}

pub fn load_image_embeddings(path: &Path, expected_dim: usize) -> Result<EmbeddingTable> {
    EmbeddingTable::load(path, EmbeddingKind::Image, expected_dim)
}

/// Catalog products whose image key has no vector in `images`.
pub fn missing_images(images: &EmbeddingTable, catalog: &[Product]) -> Vec<String> {
    catalog
        .iter()
        .filter(|p| images.get(p.image_key()).is_none())
        .map(|p| p.id.clone())
        .collect()
}

/// Re-keys an image table (keyed by image reference) by product id, skipping
/// products without a vector.
pub fn images_by_product(images: &EmbeddingTable, catalog: &[Product]) -> EmbeddingTable {
    let mut out = EmbeddingTable::new(images.kind, images.dim);
    for p in catalog {
        if let Some(v) = images.vectors.get(p.image_key()) {
            out.vectors.insert(p.id.clone(), v.clone());
        }
    }
    out
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn cosine_with_norms(a: &[f64], b: &[f64], na: f64, nb: f64) -> f64 {
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

/// Cosine similarity, clamped to [-1, 1]. Zero vectors have no direction.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "cosine of vectors with dims {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::UndefinedCosine);
    }
    Ok(cosine_with_norms(a, b, na, nb))
}

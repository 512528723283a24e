//! Exact cosine k-nearest-neighbour retrieval.

use serde::{Deserialize, Serialize};

use super::{cosine_with_norms, norm, EmbeddingTable};
use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub similarity: f64,
}

/// Nearest neighbours of `query_id`, most similar first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateList {
    pub query_id: String,
    pub candidates: Vec<Candidate>,
}

impl CandidateList {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.candidates.iter().map(|c| c.id.as_str())
    }
}

/// Similarities within this distance of each other count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Frozen table with precomputed norms. Zero vectors are never returned.
pub struct KnnIndex<'a> {
    table: &'a EmbeddingTable,
    norms: Vec<(&'a str, &'a [f64], f64)>,
}

impl<'a> KnnIndex<'a> {
    pub fn new(table: &'a EmbeddingTable) -> Self {
        let norms = table
            .vectors
            .iter()
            .map(|(id, v)| (id.as_str(), v.as_slice(), norm(v)))
            .collect();
        Self { table, norms }
    }

    pub fn query(&self, query_id: &str, k: usize) -> Result<CandidateList> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        let q = self
            .table
            .get(query_id)
            .ok_or_else(|| Error::UnknownId(query_id.to_string()))?;
        let qn = norm(q);
        if qn == 0.0 {
            return Err(Error::UndefinedCosine);
        }
        let mut scored: Vec<(f64, &str)> = self
            .norms
            .iter()
            .filter(|&&(id, _, n)| id != query_id && n != 0.0)
            .map(|&(id, v, n)| (cosine_with_norms(q, v, qn, n), id))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut start = 0;
        while start < scored.len() {
            let mut end = start + 1;
            while end < scored.len() && scored[end - 1].0 - scored[end].0 <= TIE_TOLERANCE {
                end += 1;
            }
            scored[start..end].sort_by(|a, b| a.1.cmp(b.1));
            start = end;
        }
        let candidates = scored
            .into_iter()
            .take(k)
            .map(|(similarity, id)| Candidate {
                id: id.to_string(),
                similarity,
            })
            .collect();
        Ok(CandidateList {
            query_id: query_id.to_string(),
            candidates,
        })
    }
}

/// Top-`k` products by cosine similarity to `query_id`, ties (within
/// [`TIE_TOLERANCE`]) broken by ascending id. Exhaustive search.
pub fn knn_candidates(query_id: &str, table: &EmbeddingTable, k: usize) -> Result<CandidateList> {
    KnnIndex::new(table).query(query_id, k)
}

//! Comparison-table engine.
//!
//! Given a shop catalog and behavioral session logs this crate builds
//! per-product comparison tables in five stages:
//!
//! 1. behavioral (prod2vec) and textual embeddings trained with CBOW and
//!    negative sampling, plus exact cosine kNN for candidate retrieval;
//! 2. unsupervised substitute pairs mined from co-views (positives) and
//!    co-purchases (negatives), optionally cleaned with image similarity and
//!    augmented by swapping members inside substitute clusters;
//! 3. a Siamese binary classifier over fused product representations;
//! 4. property ranking from search logs, product descriptions and value
//!    entropy;
//! 5. final display selection by log-price binning and greedy
//!    entropy-weighted Hamming diversity.
//!
//! [`humaneval`] collates pairwise human judgments (Bradley-Terry) and scores
//! agreement with rank-biased overlap, and [`pipeline`] wires everything into
//! a memoized DAG with a synthetic shop generator for desk-scale benchmarks.

pub mod catalog;
pub mod embeddings;
pub mod error;
pub mod humaneval;
pub mod io;
pub mod pairgen;
pub mod pipeline;
pub mod substmodel;
pub mod tablebuild;
pub mod text;

pub use error::{Error, Result};

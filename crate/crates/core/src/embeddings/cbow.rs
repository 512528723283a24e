//! Continuous bag-of-words with negative sampling.
//!
//! The hidden vector is the mean of the context input vectors; each target is
//! scored against its output vector plus `negatives_per_positive` noise words
//! drawn from the unigram distribution raised to `ns_exponent`. The context
//! update adds the accumulated error to every context vector, as in the
//! reference word2vec implementation.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EmbeddingKind, EmbeddingTable};
use crate::catalog::{Session, SessionKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CbowConfig {
    pub window: usize,
    pub iterations: usize,
    pub ns_exponent: f64,
    pub dim: usize,
    pub negatives_per_positive: usize,
    pub learning_rate: f64,
    pub min_count: u64,
    pub seed: u64,
}

impl CbowConfig {
    /// Behavioral embeddings: short window so co-viewed products dominate.
    pub fn prod2vec() -> Self {
        Self {
            window: 5,
            iterations: 30,
            ns_exponent: 0.75,
            dim: 48,
            negatives_per_positive: 5,
            learning_rate: 0.025,
            min_count: 1,
            seed: 0,
        }
    }

    pub fn text() -> Self {
        Self {
            window: 10,
            min_count: 2,
            ..Self::prod2vec()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.dim == 0 || self.iterations == 0 {
            return Err(Error::InvalidArgument(
                "cbow window, dim and iterations must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0) || self.negatives_per_positive == 0 {
            return Err(Error::InvalidArgument(
                "cbow learning rate and negatives must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Input vectors per vocabulary token plus the epoch-averaged
/// negative-sampling loss.
#[derive(Debug, Clone)]
pub struct TrainedCbow {
    pub vocab: Vec<String>,
    pub dim: usize,
    pub vectors: Vec<f64>,
    pub epoch_losses: Vec<f64>,
}

impl TrainedCbow {
    pub fn vector(&self, idx: usize) -> &[f64] {
        &self.vectors[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn into_map(self) -> BTreeMap<String, Vec<f64>> {
        let dim = self.dim;
        self.vocab
            .into_iter()
            .enumerate()
            .map(|(i, w)| (w, self.vectors[i * dim..(i + 1) * dim].to_vec()))
            .collect()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// -ln(sigmoid(x)), stable for large |x|.
fn softplus_neg(x: f64) -> f64 {
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

pub(crate) fn train_cbow(sentences: &[Vec<String>], config: &CbowConfig) -> Result<TrainedCbow> {
    config.validate()?;
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for s in sentences {
        for t in s {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    counts.retain(|_, c| *c >= config.min_count.max(1));
    let vocab: Vec<String> = counts.keys().map(|s| s.to_string()).collect();
    let index: BTreeMap<&str, usize> = counts.keys().enumerate().map(|(i, w)| (*w, i)).collect();

    let corpus: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| s.iter().filter_map(|t| index.get(t.as_str()).copied()).collect::<Vec<_>>())
        .filter(|s| s.len() >= 2)
        .collect();
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let dim = config.dim;
    let n = vocab.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut input: Vec<f64> = (0..n * dim)
        .map(|_| (rng.random::<f64>() - 0.5) / dim as f64)
        .collect();
    let mut output = vec![0.0; n * dim];
    let noise = WeightedIndex::new(
        counts
            .values()
            .map(|&c| (c as f64).powf(config.ns_exponent)),
    )
    .map_err(|e| Error::InvalidArgument(format!("noise distribution: {e}")))?;

    let total_words: usize = corpus.iter().map(Vec::len).sum();
    let total_steps = (total_words * config.iterations) as f64;
    let mut processed = 0usize;
    let mut hidden = vec![0.0; dim];
    let mut err = vec![0.0; dim];
    let mut context = Vec::with_capacity(2 * config.window);
    let mut epoch_losses = Vec::with_capacity(config.iterations);

    for _ in 0..config.iterations {
        let mut loss_sum = 0.0;
        let mut predictions = 0usize;
        for sentence in &corpus {
            for pos in 0..sentence.len() {
                let lr = config.learning_rate * (1.0 - processed as f64 / total_steps).max(1e-4);
                processed += 1;
                let lo = pos.saturating_sub(config.window);
                let hi = (pos + config.window + 1).min(sentence.len());
                context.clear();
                context.extend((lo..hi).filter(|&j| j != pos).map(|j| sentence[j]));
                if context.is_empty() {
                    continue;
                }
                hidden.iter_mut().for_each(|h| *h = 0.0);
                for &c in &context {
                    for (h, x) in hidden.iter_mut().zip(&input[c * dim..(c + 1) * dim]) {
                        *h += x;
                    }
                }
                let inv = 1.0 / context.len() as f64;
                hidden.iter_mut().for_each(|h| *h *= inv);
                err.iter_mut().for_each(|e| *e = 0.0);

                let target = sentence[pos];
                for d in 0..=config.negatives_per_positive {
                    let (word, label) = if d == 0 {
                        (target, 1.0)
                    } else {
                        let w = noise.sample(&mut rng);
                        if w == target {
                            continue;
                        }
                        (w, 0.0)
                    };
                    let out = &mut output[word * dim..(word + 1) * dim];
                    let score: f64 = hidden.iter().zip(out.iter()).map(|(h, o)| h * o).sum();
                    loss_sum += if label > 0.5 {
                        softplus_neg(score)
                    } else {
                        softplus_neg(-score)
                    };
                    let g = (label - sigmoid(score)) * lr;
                    for ((e, o), h) in err.iter_mut().zip(out.iter_mut()).zip(&hidden) {
                        *e += g * *o;
                        *o += g * h;
                    }
                }
                predictions += 1;
                for &c in &context {
                    for (x, e) in input[c * dim..(c + 1) * dim].iter_mut().zip(&err) {
                        *x += e;
                    }
                }
            }
        }
        epoch_losses.push(loss_sum / predictions.max(1) as f64);
    }

    Ok(TrainedCbow {
        vocab,
        dim,
        vectors: input,
        epoch_losses,
    })
}

/// Behavioral product vectors: browse sessions are sentences, products words.
pub fn train_prod2vec(sessions: &[Session], config: &CbowConfig) -> Result<EmbeddingTable> {
    train_prod2vec_with_history(sessions, config).map(|(t, _)| t)
}

pub fn train_prod2vec_with_history(
    sessions: &[Session],
    config: &CbowConfig,
) -> Result<(EmbeddingTable, Vec<f64>)> {
    let sentences: Vec<Vec<String>> = sessions
        .iter()
        .filter(|s| s.kind == SessionKind::Browse)
        .map(|s| s.product_ids().map(str::to_string).collect())
        .collect();
    let trained = train_cbow(&sentences, config)?;
    let losses = trained.epoch_losses.clone();
    let dim = trained.dim;
    Ok((
        EmbeddingTable {
            kind: EmbeddingKind::Prod2vec,
            dim,
            vectors: trained.into_map(),
        },
        losses,
    ))
}

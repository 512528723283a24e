//! Precision-recall evaluation of pair scorers.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::features::FeatureStore;
use super::network::SiameseModel;
use crate::embeddings::{cosine, EmbeddingTable};
use crate::error::{Error, Result};
use crate::pairgen::{Label, LabeledPair};

/// Recall levels reported for every configuration.
pub const RECALL_LEVELS: [f64; 3] = [0.7, 0.8, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// One point per distinct score, ordered by ascending threshold; a pair is
/// predicted positive when its score is at least the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub positives: usize,
    pub negatives: usize,
}

impl PrCurve {
    /// Interpolated precision: the best precision at any recall >= `recall`.
    pub fn precision_at_recall(&self, recall: f64) -> f64 {
        self.points
            .iter()
            .filter(|p| p.recall >= recall)
            .map(|p| p.precision)
            .fold(0.0, f64::max)
    }

    pub fn standard_levels(&self) -> [f64; 3] {
        RECALL_LEVELS.map(|r| self.precision_at_recall(r))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,precision,recall\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", p.threshold, p.precision, p.recall);
        }
        out
    }
}

pub fn pr_curve(scored: &[(f64, bool)]) -> Result<PrCurve> {
    let positives = scored.iter().filter(|(_, y)| *y).count();
    if positives == 0 {
        return Err(Error::NoPositives);
    }
    if scored.iter().any(|(s, _)| !s.is_finite()) {
        return Err(Error::InvalidArgument("non-finite score".into()));
    }
    let mut sorted = scored.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let threshold = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == threshold {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(PrPoint {
            threshold,
            precision: tp as f64 / (tp + fp) as f64,
            recall: tp as f64 / positives as f64,
        });
    }
    points.reverse();
    Ok(PrCurve {
        points,
        positives,
        negatives: scored.len() - positives,
    })
}

/// Scores golden pairs with the model, fusing each product once.
pub fn evaluate(model: &SiameseModel, golden: &[LabeledPair], store: &FeatureStore) -> Result<PrCurve> {
    let mut fused: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for p in golden {
        for id in [p.a.as_str(), p.b.as_str()] {
            if !fused.contains_key(id) {
                fused.insert(id, model.fuse(store.get(id)?)?.vector);
            }
        }
    }
    let scored: Vec<(f64, bool)> = golden
        .iter()
        .map(|p| {
            (
                model.score_fused(&fused[p.a.as_str()], &fused[p.b.as_str()]),
                p.label == Label::Positive,
            )
        })
        .collect();
    pr_curve(&scored)
}

/// Image cosine rescaled to [0, 1].
pub fn baseline_image_score(a: &str, b: &str, images: &EmbeddingTable) -> Result<f64> {
    let va = images.get(a).ok_or_else(|| Error::UnknownId(a.to_string()))?;
    let vb = images.get(b).ok_or_else(|| Error::UnknownId(b.to_string()))?;
    Ok((cosine(va, vb)? + 1.0) / 2.0)
}

pub fn evaluate_baseline(golden: &[LabeledPair], images: &EmbeddingTable) -> Result<PrCurve> {
    let scored = golden
        .iter()
        .map(|p| Ok((baseline_image_score(&p.a, &p.b, images)?, p.label == Label::Positive)))
        .collect::<Result<Vec<_>>>()?;
    pr_curve(&scored)
}

/// One row of the precision-at-recall report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    #[serde(rename = "Configuration")]
    pub configuration: String,
    #[serde(rename = "P@R=0.7")]
    pub p_at_r_07: f64,
    #[serde(rename = "P@R=0.8")]
    pub p_at_r_08: f64,
    #[serde(rename = "P@R=0.9")]
    pub p_at_r_09: f64,
}

impl MetricsRow {
    pub fn from_curve(configuration: impl Into<String>, curve: &PrCurve) -> Self {
        let [a, b, c] = curve.standard_levels();
        Self {
            configuration: configuration.into(),
            p_at_r_07: a,
            p_at_r_08: b,
            p_at_r_09: c,
        }
    }
}

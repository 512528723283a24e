//! Human evaluation of property rankings: control filtering, Bradley-Terry
//! aggregation and rank-biased overlap against the algorithm's order.

mod bradley_terry;
mod judgments;
mod rbo;

use serde::{Deserialize, Serialize};

pub use bradley_terry::{bt_fit, log_likelihood, rank_by_strength, BtOptions, BtResult};
pub use judgments::{filter_control, ControlReport, PairwiseJudgments, RawResponse};
pub use rbo::{
    calibrate_rbo_p, rbo, RandomPermutationRbo, DEFAULT_CALIBRATION_LENGTH, DEFAULT_CALIBRATION_TARGET,
    DEFAULT_CALIBRATION_TRIALS,
};

use crate::error::Result;

/// One row of the agreement report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementRow {
    pub product: String,
    pub algorithm_ranking: Vec<String>,
    pub human_ranking: Vec<String>,
    #[serde(rename = "RBO")]
    pub rbo: f64,
}

/// Fits human strengths from raw responses and scores their agreement with
/// the algorithm's property order.
pub fn agreement(
    product: &str,
    algorithm_ranking: &[String],
    responses: &[RawResponse],
    control_key: Option<&str>,
    options: BtOptions,
    p: f64,
) -> Result<AgreementRow> {
    let filtered = filter_control(responses, control_key);
    let fit = bt_fit(&filtered.judgments, options)?;
    Ok(AgreementRow {
        product: product.to_string(),
        algorithm_ranking: algorithm_ranking.to_vec(),
        rbo: rbo(algorithm_ranking, &fit.ranking, p)?,
        human_ranking: fit.ranking,
    })
}

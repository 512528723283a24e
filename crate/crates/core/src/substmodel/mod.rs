//! Siamese substitute classifier.
//!
//! Each product is a bundle of per-kind feature vectors. A shared tower
//! re-projects every vector (dense + ReLU), concatenates the results, fuses
//! them (dense + ReLU) and L2-normalizes. Two fused products are compared by
//! the element-wise absolute difference fed to a one-unit dense layer and a
//! sigmoid.

mod features;
mod gradcheck;
mod metrics;
mod network;
mod train;

pub use features::{FeatureBundle, FeatureKind, FeatureStore, BEST_FEATURES};
pub use gradcheck::{gradient_check, gradient_check_with, LabeledExample};
pub use metrics::{
    baseline_image_score, evaluate, evaluate_baseline, pr_curve, MetricsRow, PrCurve, PrPoint,
    RECALL_LEVELS,
};
pub use network::{Fused, LayerSpec, ModelShape, SiameseModel};
pub use train::{train, EpochRecord, TrainConfig, TrainingHistory};

//! End-to-end orchestration: configuration, the step DAG, synthetic shops
//! and golden evaluation pairs.

mod config;
mod dag;
mod golden;
mod simulate;
mod steps;

pub use config::{GridCell, PairConfig, PipelineConfig, ShopPaths};
pub use dag::{hash_tree, Dag, RunSummary, Step, StepContext, StepRecord, COMPLETE_MARKER, RUN_MANIFEST};
pub use golden::golden_pairs;
pub use simulate::{
    simulate_shop, PriceParams, Shop, ShopManifest, ShopSpec, CATALOG_FILE, IMAGES_FILE, MANIFEST_FILE,
    SEARCH_LOGS_FILE, SESSIONS_FILE,
};
pub use steps::*;

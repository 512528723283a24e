//! Pipeline configuration, loaded from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embeddings::{CbowConfig, DEFAULT_K, IMAGE_DIM};
use crate::error::{Error, Result};
use crate::pairgen::{
    DEFAULT_COPURCHASE_MIN, DEFAULT_COVIEW_MIN, DEFAULT_MAX_CLUSTER, DEFAULT_NEGATIVE_MAX_COSINE,
    DEFAULT_POSITIVE_MIN_COSINE, DEFAULT_SYNTHETIC_PER_PAIR,
};
use crate::substmodel::TrainConfig;
use crate::tablebuild::TableConfig;

/// Input files. Relative paths are resolved against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShopPaths {
    pub catalog: PathBuf,
    pub sessions: PathBuf,
    pub search_logs: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<PathBuf>,
    /// Ground-truth clusters; enables golden pairs and evaluation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
}

impl ShopPaths {
    /// Standard file names inside a shop directory.
    pub fn in_dir(dir: &Path) -> Self {
        use super::simulate::*;
        let images = dir.join(IMAGES_FILE);
        let manifest = dir.join(MANIFEST_FILE);
        Self {
            catalog: dir.join(CATALOG_FILE),
            sessions: dir.join(SESSIONS_FILE),
            search_logs: dir.join(SEARCH_LOGS_FILE),
            images: images.exists().then_some(images),
            manifest: manifest.exists().then_some(manifest),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PairConfig {
    /// Co-view count threshold N.
    pub coview_min: u64,
    /// Co-purchase count threshold M.
    pub copurchase_min: u64,
    pub view_adjacency: usize,
    /// Purchase pair window; `None` pairs every two items of a session.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub purchase_window: Option<usize>,
    /// Largest cluster Z used for synthetic swaps.
    pub max_cluster: usize,
    pub positive_min_cosine: f64,
    pub negative_max_cosine: f64,
    pub synthetic_per_pair: usize,
}

impl Default for PairConfig {
    fn default() -> Self {
        Self {
            coview_min: DEFAULT_COVIEW_MIN,
            copurchase_min: DEFAULT_COPURCHASE_MIN,
            view_adjacency: 1,
            purchase_window: None,
            max_cluster: DEFAULT_MAX_CLUSTER,
            positive_min_cosine: DEFAULT_POSITIVE_MIN_COSINE,
            negative_max_cosine: DEFAULT_NEGATIVE_MAX_COSINE,
            synthetic_per_pair: DEFAULT_SYNTHETIC_PER_PAIR,
        }
    }
}

/// One training-data configuration: image cleaning C and synthetic augmentation S.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridCell {
    pub cleaning: bool,
    pub synthetic: bool,
}

impl GridCell {
    pub const ALL: [GridCell; 4] = [
        GridCell { cleaning: false, synthetic: false },
        GridCell { cleaning: false, synthetic: true },
        GridCell { cleaning: true, synthetic: false },
        GridCell { cleaning: true, synthetic: true },
    ];

    /// Report label, e.g. `C=1,S=0`.
    pub fn label(self) -> String {
        format!("C={},S={}", u8::from(self.cleaning), u8::from(self.synthetic))
    }

    /// Step-name suffix, e.g. `c1_s0`.
    pub fn suffix(self) -> String {
        format!("c{}_s{}", u8::from(self.cleaning), u8::from(self.synthetic))
    }
}

fn default_prod2vec() -> CbowConfig {
    CbowConfig::prod2vec()
}

fn default_text() -> CbowConfig {
    CbowConfig::text()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub shop: ShopPaths,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Master seed; overrides the seeds inside the embedding and training sections.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_image_dim")]
    pub image_dim: usize,
    #[serde(default = "default_prod2vec")]
    pub prod2vec: CbowConfig,
    #[serde(default = "default_text")]
    pub text: CbowConfig,
    /// Retrieved candidates per product.
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub pairs: PairConfig,
    #[serde(default = "default_grid")]
    pub grid: Vec<GridCell>,
    #[serde(default)]
    pub train: TrainConfig,
    /// Golden pair count; all available positives (balanced) when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub golden_count: Option<usize>,
    #[serde(default)]
    pub tables: TableConfig,
    /// Minimum classifier score for a retrieved candidate to count as a substitute.
    #[serde(default = "default_threshold")]
    pub substitute_threshold: f64,
    /// Grid cell whose model feeds the comparison tables.
    #[serde(default = "default_table_model")]
    pub table_model: GridCell,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_train_fraction() -> f64 {
    0.8
}
fn default_image_dim() -> usize {
    IMAGE_DIM
}
fn default_k() -> usize {
    DEFAULT_K
}
fn default_grid() -> Vec<GridCell> {
    GridCell::ALL.to_vec()
}
fn default_threshold() -> f64 {
    0.5
}
fn default_table_model() -> GridCell {
    GridCell { cleaning: true, synthetic: true }
}
fn default_jobs() -> usize {
    1
}

impl PipelineConfig {
    pub fn new(shop: ShopPaths, output_dir: PathBuf) -> Self {
        Self {
            shop,
            output_dir,
            seed: 0,
            train_fraction: default_train_fraction(),
            image_dim: default_image_dim(),
            prod2vec: default_prod2vec(),
            text: default_text(),
            k: default_k(),
            pairs: PairConfig::default(),
            grid: default_grid(),
            train: TrainConfig::default(),
            golden_count: None,
            tables: TableConfig::default(),
            substitute_threshold: default_threshold(),
            table_model: default_table_model(),
            jobs: default_jobs(),
        }
    }

    /// Parses TOML and resolves relative paths against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.shop.catalog);
        resolve(&mut config.shop.sessions);
        resolve(&mut config.shop.search_logs);
        config.shop.images.as_mut().map(resolve);
        config.shop.manifest.as_mut().map(resolve);
        resolve(&mut config.output_dir);
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction));
        }
        if self.k == 0 || self.jobs == 0 || self.image_dim == 0 {
            return bad("k, jobs and image_dim must be positive".into());
        }
        if self.grid.is_empty() {
            return bad("grid must list at least one (cleaning, synthetic) cell".into());
        }
        if self.grid.iter().any(|c| c.cleaning) && self.shop.images.is_none() {
            return bad("image cleaning needs shop.images".into());
        }
        if !self.grid.contains(&self.table_model) {
            return bad(format!("table_model {} is not in the grid", self.table_model.label()));
        }
        let p = &self.pairs;
        if !(-1.0..=1.0).contains(&p.positive_min_cosine) || !(-1.0..=1.0).contains(&p.negative_max_cosine) {
            return bad("cosine thresholds must lie in [-1, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.substitute_threshold) {
            return bad("substitute_threshold must lie in [0, 1]".into());
        }
        self.prod2vec.validate()?;
        self.text.validate()?;
        self.tables.weights.validate()?;
        Ok(())
    }

    /// Embedding and training sections with the master seed applied.
    pub fn seeded(&self) -> (CbowConfig, CbowConfig, TrainConfig) {
        let mut train = self.train.clone();
        train.seed = self.seed;
        (
            self.prod2vec.clone().with_seed(self.seed),
            self.text.clone().with_seed(self.seed.wrapping_add(1)),
            train,
        )
    }
}

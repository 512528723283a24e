//! The concrete comparison-table DAG and its artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{GridCell, PairConfig, PipelineConfig};
use super::dag::{Dag, RunSummary, Step, StepContext};
use super::golden::golden_pairs;
use super::simulate::ShopManifest;
use crate::catalog::{load_catalog, load_search_logs, load_sessions, split_products, Product, ProductSplit, SearchLogEntry, Session, SessionLoadReport};
use crate::embeddings::{
    images_by_product, load_image_embeddings, product_text_tables, train_prod2vec_with_history, train_text_embeddings,
    CandidateList, EmbeddingKind, EmbeddingTable, KnnIndex,
};
use crate::error::{Error, Result};
use crate::io::{read_json, read_jsonl, write_json, write_jsonl, write_text};
use crate::pairgen::{
    augment_synthetic, build_clusters, clean_with_images, label_pairs, mine_copurchase, mine_coview, partition_by_split,
    remove_conflicts, CleanReport, Label, LabeledPair, PairStats, SubstituteCluster,
};
use crate::substmodel::{
    baseline_image_score, evaluate, pr_curve, train, FeatureKind, FeatureStore, MetricsRow, PrCurve, SiameseModel,
};
use crate::tablebuild::{
    build_table, pdp_frequency, property_entropy, property_vocabulary, query_frequency, rank_properties, ComparisonTable,
    ScoredCandidate,
};

pub const INGEST: &str = "ingest";
pub const PROD2VEC: &str = "prod2vec";
pub const TEXT: &str = "text";
pub const CANDIDATES: &str = "candidates";
pub const GOLDEN: &str = "golden";
pub const BASELINE: &str = "baseline";
pub const PROPERTIES: &str = "properties";
pub const REPORT: &str = "report";
pub const TABLES: &str = "tables";

pub const CATALOG_ARTIFACT: &str = "catalog.jsonl";
pub const SESSIONS_ARTIFACT: &str = "sessions.jsonl";
pub const SEARCH_LOGS_ARTIFACT: &str = "search_logs.jsonl";
pub const IMAGES_ARTIFACT: &str = "images.jsonl";
pub const SPLIT_ARTIFACT: &str = "split.json";
pub const INGEST_REPORT: &str = "ingest_report.json";
pub const PROD2VEC_ARTIFACT: &str = "prod2vec.jsonl";
pub const LOSS_ARTIFACT: &str = "loss.json";
pub const NAME_ARTIFACT: &str = "name.jsonl";
pub const DESCRIPTION_ARTIFACT: &str = "description.jsonl";
pub const CATEGORIES_ARTIFACT: &str = "categories.jsonl";
pub const OOV_ARTIFACT: &str = "out_of_vocabulary.json";
pub const CANDIDATES_ARTIFACT: &str = "candidates.jsonl";
pub const GOLDEN_ARTIFACT: &str = "golden.jsonl";
pub const PAIRS_ARTIFACT: &str = "pairs.jsonl";
pub const CLUSTERS_ARTIFACT: &str = "clusters.jsonl";
pub const STATS_ARTIFACT: &str = "stats.json";
pub const MODEL_ARTIFACT: &str = "model.json";
pub const HISTORY_ARTIFACT: &str = "history.json";
pub const METRICS_ARTIFACT: &str = "metrics.json";
pub const CURVE_ARTIFACT: &str = "pr_curve.csv";
pub const QUERY_FREQ_ARTIFACT: &str = "query_frequency.json";
pub const PDP_FREQ_ARTIFACT: &str = "pdp_frequency.json";
pub const RANKING_ARTIFACT: &str = "ranking.json";
pub const REPORT_ARTIFACT: &str = "report.json";
pub const PAIR_STATS_ARTIFACT: &str = "pair_stats.json";
pub const TABLES_ARTIFACT: &str = "tables.jsonl";

pub fn pairs_step(cell: GridCell) -> String {
    format!("pairs_{}", cell.suffix())
}

pub fn train_step(cell: GridCell) -> String {
    format!("train_{}", cell.suffix())
}

pub fn evaluate_step(cell: GridCell) -> String {
    format!("evaluate_{}", cell.suffix())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub products: usize,
    pub sessions: usize,
    pub search_queries: usize,
    pub train_products: usize,
    pub validation_products: usize,
    pub images: usize,
    pub products_without_image: usize,
    pub sessions_dropped: SessionLoadReport,
}

/// Everything the ingest step produces, loaded back from its directory.
pub struct Ingested {
    pub catalog: Vec<Product>,
    pub sessions: Vec<Session>,
    pub search_logs: Vec<SearchLogEntry>,
    pub split: ProductSplit,
    pub images: Option<EmbeddingTable>,
}

impl Ingested {
    pub fn load(dir: &Path, image_dim: usize) -> Result<Self> {
        let images_path = dir.join(IMAGES_ARTIFACT);
        Ok(Self {
            catalog: read_jsonl(&dir.join(CATALOG_ARTIFACT))?,
            sessions: read_jsonl(&dir.join(SESSIONS_ARTIFACT))?,
            search_logs: read_jsonl(&dir.join(SEARCH_LOGS_ARTIFACT))?,
            split: read_json(&dir.join(SPLIT_ARTIFACT))?,
            images: if images_path.exists() {
                Some(load_image_embeddings(&images_path, image_dim)?)
            } else {
                None
            },
        })
    }

    fn require_images(&self) -> Result<&EmbeddingTable> {
        self.images
            .as_ref()
            .ok_or_else(|| Error::Config("this step needs image embeddings (shop.images)".into()))
    }
}

/// Loads the tables a feature configuration needs from the embedding steps.
pub fn load_feature_store(kinds: &[FeatureKind], prod2vec_dir: &Path, text_dir: &Path) -> Result<FeatureStore> {
    let mut tables = Vec::new();
    for &k in kinds {
        let (path, dim_hint) = match k {
            FeatureKind::Prod2vec => (prod2vec_dir.join(PROD2VEC_ARTIFACT), EmbeddingKind::Prod2vec),
            FeatureKind::Name => (text_dir.join(NAME_ARTIFACT), EmbeddingKind::NameText),
            FeatureKind::Description => (text_dir.join(DESCRIPTION_ARTIFACT), EmbeddingKind::DescriptionText),
            FeatureKind::Categories => (text_dir.join(CATEGORIES_ARTIFACT), EmbeddingKind::CategoriesText),
        };
        tables.push(load_any_dim(&path, dim_hint)?);
    }
    let refs: Vec<&EmbeddingTable> = tables.iter().collect();
    FeatureStore::from_tables(kinds, &refs)
}

/// Loads a table whose dimension is taken from its first record.
fn load_any_dim(path: &Path, kind: EmbeddingKind) -> Result<EmbeddingTable> {
    #[derive(Deserialize)]
    struct Head {
        vector: Vec<f64>,
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let dim = match text.lines().find(|l| !l.trim().is_empty()) {
        Some(line) => serde_json::from_str::<Head>(line)?.vector.len(),
        None => 0,
    };
    EmbeddingTable::load(path, kind, dim)
}

/// Training pairs for one grid cell, with bookkeeping.
#[derive(Debug, Clone)]
pub struct GeneratedPairs {
    pub positives: Vec<LabeledPair>,
    pub negatives: Vec<LabeledPair>,
    pub clusters: Vec<SubstituteCluster>,
    pub synthetic: Vec<LabeledPair>,
    pub clean_positive: Option<CleanReport>,
    pub clean_negative: Option<CleanReport>,
    pub conflicts_removed: usize,
}

impl GeneratedPairs {
    /// Observed and synthetic pairs, sorted by key.
    pub fn all(&self) -> Vec<LabeledPair> {
        let mut all: Vec<LabeledPair> = self
            .positives
            .iter()
            .chain(&self.negatives)
            .chain(&self.synthetic)
            .cloned()
            .collect();
        all.sort_by(|a, b| a.key().cmp(&b.key()));
        all
    }

    pub fn stats(&self, split: &ProductSplit) -> PairStats {
        let (train, validation) = partition_by_split(&self.all(), split);
        let reports = [self.clean_positive, self.clean_negative];
        PairStats {
            clusters: self.clusters.len(),
            dropped_by_cleaning: reports.iter().flatten().map(|r| r.dropped_by_threshold).sum(),
            dropped_missing_image: reports.iter().flatten().map(|r| r.dropped_missing_image).sum(),
            conflicts_removed: self.conflicts_removed,
            ..PairStats::count(&train, &validation)
        }
    }
}

/// Mines co-view positives and co-purchase negatives, optionally cleans them
/// with image similarity, removes conflicts, clusters the positives and
/// optionally adds synthetic swaps.
pub fn generate_pairs(
    sessions: &[Session],
    images: Option<&EmbeddingTable>,
    config: &PairConfig,
    cell: GridCell,
    seed: u64,
) -> Result<GeneratedPairs> {
    let mut positives = label_pairs(&mine_coview(sessions, config.coview_min, config.view_adjacency), Label::Positive);
    let mut negatives = label_pairs(
        &mine_copurchase(sessions, config.copurchase_min, config.purchase_window),
        Label::Negative,
    );
    let (mut clean_positive, mut clean_negative) = (None, None);
    if cell.cleaning {
        let images = images.ok_or_else(|| Error::Config("image cleaning needs image embeddings".into()))?;
        let (p, rp) = clean_with_images(&positives, images, config.positive_min_cosine, config.negative_max_cosine);
        let (n, rn) = clean_with_images(&negatives, images, config.positive_min_cosine, config.negative_max_cosine);
        positives = p;
        negatives = n;
        clean_positive = Some(rp);
        clean_negative = Some(rn);
    }
    let before = positives.len() + negatives.len();
    let (positives, negatives) = remove_conflicts(&positives, &negatives);
    let conflicts_removed = before - positives.len() - negatives.len();
    let clusters = build_clusters(&positives);
    let synthetic = if cell.synthetic {
        let observed: Vec<LabeledPair> = positives.iter().chain(&negatives).cloned().collect();
        augment_synthetic(&observed, &clusters, config.max_cluster, config.synthetic_per_pair, seed)
    } else {
        Vec::new()
    };
    Ok(GeneratedPairs {
        positives,
        negatives,
        clusters,
        synthetic,
        clean_positive,
        clean_negative,
        conflicts_removed,
    })
}

fn json<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("config values serialize")
}

fn run_ingest(ctx: &StepContext, config: &PipelineConfig) -> Result<()> {
    let catalog = load_catalog(&config.shop.catalog)?;
    let (sessions, dropped) = load_sessions(&config.shop.sessions, &catalog)?;
    let search_logs = load_search_logs(&config.shop.search_logs)?;
    let split = split_products(&catalog, config.train_fraction, config.seed)?;
    let mut report = IngestReport {
        products: catalog.len(),
        sessions: sessions.len(),
        search_queries: search_logs.len(),
        train_products: split.train_ids.len(),
        validation_products: split.validation_ids.len(),
        sessions_dropped: dropped,
        ..Default::default()
    };
    if let Some(path) = &config.shop.images {
        let images = images_by_product(&load_image_embeddings(path, config.image_dim)?, &catalog);
        report.images = images.len();
        report.products_without_image = catalog.len() - images.len();
        if report.products_without_image > 0 {
            log::warn!("{} products have no image vector", report.products_without_image);
        }
        images.save(&ctx.output(IMAGES_ARTIFACT))?;
    }
    write_jsonl(&ctx.output(CATALOG_ARTIFACT), &catalog)?;
    write_jsonl(&ctx.output(SESSIONS_ARTIFACT), &sessions)?;
    write_jsonl(&ctx.output(SEARCH_LOGS_ARTIFACT), &search_logs)?;
    write_json(&ctx.output(SPLIT_ARTIFACT), &split)?;
    write_json(&ctx.output(INGEST_REPORT), &report)
}

fn run_tables(ctx: &StepContext, config: &PipelineConfig, feature_kinds: &[FeatureKind]) -> Result<()> {
    let ingested = Ingested::load(ctx.dep(INGEST)?, config.image_dim)?;
    let candidates: Vec<CandidateList> = read_jsonl(&ctx.dep(CANDIDATES)?.join(CANDIDATES_ARTIFACT))?;
    let candidates: BTreeMap<&str, &CandidateList> = candidates.iter().map(|c| (c.query_id.as_str(), c)).collect();
    let store = load_feature_store(feature_kinds, ctx.dep(PROD2VEC)?, ctx.dep(TEXT)?)?;
    let model = SiameseModel::load(&ctx.dep(&train_step(config.table_model))?.join(MODEL_ARTIFACT))?;
    let props = ctx.dep(PROPERTIES)?;
    let query_freq: BTreeMap<String, f64> = read_json(&props.join(QUERY_FREQ_ARTIFACT))?;
    let pdp_freq: BTreeMap<String, f64> = read_json(&props.join(PDP_FREQ_ARTIFACT))?;

    let products: BTreeMap<&str, &Product> = ingested.catalog.iter().map(|p| (p.id.as_str(), p)).collect();
    let fused: BTreeMap<&str, Vec<f64>> = store
        .bundles
        .iter()
        .map(|(id, b)| Ok((id.as_str(), model.fuse(b)?.vector)))
        .collect::<Result<_>>()?;

    let mut tables: Vec<ComparisonTable> = Vec::with_capacity(ingested.catalog.len());
    let mut flagged = 0usize;
    for query in &ingested.catalog {
        let mut scored: Vec<ScoredCandidate> = Vec::new();
        if let (Some(list), Some(hq)) = (candidates.get(query.id.as_str()), fused.get(query.id.as_str())) {
            for c in &list.candidates {
                let (Some(product), Some(hc)) = (products.get(c.id.as_str()), fused.get(c.id.as_str())) else {
                    continue;
                };
                let score = model.score_fused(hq, hc);
                if score >= config.substitute_threshold {
                    scored.push(ScoredCandidate { product, score });
                }
            }
        }
        scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.product.id.cmp(&b.product.id)));
        let table = build_table(query, &scored, &query_freq, &pdp_freq, &config.tables)?;
        if !table.fallback.is_empty() {
            flagged += 1;
        }
        tables.push(table);
    }
    if flagged > 0 {
        log::info!("{flagged} of {} tables use a display fallback", tables.len());
    }
    write_jsonl(&ctx.output(TABLES_ARTIFACT), &tables)
}

/// Builds the full DAG for `config`.
pub fn build_dag(config: &PipelineConfig) -> Result<Dag> {
    config.validate()?;
    let (p2v_config, text_config, train_config) = config.seeded();
    let mut dag = Dag::new();

    let mut inputs = vec![config.shop.catalog.clone(), config.shop.sessions.clone(), config.shop.search_logs.clone()];
    inputs.extend(config.shop.images.clone());
    {
        let c = config.clone();
        dag.add(Step::new(
            INGEST,
            &[],
            serde_json::json!({ "train_fraction": c.train_fraction, "seed": c.seed, "image_dim": c.image_dim }),
            inputs,
            move |ctx| run_ingest(ctx, &c),
        ))?;
    }
    {
        let cfg = p2v_config.clone();
        let image_dim = config.image_dim;
        dag.add(Step::new(PROD2VEC, &[INGEST], json(&cfg), vec![], move |ctx| {
            let ingested = Ingested::load(ctx.dep(INGEST)?, image_dim)?;
            let (table, losses) = train_prod2vec_with_history(&ingested.sessions, &cfg)?;
            table.save(&ctx.output(PROD2VEC_ARTIFACT))?;
            write_json(&ctx.output(LOSS_ARTIFACT), &losses)
        }))?;
    }
    {
        let cfg = text_config.clone();
        let image_dim = config.image_dim;
        dag.add(Step::new(TEXT, &[INGEST], json(&cfg), vec![], move |ctx| {
            let ingested = Ingested::load(ctx.dep(INGEST)?, image_dim)?;
            let words = train_text_embeddings(&ingested.catalog, &cfg)?;
            let tables = product_text_tables(&ingested.catalog, &words)?;
            tables.name.save(&ctx.output(NAME_ARTIFACT))?;
            tables.description.save(&ctx.output(DESCRIPTION_ARTIFACT))?;
            tables.categories.save(&ctx.output(CATEGORIES_ARTIFACT))?;
            write_json(&ctx.output(OOV_ARTIFACT), &tables.out_of_vocabulary)
        }))?;
    }
    {
        let k = config.k;
        dag.add(Step::new(CANDIDATES, &[PROD2VEC], serde_json::json!({ "k": k }), vec![], move |ctx| {
            let table = load_any_dim(&ctx.dep(PROD2VEC)?.join(PROD2VEC_ARTIFACT), EmbeddingKind::Prod2vec)?;
            let index = KnnIndex::new(&table);
            let mut lists = Vec::with_capacity(table.len());
            for id in table.vectors.keys() {
                match index.query(id, k) {
                    Ok(list) => lists.push(list),
                    Err(Error::UndefinedCosine) => log::warn!("product {id}: zero behavioral vector, no candidates"),
                    Err(e) => return Err(e),
                }
            }
            write_jsonl(&ctx.output(CANDIDATES_ARTIFACT), &lists)
        }))?;
    }
    {
        let image_dim = config.image_dim;
        let pairs = config.pairs.clone();
        let seed = config.seed;
        for &cell in &config.grid {
            let cfg = pairs.clone();
            dag.add(Step::new(
                pairs_step(cell),
                &[INGEST],
                serde_json::json!({ "pairs": cfg, "cell": cell, "seed": seed }),
                vec![],
                move |ctx| {
                    let ingested = Ingested::load(ctx.dep(INGEST)?, image_dim)?;
                    let images = if cell.cleaning { Some(ingested.require_images()?) } else { None };
                    let generated = generate_pairs(&ingested.sessions, images, &cfg, cell, seed)?;
                    write_jsonl(&ctx.output(PAIRS_ARTIFACT), &generated.all())?;
                    write_jsonl(&ctx.output(CLUSTERS_ARTIFACT), &generated.clusters)?;
                    write_json(&ctx.output(STATS_ARTIFACT), &generated.stats(&ingested.split))
                },
            ))?;
            let tc = train_config.clone();
            let pairs_name = pairs_step(cell);
            let deps = [INGEST, PROD2VEC, TEXT, pairs_name.as_str()].map(String::from);
            let dep_refs: Vec<&str> = deps.iter().map(String::as_str).collect();
            dag.add(Step::new(
                train_step(cell),
                &dep_refs,
                json(&tc),
                vec![],
                move |ctx| {
                    let ingested = Ingested::load(ctx.dep(INGEST)?, image_dim)?;
                    let store = load_feature_store(&tc.feature_config, ctx.dep(PROD2VEC)?, ctx.dep(TEXT)?)?;
                    let pairs: Vec<LabeledPair> = read_jsonl(&ctx.dep(&pairs_name)?.join(PAIRS_ARTIFACT))?;
                    let (usable, skipped): (Vec<LabeledPair>, Vec<LabeledPair>) = pairs
                        .into_iter()
                        .partition(|p| store.bundles.contains_key(&p.a) && store.bundles.contains_key(&p.b));
                    if !skipped.is_empty() {
                        log::warn!("{} pairs skipped for missing features", skipped.len());
                    }
                    let (model, history) = train(&usable, &store, &ingested.split, &tc)?;
                    model.save(&ctx.output(MODEL_ARTIFACT))?;
                    write_json(&ctx.output(HISTORY_ARTIFACT), &history)
                },
            ))?;
        }
    }
    {
        let cfg = config.tables.weights;
        let image_dim = config.image_dim;
        dag.add(Step::new(PROPERTIES, &[INGEST], json(&cfg), vec![], move |ctx| {
            let ingested = Ingested::load(ctx.dep(INGEST)?, image_dim)?;
            let vocab = property_vocabulary(&ingested.catalog);
            let query_freq = query_frequency(&ingested.search_logs, &vocab);
            let pdp_freq = pdp_frequency(&ingested.catalog, &vocab);
            let all: Vec<&Product> = ingested.catalog.iter().collect();
            let entropy: BTreeMap<String, f64> = vocab.keys().map(|k| (k.clone(), property_entropy(&all, k))).collect();
            write_json(&ctx.output(QUERY_FREQ_ARTIFACT), &query_freq)?;
            write_json(&ctx.output(PDP_FREQ_ARTIFACT), &pdp_freq)?;
            if !vocab.is_empty() {
                write_json(&ctx.output(RANKING_ARTIFACT), &rank_properties(&query_freq, &pdp_freq, &entropy, cfg)?)?;
            }
            Ok(())
        }))?;
    }
    {
        let c = config.clone();
        let kinds = train_config.feature_config.clone();
        let model_step = train_step(config.table_model);
        dag.add(Step::new(
            TABLES,
            &[INGEST, CANDIDATES, PROD2VEC, TEXT, PROPERTIES, model_step.as_str()],
            serde_json::json!({ "tables": c.tables, "threshold": c.substitute_threshold }),
            vec![],
            move |ctx| run_tables(ctx, &c, &kinds),
        ))?;
    }

    if let Some(manifest_path) = &config.shop.manifest {
        add_evaluation(&mut dag, config, manifest_path.clone(), &train_config.feature_config)?;
    }
    Ok(dag)
}

fn add_evaluation(dag: &mut Dag, config: &PipelineConfig, manifest_path: PathBuf, kinds: &[FeatureKind]) -> Result<()> {
    let image_dim = config.image_dim;
    {
        let (count, seed) = (config.golden_count, config.seed);
        dag.add(Step::new(
            GOLDEN,
            &[INGEST, CANDIDATES],
            serde_json::json!({ "count": count, "seed": seed }),
            vec![manifest_path.clone()],
            move |ctx| {
                let ingested = Ingested::load(ctx.dep(INGEST)?, image_dim)?;
                let manifest: ShopManifest = read_json(&manifest_path)?;
                manifest.validate()?;
                let lists: Vec<CandidateList> = read_jsonl(&ctx.dep(CANDIDATES)?.join(CANDIDATES_ARTIFACT))?;
                // Only products with a behavioral vector can be scored.
                let mut split = ingested.split.clone();
                split.validation_ids.retain(|id| lists.iter().any(|l| &l.query_id == id));
                let lists = lists.into_iter().map(|l| (l.query_id.clone(), l)).collect();
                let golden = golden_pairs(&manifest, &split, &lists, count, seed)?;
                write_jsonl(&ctx.output(GOLDEN_ARTIFACT), &golden)
            },
        ))?;
    }
    let write_curve = |ctx: &StepContext, label: &str, curve: &PrCurve| -> Result<()> {
        write_text(&ctx.output(CURVE_ARTIFACT), &curve.to_csv())?;
        write_json(&ctx.output(METRICS_ARTIFACT), &MetricsRow::from_curve(label, curve))
    };
    if config.shop.images.is_some() {
        dag.add(Step::new(BASELINE, &[INGEST, GOLDEN], serde_json::json!({}), vec![], move |ctx| {
            let ingested = Ingested::load(ctx.dep(INGEST)?, image_dim)?;
            let images = ingested.require_images()?;
            let golden: Vec<LabeledPair> = read_jsonl(&ctx.dep(GOLDEN)?.join(GOLDEN_ARTIFACT))?;
            // Pairs that cannot be compared by image get the neutral score.
            let scored: Vec<(f64, bool)> = golden
                .iter()
                .map(|p| (baseline_image_score(&p.a, &p.b, images).unwrap_or(0.5), p.label == Label::Positive))
                .collect();
            write_curve(ctx, "Image baseline", &pr_curve(&scored)?)
        }))?;
    }
    for &cell in &config.grid {
        let train_name = train_step(cell);
        let kinds = kinds.to_vec();
        let deps = [GOLDEN, PROD2VEC, TEXT, train_name.as_str()].map(String::from);
        let dep_refs: Vec<&str> = deps.iter().map(String::as_str).collect();
        dag.add(Step::new(
            evaluate_step(cell),
            &dep_refs,
            serde_json::json!({ "cell": cell }),
            vec![],
            move |ctx| {
                let model = SiameseModel::load(&ctx.dep(&train_name)?.join(MODEL_ARTIFACT))?;
                let store = load_feature_store(&kinds, ctx.dep(PROD2VEC)?, ctx.dep(TEXT)?)?;
                let golden: Vec<LabeledPair> = read_jsonl(&ctx.dep(GOLDEN)?.join(GOLDEN_ARTIFACT))?;
                write_curve(ctx, &cell.label(), &evaluate(&model, &golden, &store)?)
            },
        ))?;
    }
    let mut deps: Vec<String> = config.grid.iter().map(|&c| evaluate_step(c)).collect();
    deps.extend(config.grid.iter().map(|&c| pairs_step(c)));
    if config.shop.images.is_some() {
        deps.push(BASELINE.to_string());
    }
    let dep_refs: Vec<&str> = deps.iter().map(String::as_str).collect();
    let grid = config.grid.clone();
    let with_baseline = config.shop.images.is_some();
    dag.add(Step::new(REPORT, &dep_refs, serde_json::json!({ "grid": grid }), vec![], move |ctx| {
        let mut rows: Vec<MetricsRow> = Vec::new();
        if with_baseline {
            rows.push(read_json(&ctx.dep(BASELINE)?.join(METRICS_ARTIFACT))?);
        }
        let mut stats: BTreeMap<String, PairStats> = BTreeMap::new();
        for &cell in &grid {
            rows.push(read_json(&ctx.dep(&evaluate_step(cell))?.join(METRICS_ARTIFACT))?);
            stats.insert(cell.label(), read_json(&ctx.dep(&pairs_step(cell))?.join(STATS_ARTIFACT))?);
        }
        write_json(&ctx.output(REPORT_ARTIFACT), &rows)?;
        write_json(&ctx.output(PAIR_STATS_ARTIFACT), &stats)
    }))?;
    Ok(())
}

/// Runs the DAG, restricted to `targets` and their dependencies when given.
pub fn run_pipeline(config: &PipelineConfig, targets: Option<&[&str]>) -> Result<RunSummary> {
    let mut dag = build_dag(config)?;
    if let Some(t) = targets {
        dag.prune(t)?;
    }
    dag.run(&config.output_dir, config.jobs)
}

use std::collections::BTreeSet;
use std::path::Path;

use cmpeng::catalog::ProductSplit;
use cmpeng::embeddings::CandidateList;
use cmpeng::io::{read_json, read_jsonl};
use cmpeng::pairgen::{Label, LabeledPair};
use cmpeng::pipeline::*;
use cmpeng::tablebuild::{ComparisonTable, Fallback};

fn small_spec(seed: u64) -> ShopSpec {
    ShopSpec {
        clusters: 8,
        products_per_cluster: 8,
        clusters_per_type: 2,
        browse_sessions: 800,
        purchase_sessions: 150,
        image_dim: 16,
        search_queries: 200,
        seed,
        ..ShopSpec::default()
    }
}

fn small_config(shop: &Path, out: &Path) -> PipelineConfig {
    let mut config = PipelineConfig::new(ShopPaths::in_dir(shop), out.to_path_buf());
    config.image_dim = 16;
    config.k = 20;
    config.pairs.coview_min = 2;
    config.train.max_epochs = 5;
    config.prod2vec.iterations = 5;
    config.text.iterations = 5;
    config
}

fn setup(seed: u64) -> (tempfile::TempDir, PipelineConfig) {
    let dir = tempfile::tempdir().unwrap();
    simulate_shop(&small_spec(seed)).unwrap().write(&dir.path().join("shop")).unwrap();
    let config = small_config(&dir.path().join("shop"), &dir.path().join("out"));
    (dir, config)
}

fn artifact(summary: &RunSummary, config: &PipelineConfig, step: &str, file: &str) -> std::path::PathBuf {
    summary.dir_of(&config.output_dir, step).unwrap().join(file)
}

#[test]
fn every_table_has_three_substitutes_or_a_flag() {
    let (_dir, config) = setup(11);
    let summary = run_pipeline(&config, None).unwrap();
    let tables: Vec<ComparisonTable> = read_jsonl(&artifact(&summary, &config, TABLES, TABLES_ARTIFACT)).unwrap();
    assert_eq!(tables.len(), 64);
    for t in &tables {
        let distinct: BTreeSet<&String> = t.substitutes.iter().collect();
        assert_eq!(distinct.len(), t.substitutes.len());
        assert!(!t.substitutes.contains(&t.query_id));
        assert!(
            t.substitutes.len() == 3 || t.fallback.iter().any(|f| matches!(f, Fallback::TooFewCandidates { .. })),
            "{}: {:?} without a flag",
            t.query_id,
            t.substitutes
        );
    }
}

#[test]
fn golden_pairs_respect_split_and_retrieval() {
    let (_dir, config) = setup(12);
    let summary = run_pipeline(&config, Some(&[GOLDEN])).unwrap();
    let golden: Vec<LabeledPair> = read_jsonl(&artifact(&summary, &config, GOLDEN, GOLDEN_ARTIFACT)).unwrap();
    let split: ProductSplit = read_json(&artifact(&summary, &config, INGEST, SPLIT_ARTIFACT)).unwrap();
    let lists: Vec<CandidateList> = read_jsonl(&artifact(&summary, &config, CANDIDATES, CANDIDATES_ARTIFACT)).unwrap();
    let retrieved: BTreeSet<(&str, &str)> =
        lists.iter().flat_map(|l| l.ids().map(move |c| (l.query_id.as_str(), c))).collect();

    let positives = golden.iter().filter(|p| p.label == Label::Positive).count();
    assert!(positives > 0);
    assert_eq!(positives * 2, golden.len());
    for p in &golden {
        assert!(split.is_validation(&p.a) && split.is_validation(&p.b), "{p:?} touches training products");
        if p.label == Label::Negative {
            assert!(
                retrieved.contains(&(p.a.as_str(), p.b.as_str())) || retrieved.contains(&(p.b.as_str(), p.a.as_str())),
                "{p:?} is not a retrieved candidate"
            );
        }
    }
}

#[test]
fn grid_report_has_baseline_and_four_cells() {
    let (_dir, config) = setup(13);
    let summary = run_pipeline(&config, Some(&[REPORT])).unwrap();
    let rows: Vec<cmpeng::substmodel::MetricsRow> =
        read_json(&artifact(&summary, &config, REPORT, REPORT_ARTIFACT)).unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r.configuration.as_str()).collect();
    assert_eq!(names, ["Image baseline", "C=0,S=0", "C=0,S=1", "C=1,S=0", "C=1,S=1"]);
    assert!(summary.dir_of(&config.output_dir, TABLES).is_none());
}

#[test]
fn memoized_rerun_matches_fresh_run() {
    let (dir, config) = setup(14);
    let first = run_pipeline(&config, None).unwrap();
    let hash_first = hash_tree(&config.output_dir).unwrap();
    let again = run_pipeline(&config, None).unwrap();
    assert!(again.executed.is_empty());
    assert_eq!(again.skipped.len(), first.records.len());
    assert_eq!(hash_tree(&config.output_dir).unwrap(), hash_first);

    let mut fresh = config.clone();
    fresh.output_dir = dir.path().join("fresh");
    run_pipeline(&fresh, None).unwrap();
    assert_eq!(hash_tree(&fresh.output_dir).unwrap(), hash_first);
}

#[test]
fn changed_config_reruns_only_downstream_steps() {
    let (_dir, mut config) = setup(15);
    run_pipeline(&config, None).unwrap();
    config.substitute_threshold = 0.6;
    let second = run_pipeline(&config, None).unwrap();
    assert_eq!(second.executed, [TABLES]);
}

#[test]
fn missing_manifest_skips_evaluation() {
    let (dir, mut config) = setup(16);
    std::fs::remove_file(dir.path().join("shop").join(MANIFEST_FILE)).unwrap();
    config.shop = ShopPaths::in_dir(&dir.path().join("shop"));
    let summary = run_pipeline(&config, None).unwrap();
    let names: BTreeSet<&str> = summary.records.iter().map(|r| r.name.as_str()).collect();
    assert!(names.contains(TABLES));
    assert!(!names.contains(GOLDEN) && !names.contains(REPORT));
}

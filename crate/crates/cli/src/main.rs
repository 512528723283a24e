//! Command-line front end for the comparison-table engine.
//!
//! Pipeline subcommands run the memoized DAG restricted to the steps they
//! name, so repeated invocations reuse completed artifacts.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use cmpeng::humaneval::{
    agreement, bt_fit, calibrate_rbo_p, filter_control, rbo, BtOptions, RawResponse, DEFAULT_CALIBRATION_LENGTH,
    DEFAULT_CALIBRATION_TARGET, DEFAULT_CALIBRATION_TRIALS,
};
use cmpeng::io::{read_jsonl, write_json};
use cmpeng::pipeline::{
    self, pairs_step, run_pipeline, simulate_shop, train_step, PipelineConfig, RunSummary, ShopSpec,
};
use cmpeng::tablebuild::ComponentWeights;

#[derive(Parser)]
#[command(name = "cmpeng", version, about = "Build product comparison tables from behavioral logs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct PipelineArgs {
    /// Pipeline configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Maximum number of steps run concurrently.
    #[arg(long)]
    jobs: Option<usize>,
    /// Property ranking weights as `w1,w2,w3` (query, description, entropy).
    #[arg(long)]
    weights: Option<ComponentWeights>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and normalize the shop inputs.
    Ingest(PipelineArgs),
    /// Train prod2vec and text embeddings and retrieve kNN candidates.
    TrainEmbeddings(PipelineArgs),
    /// Mine, clean and augment substitute pairs for every grid cell.
    BuildPairs(PipelineArgs),
    /// Train the substitute classifier for every grid cell.
    TrainModel(PipelineArgs),
    /// Score golden pairs and write the precision/recall report.
    Evaluate(PipelineArgs),
    /// Rank properties from search logs, descriptions and entropy.
    RankProperties(PipelineArgs),
    /// Build the final comparison tables.
    BuildTables(PipelineArgs),
    /// Run every step.
    Run(PipelineArgs),
    /// Generate a synthetic shop with ground-truth substitute clusters.
    SimulateShop {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Shop parameters (TOML); defaults are used when absent.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit Bradley-Terry strengths to pairwise judgments.
    BtRank {
        /// judgments.jsonl with item_a, item_b, winner and control fields.
        #[arg(long)]
        judgments: PathBuf,
        /// Expected answer for the control question, when stored as text.
        #[arg(long)]
        control_key: Option<String>,
        /// Add 0.5 pseudo-wins per compared pair instead of failing on degenerate data.
        #[arg(long)]
        laplace: bool,
        /// Algorithm property order (comma separated); adds an RBO agreement row.
        #[arg(long, value_delimiter = ',')]
        algorithm: Option<Vec<String>>,
        /// Product label for the agreement row.
        #[arg(long, default_value = "product")]
        product: String,
        /// RBO persistence; calibrated when absent.
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the result here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank-biased overlap between two lists, or calibration of p.
    Rbo {
        #[arg(long, value_delimiter = ',')]
        a: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        b: Option<Vec<String>>,
        /// Persistence; calibrated when absent.
        #[arg(long)]
        p: Option<f64>,
        /// List length used for calibration.
        #[arg(long, default_value_t = DEFAULT_CALIBRATION_LENGTH)]
        length: usize,
        /// Mean RBO of random permutations to calibrate to.
        #[arg(long, default_value_t = DEFAULT_CALIBRATION_TARGET)]
        target: f64,
        #[arg(long, default_value_t = DEFAULT_CALIBRATION_TRIALS)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_config(args: &PipelineArgs) -> anyhow::Result<PipelineConfig> {
    let mut config = PipelineConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(jobs) = args.jobs {
        config.jobs = jobs;
    }
    if let Some(weights) = args.weights {
        config.tables.weights = weights;
    }
    Ok(config)
}

fn run_targets(args: &PipelineArgs, targets: impl FnOnce(&PipelineConfig) -> Vec<String>) -> anyhow::Result<()> {
    let config = load_config(args)?;
    let targets = targets(&config);
    let refs: Vec<&str> = targets.iter().map(String::as_str).collect();
    let summary = run_pipeline(&config, if refs.is_empty() { None } else { Some(&refs) })?;
    report(&config.output_dir, &summary);
    Ok(())
}

fn report(root: &Path, summary: &RunSummary) {
    for record in &summary.records {
        println!("{}\t{}", record.name, root.join(&record.dir).display());
    }
    log::info!("{} steps executed, {} reused", summary.executed.len(), summary.skipped.len());
}

fn grid_steps(config: &PipelineConfig, name: fn(pipeline::GridCell) -> String) -> Vec<String> {
    config.grid.iter().map(|&c| name(c)).collect()
}

fn resolve_p(p: Option<f64>, seed: u64) -> anyhow::Result<f64> {
    Ok(match p {
        Some(p) => p,
        None => calibrate_rbo_p(
            DEFAULT_CALIBRATION_LENGTH,
            DEFAULT_CALIBRATION_TARGET,
            DEFAULT_CALIBRATION_TRIALS,
            seed,
        )?,
    })
}

fn print_json(value: &impl serde::Serialize, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(path) => write_json(path, value)?,
        None => println!("{}", serde_json::to_string_pretty(value)?),
    }
    Ok(())
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Ingest(a) => run_targets(&a, |_| vec![pipeline::INGEST.into()]),
        Command::TrainEmbeddings(a) => run_targets(&a, |_| {
            vec![pipeline::PROD2VEC.into(), pipeline::TEXT.into(), pipeline::CANDIDATES.into()]
        }),
        Command::BuildPairs(a) => run_targets(&a, |c| grid_steps(c, pairs_step)),
        Command::TrainModel(a) => run_targets(&a, |c| grid_steps(c, train_step)),
        Command::Evaluate(a) => {
            let config = load_config(&a)?;
            if config.shop.manifest.is_none() {
                bail!("evaluate needs shop.manifest with ground-truth clusters");
            }
            run_targets(&a, |_| vec![pipeline::REPORT.into()])
        }
        Command::RankProperties(a) => run_targets(&a, |_| vec![pipeline::PROPERTIES.into()]),
        Command::BuildTables(a) => run_targets(&a, |_| vec![pipeline::TABLES.into()]),
        Command::Run(a) => run_targets(&a, |_| Vec::new()),
        Command::SimulateShop { out, spec, seed } => {
            let mut spec: ShopSpec = match spec {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
                }
                None => ShopSpec::default(),
            };
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            simulate_shop(&spec)?.write(&out)?;
            println!("{}", out.display());
            Ok(())
        }
        Command::BtRank {
            judgments,
            control_key,
            laplace,
            algorithm,
            product,
            p,
            seed,
            out,
        } => {
            let responses: Vec<RawResponse> = read_jsonl(&judgments)?;
            let options = BtOptions {
                laplace,
                ..BtOptions::default()
            };
            match algorithm {
                Some(order) => {
                    let p = resolve_p(p, seed)?;
                    let row = agreement(&product, &order, &responses, control_key.as_deref(), options, p)?;
                    print_json(&row, out.as_deref())
                }
                None => {
                    let filtered = filter_control(&responses, control_key.as_deref());
                    log::info!(
                        "kept {} responses, dropped {} on control and {} malformed",
                        filtered.kept,
                        filtered.dropped_control,
                        filtered.dropped_malformed
                    );
                    print_json(&bt_fit(&filtered.judgments, options)?, out.as_deref())
                }
            }
        }
        Command::Rbo {
            a,
            b,
            p,
            length,
            target,
            trials,
            seed,
        } => match (a, b) {
            (Some(a), Some(b)) => {
                let p = resolve_p(p, seed)?;
                println!("{}", rbo(&a, &b, p)?);
                Ok(())
            }
            (None, None) => {
                println!("{}", calibrate_rbo_p(length, target, trials, seed)?);
                Ok(())
            }
            _ => bail!("give both --a and --b, or neither to calibrate p"),
        },
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

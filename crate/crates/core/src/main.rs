use std::fs;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use imbalanced_ds::artifact::{load_model, load_pool, save_model, save_pool, MODEL_FORMAT};
use imbalanced_ds::balancing::whole_set_balance;
use imbalanced_ds::dataset::{ingest_drebin, load_csv, summarize, write_csv};
use imbalanced_ds::harness::{
    compare_balancing, emit_reports, read_results_csv, results_markdown, run_experiment_on,
    run_hardness, stream_seed, ExperimentConfig, HardnessData, ModelId, ReportBundle,
};
use imbalanced_ds::metrics::{compute_metrics, confusion};
use imbalanced_ds::pool::{build_pool, train_base, BalanceMode, BaseKind, PoolConfig};
use imbalanced_ds::{Classifier, Error, Result};

const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(
    version,
    about = "Imbalance-aware ensembles and dynamic selection for malware detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a binary feature matrix from per-app feature files.
    Ingest {
        /// Directory with one feature file per app, named by its hash.
        #[arg(long)]
        feature_dir: PathBuf,
        /// CSV listing malicious app hashes in a `sha256` column.
        #[arg(long)]
        manifest: PathBuf,
        /// Drop features present in fewer apps than this.
        #[arg(long, default_value_t = 10)]
        min_feature_count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print class counts and imbalance ratio of a labelled CSV.
    Summarize {
        data: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run the configured models over repeated splits and write reports.
    Experiment(ExperimentArgs),
    /// Run two balance modes side by side and report per-metric deltas.
    CompareBalancing {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, default_value = "none")]
        left: BalanceMode,
        #[arg(long, default_value = "bbb")]
        right: BalanceMode,
    },
    /// kDN hardness before and after whole-set SMOTE.
    Hardness {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long)]
        k: Option<usize>,
        /// Which rows to score: train, test or full.
        #[arg(long, value_parser = parse_hardness_data)]
        on: Option<HardnessData>,
    },
    /// Re-render the markdown table from a results CSV.
    Report {
        results: PathBuf,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one model on a whole dataset and save it.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        pool_size: Option<usize>,
        #[arg(long)]
        model: ModelId,
        /// Balance mode for this model.
        #[arg(long, default_value = "none")]
        mode: BalanceMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a saved model or pool on a labelled CSV.
    Evaluate {
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Labelled CSV to use instead of the configured dataset.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    pool_size: Option<usize>,
    /// Comma-separated model ids.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<ModelId>>,
    /// Comma-separated balance modes.
    #[arg(long, value_delimiter = ',')]
    balance: Option<Vec<BalanceMode>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(p) = &self.data {
            cfg.dataset = imbalanced_ds::harness::DatasetSource::Csv { path: p.clone() };
        }
        if let Some(v) = self.iterations {
            cfg.iterations = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.pool_size {
            cfg.pool_size = v;
        }
        if let Some(v) = &self.models {
            cfg.models = v.clone();
        }
        if let Some(v) = &self.balance {
            cfg.balance = v.clone();
        }
        if let Some(v) = &self.out {
            cfg.output_dir = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_hardness_data(s: &str) -> std::result::Result<HardnessData, String> {
    match s {
        "train" => Ok(HardnessData::Train),
        "test" => Ok(HardnessData::Test),
        "full" => Ok(HardnessData::Full),
        other => Err(format!("expected train, test or full, got {other:?}")),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Ingest {
            feature_dir,
            manifest,
            min_feature_count,
            out,
        } => {
            let data = ingest_drebin(&feature_dir, &manifest, min_feature_count)?;
            write_csv(&data, &out)?;
            print_summary(&data, false)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Summarize { data, json } => {
            print_summary(&load_csv(&data)?, json)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Experiment(args) => {
            let cfg = args.resolve()?;
            let data = cfg.dataset.load()?;
            let outcome = run_experiment_on(&cfg, &data)?;
            let bundle = ReportBundle {
                outcome: Some(&outcome),
                ..ReportBundle::default()
            };
            finish(&bundle, &cfg.output_dir, outcome.is_partial())
        }
        Command::CompareBalancing { exp, left, right } => {
            let mut cfg = exp.resolve()?;
            cfg.balance = if left == right {
                vec![left]
            } else {
                vec![left, right]
            };
            let data = cfg.dataset.load()?;
            let outcome = run_experiment_on(&cfg, &data)?;
            let rows = compare_balancing(&outcome.aggregates(), left, right);
            for r in &rows {
                println!(
                    "{:<20} {:<7} {left}={:>7.2} {right}={:>7.2} delta={:+.2}",
                    r.model.name(),
                    r.metric.name(),
                    r.left_mean,
                    r.right_mean,
                    r.delta
                );
            }
            let bundle = ReportBundle {
                outcome: Some(&outcome),
                comparison: Some(&rows),
                ..ReportBundle::default()
            };
            finish(&bundle, &cfg.output_dir, outcome.is_partial())
        }
        Command::Hardness { exp, k, on } => {
            let mut cfg = exp.resolve()?;
            if let Some(k) = k {
                cfg.hardness.k = k;
            }
            if let Some(on) = on {
                cfg.hardness.data = on;
            }
            let data = cfg.dataset.load()?;
            let shift = run_hardness(&cfg, &data)?;
            for label in imbalanced_ds::Label::ALL {
                let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
                println!(
                    "{:<8} before={} after={} delta={}",
                    label.name(),
                    fmt(shift.mean_before(label)),
                    fmt(shift.mean_after(label)),
                    fmt(shift.delta(label))
                );
            }
            let bundle = ReportBundle {
                hardness: Some(&shift),
                ..ReportBundle::default()
            };
            finish(&bundle, &cfg.output_dir, false)
        }
        Command::Report { results, out } => {
            let md = results_markdown(&read_results_csv(&results)?);
            match out {
                Some(p) => fs::write(&p, md).map_err(|e| io_error(&p, e))?,
                None => print!("{md}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Train {
            config,
            data,
            seed,
            pool_size,
            model,
            mode,
            out,
        } => {
            let exp = ExperimentArgs {
                config,
                data,
                seed,
                pool_size,
                iterations: None,
                models: None,
                balance: None,
                out: None,
            };
            let cfg = exp.resolve()?;
            let data = cfg.dataset.load()?;
            train(&cfg, &data, model, mode, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate { artifact, data } => {
            let data = load_csv(&data)?;
            let predictions = if artifact_format(&artifact)? == MODEL_FORMAT {
                load_model(&artifact)?.predict_all(&data)
            } else {
                load_pool(&artifact)?.predict_all(&data)
            };
            let metrics = compute_metrics(&confusion(&predictions, data.labels()));
            let json =
                serde_json::to_string_pretty(&metrics).map_err(|e| Error::Serde(e.to_string()))?;
            println!("{json}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn finish(bundle: &ReportBundle<'_>, dir: &Path, partial: bool) -> Result<ExitCode> {
    for p in emit_reports(bundle, dir)? {
        eprintln!("wrote {}", p.display());
    }
    if partial {
        eprintln!("some arms failed; see manifest.json");
        Ok(ExitCode::from(EXIT_PARTIAL))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn print_summary(data: &imbalanced_ds::Dataset, json: bool) -> Result<()> {
    let s = summarize(data)?;
    if json {
        let text = serde_json::to_string_pretty(&s).map_err(|e| Error::Serde(e.to_string()))?;
        println!("{text}");
    } else {
        println!("instances:       {}", s.total);
        println!("positives:       {}", s.positives);
        println!("negatives:       {}", s.negatives);
        println!("features:        {}", s.n_features);
        println!("imbalance ratio: {}", s.imbalance_ratio_display());
    }
    Ok(())
}

fn train(
    cfg: &ExperimentConfig,
    data: &imbalanced_ds::Dataset,
    model: ModelId,
    balance: BalanceMode,
    out: &Path,
) -> Result<()> {
    let seed = cfg.iteration_seed(0);
    let smote = imbalanced_ds::balancing::SmoteConfig {
        seed: cfg.smote.seed.wrapping_add(seed),
        ..cfg.smote
    };
    let single = match model {
        ModelId::DecisionTree => Some(BaseKind::Tree),
        ModelId::Knn => Some(BaseKind::Knn),
        ModelId::NaiveBayes => Some(BaseKind::NaiveBayes),
        _ => None,
    };
    if let Some(kind) = single {
        let train = match balance {
            BalanceMode::None => data.clone(),
            BalanceMode::WholeSet => whole_set_balance(data, &smote)?,
            BalanceMode::Bbb => {
                return Err(Error::Config(format!(
                    "{model} is a single learner and has no bbb mode"
                )))
            }
        };
        let m = train_base(kind, &train, &cfg.base, None, stream_seed(seed, 5))?;
        return save_model(&m, out);
    }
    let (base_kind, forest) = match model {
        ModelId::Bagging(kind) => (kind, false),
        ModelId::RandomForest => (BaseKind::Tree, true),
        other => {
            return Err(Error::Config(format!(
                "{other} needs a DSEL at prediction time; only single models, bagging and random_forest can be saved"
            )))
        }
    };
    let pool = build_pool(
        data,
        &PoolConfig {
            base_kind,
            n: cfg.pool_size,
            balance,
            smote,
            seed,
            rf_feature_subsample: forest.then_some(cfg.rf_feature_subsample),
            base: cfg.base,
        },
    )?;
    save_pool(&pool, out)
}

fn artifact_format(path: &Path) -> Result<String> {
    let file = fs::File::open(path).map_err(|e| io_error(path, e))?;
    let mut first = String::new();
    std::io::BufReader::new(file)
        .read_line(&mut first)
        .map_err(|e| io_error(path, e))?;
    let header: serde_json::Value = serde_json::from_str(&first)
        .map_err(|e| Error::Serde(format!("{}: {e}", path.display())))?;
    header
        .get("format")
        .and_then(|f| f.as_str())
        .map(str::to_owned)
        .ok_or_else(|| Error::Serde(format!("{}: missing format in header", path.display())))
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

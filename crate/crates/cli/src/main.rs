//! `fab`: train, evaluate and audit fairness-aware boosted ensembles.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use fab_core::boost::{train_fab, Ensemble, FabConfig};
use fab_core::bound::verify_bound;
use fab_core::dataset::{load_csv, Dataset, DatasetSchema, OnMissing};
use fab_core::harness::{self, BalanceMode, ExperimentConfig};
use fab_core::metrics::{accuracy, confusion, GroupConfusion};
use fab_core::preprocess::{lambda_max, mix_seed, split_train_test, FairnessIndicator};
use fab_core::synthetic::{generate, SyntheticConfig, SyntheticTable};
use fab_core::tree::TreeConfig;

#[derive(Parser)]
#[command(name = "fab", version, about = "Fairness-aware AdaBoost")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and balance a dataset, then report sizes and lambda ranges.
    Prep(DataArgs),
    /// Train one ensemble and write it as JSON.
    Train(TrainArgs),
    /// Evaluate a saved ensemble on a dataset.
    Eval(ModelArgs),
    /// Run a full sweep from an experiment config file.
    Sweep(SweepArgs),
    /// Audit the training-set bound of a saved ensemble.
    Audit(ModelArgs),
    /// Write a synthetic two-group CSV and its schema.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Indicator {
    Accuracy,
    Fpr,
    Fnr,
}

impl From<Indicator> for FairnessIndicator {
    fn from(i: Indicator) -> Self {
        match i {
            Indicator::Accuracy => FairnessIndicator::Accuracy,
            Indicator::Fpr => FairnessIndicator::Fpr,
            Indicator::Fnr => FairnessIndicator::Fnr,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Balance {
    None,
    Group,
    GroupAndLabel,
}

impl From<Balance> for BalanceMode {
    fn from(b: Balance) -> Self {
        match b {
            Balance::None => BalanceMode::None,
            Balance::Group => BalanceMode::Group,
            Balance::GroupAndLabel => BalanceMode::GroupAndLabel,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Part {
    All,
    Train,
    Test,
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// JSON dataset schema.
    #[arg(long)]
    schema: PathBuf,
    #[arg(long, value_enum, default_value = "group")]
    balance: Balance,
    #[arg(long, default_value_t = 0)]
    balance_seed: u64,
    /// Fail on rows with empty cells instead of dropping them.
    #[arg(long)]
    strict_missing: bool,
    /// Which partition to use; `train` and `test` match the first split a
    /// sweep draws for `--split-seed`.
    #[arg(long, value_enum, default_value = "all")]
    part: Part,
    #[arg(long, default_value_t = 0.7)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum)]
    indicator: Indicator,
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 30)]
    rounds: usize,
    #[arg(long, default_value_t = 3)]
    max_depth: usize,
    #[arg(long, default_value_t = 0.0)]
    min_leaf_weight: f64,
    /// Output path for the ensemble JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ModelArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Ensemble JSON written by `train` or `sweep`.
    #[arg(long)]
    model: PathBuf,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment config (JSON); relative paths resolve against its directory.
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Skip writing per-model JSON files.
    #[arg(long)]
    no_models: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Also write the matching dataset schema here.
    #[arg(long)]
    schema_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 9349)]
    rows: usize,
    #[arg(long, default_value_t = 935)]
    rows_with_missing: usize,
}

fn load(args: &DataArgs) -> Result<Dataset> {
    let schema = DatasetSchema::from_json_file(&args.schema)?;
    let on_missing = if args.strict_missing { OnMissing::Error } else { OnMissing::DropRow };
    let raw = load_csv(&args.data, &schema, on_missing)
        .with_context(|| format!("loading {}", args.data.display()))?;
    let ds = harness::balance(&raw, args.balance.into(), args.balance_seed)?;
    if args.part == Part::All {
        return Ok(ds);
    }
    let (train, test) = split_train_test(&ds, args.train_fraction, mix_seed(args.split_seed, 0))?;
    Ok(if args.part == Part::Train { train } else { test })
}

fn read_model(path: &Path) -> Result<Ensemble> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Ensemble::from_json(&text)?)
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct PrepReport {
    samples: usize,
    features: Vec<String>,
    group_counts: (usize, usize),
    /// `[S][y]` with y index 0 for -1 and 1 for +1.
    cell_counts: [[usize; 2]; 2],
    lambda_max: Vec<(FairnessIndicator, Option<f64>)>,
}

fn prep(args: &DataArgs) -> Result<()> {
    let ds = load(args)?;
    let cell = |s, y| ds.cell_count(s, y);
    let report = PrepReport {
        samples: ds.len(),
        features: ds.feature_names().to_vec(),
        group_counts: ds.group_counts(),
        cell_counts: [[cell(0, -1), cell(0, 1)], [cell(1, -1), cell(1, 1)]],
        lambda_max: FairnessIndicator::ALL
            .iter()
            .map(|&ind| (ind, lambda_max(&ds, ind).ok().map(|r| r.hi)))
            .collect(),
    };
    emit(&report, None)
}

fn train(args: &TrainArgs) -> Result<()> {
    let ds = load(&args.data)?;
    let cfg = FabConfig {
        rounds: args.rounds,
        lambda: args.lambda,
        indicator: args.indicator.into(),
        tree: TreeConfig { max_depth: args.max_depth, min_leaf_weight: args.min_leaf_weight },
        epsilon: fab_core::boost::default_epsilon(),
    };
    let ens = train_fab(&ds, &cfg)?;
    fs::write(&args.out, ens.to_json()?).with_context(|| format!("writing {}", args.out.display()))?;
    let preds = ens.predict_dataset(&ds)?;
    eprintln!(
        "trained {} rounds on {} samples; training accuracy {:.4}",
        ens.members.len(),
        ds.len(),
        accuracy(&preds, &ds.labels())?
    );
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    samples: usize,
    indicator: FairnessIndicator,
    accuracy: f64,
    signed_gap: Option<f64>,
    fairness_loss: Option<f64>,
    confusion: GroupConfusion,
}

fn eval(args: &ModelArgs) -> Result<()> {
    let ens = read_model(&args.model)?;
    let ds = load(&args.data)?;
    let preds = ens.predict_dataset(&ds)?;
    let conf = confusion(&preds, &ds)?;
    let gap = conf.signed_gap(ens.indicator).ok();
    let report = EvalReport {
        samples: ds.len(),
        indicator: ens.indicator,
        accuracy: accuracy(&preds, &ds.labels())?,
        signed_gap: gap,
        fairness_loss: gap.map(f64::abs),
        confusion: conf,
    };
    emit(&report, args.out.as_deref())
}

fn audit(args: &ModelArgs) -> Result<()> {
    let ens = read_model(&args.model)?;
    let ds = load(&args.data)?;
    let report = verify_bound(&ens, &ds)?;
    emit(&report, args.out.as_deref())?;
    if !report.certified() {
        bail!("bound audit failed");
    }
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if let Some(dir) = &args.output_dir {
        cfg.output_dir = Some(dir.clone());
    }
    if args.no_models {
        cfg.write_models = false;
    }
    let result = harness::run_experiment(&cfg)?;
    println!(
        "{} samples, lambda_max {:.4}, {} seeds",
        result.dataset.samples,
        result.dataset.lambda_max,
        cfg.seeds.len()
    );
    println!("model     lambda  test_acc  test_loss  train_acc  train_loss  certified");
    for s in std::iter::once(&result.baseline_summary).chain(&result.summary) {
        let name = match s.model {
            harness::ModelKind::Fab => "fab",
            harness::ModelKind::Adaboost => "adaboost",
        };
        println!(
            "{name:<8} {:>7.3}  {:>8.4}  {:>9.4}  {:>9.4}  {:>10.4}  {}",
            s.lambda,
            s.test_accuracy.mean,
            s.test_fairness_loss.mean,
            s.train_accuracy.mean,
            s.train_fairness_loss.mean,
            s.bounds_certified
        );
    }
    if let Some(dir) = &cfg.output_dir {
        println!("results written to {}", dir.display());
    }
    if result.all_records().any(|r| !r.bound.certified()) {
        bail!("at least one bound audit failed");
    }
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<()> {
    let cfg = SyntheticConfig {
        rows: args.rows,
        rows_with_missing: args.rows_with_missing,
        seed: args.seed,
        ..SyntheticConfig::default()
    };
    let table = generate(&cfg)?;
    table.write_csv(&args.out)?;
    if let Some(path) = &args.schema_out {
        emit(&SyntheticTable::schema(), Some(path))?;
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Prep(a) => prep(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
        Command::Audit(a) => audit(a),
        Command::Synth(a) => synth(a),
    }
}

//! Seeded lambda sweeps.
//!
//! Pipeline: load, balance once, then for every seed draw one train/test
//! split shared by all lambdas, train one ensemble per (lambda, seed) plus a
//! vanilla AdaBoost baseline per seed, evaluate both partitions, audit the
//! bound on the training partition and aggregate per lambda.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boost::{train_adaboost, train_fab, Ensemble, FabConfig};
use crate::bound::{verify_bound, BoundReport};
use crate::dataset::{load_csv, Dataset, DatasetSchema, OnMissing};
use crate::error::{FabError, Result};
use crate::metrics::{accuracy, confusion};
use crate::preprocess::{
    balance_by_group, lambda_max, mix_seed, split_train_test, subpopulation_counts,
    FairnessIndicator, LambdaRange,
};
use crate::synthetic::{generate, SyntheticConfig};
use crate::tree::TreeConfig;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceMode {
    None,
    #[default]
    Group,
    GroupAndLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub dataset_path: Option<PathBuf>,
    #[serde(default)]
    pub schema_path: Option<PathBuf>,
    /// Generate the data instead of reading a CSV.
    #[serde(default)]
    pub synthetic: Option<SyntheticConfig>,
    #[serde(default)]
    pub on_missing: OnMissing,
    pub indicator: FairnessIndicator,
    pub lambdas: Vec<f64>,
    #[serde(alias = "T")]
    pub rounds: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub tree: TreeConfig,
    #[serde(default)]
    pub balance: BalanceMode,
    #[serde(default)]
    pub balance_seed: u64,
    #[serde(default = "crate::boost::default_epsilon")]
    pub epsilon: f64,
    /// Splits tried per seed before giving up on a degenerate partition.
    #[serde(default = "default_max_resplits")]
    pub max_resplits: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub write_models: bool,
}

fn default_seeds() -> Vec<u64> {
    (0..20).collect()
}

fn default_train_fraction() -> f64 {
    0.7
}

fn default_max_resplits() -> u64 {
    16
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    /// Parse a JSON config; relative paths are resolved against the
    /// config file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| FabError::io(path, e))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.dataset_path, &mut cfg.schema_path, &mut cfg.output_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.dataset_path, &self.schema_path, &self.synthetic) {
            (Some(_), Some(_), None) | (None, None, Some(_)) => {}
            _ => {
                return Err(FabError::Config(
                    "give either dataset_path and schema_path, or synthetic".into(),
                ))
            }
        }
        if self.lambdas.is_empty() {
            return Err(FabError::Config("lambdas is empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(FabError::Config("seeds is empty".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(FabError::Config(format!(
                "train_fraction {} not in (0, 1)",
                self.train_fraction
            )));
        }
        if self.max_resplits == 0 {
            return Err(FabError::Config("max_resplits must be positive".into()));
        }
        for &lambda in &self.lambdas {
            self.fab_config(lambda).validate()?;
        }
        Ok(())
    }

    pub fn fab_config(&self, lambda: f64) -> FabConfig {
        FabConfig {
            rounds: self.rounds,
            lambda,
            indicator: self.indicator,
            tree: self.tree,
            epsilon: self.epsilon,
        }
    }
}

/// Load (or generate) the data and balance it.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Dataset> {
    let raw = match (&cfg.dataset_path, &cfg.schema_path, &cfg.synthetic) {
        (Some(data), Some(schema), None) => {
            load_csv(data, &DatasetSchema::from_json_file(schema)?, cfg.on_missing)?
        }
        (None, None, Some(syn)) => generate(syn)?.to_dataset()?,
        _ => return Err(FabError::Config("no data source".into())),
    };
    balance(&raw, cfg.balance, cfg.balance_seed)
}

pub fn balance(ds: &Dataset, mode: BalanceMode, seed: u64) -> Result<Dataset> {
    match mode {
        BalanceMode::None => Ok(ds.clone()),
        BalanceMode::Group => balance_by_group(ds, false, seed),
        BalanceMode::GroupAndLabel => balance_by_group(ds, true, seed),
    }
}

/// Fail if any lambda is outside the admissible range of `ds`.
pub fn check_lambdas(ds: &Dataset, ind: FairnessIndicator, lambdas: &[f64]) -> Result<LambdaRange> {
    let range = lambda_max(ds, ind)?;
    for &lambda in lambdas {
        range.check(lambda)?;
    }
    Ok(range)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Fab,
    Adaboost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: ModelKind,
    pub lambda: f64,
    pub seed: u64,
    /// Index of the split attempt that produced a usable partition.
    pub split_attempt: u64,
    pub train_size: usize,
    pub test_size: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub train_fairness_loss: f64,
    pub test_fairness_loss: f64,
    pub train_signed_gap: f64,
    pub test_signed_gap: f64,
    /// Lambda equals the upper end of the range on the training partition.
    pub boundary_lambda: bool,
    pub bound: BoundReport,
    pub wall_clock_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> MeanStd {
        let n = values.len();
        if n == 0 {
            return MeanStd { mean: f64::NAN, std: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n == 1 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSummary {
    pub model: ModelKind,
    pub lambda: f64,
    pub runs: usize,
    pub train_accuracy: MeanStd,
    pub test_accuracy: MeanStd,
    pub train_fairness_loss: MeanStd,
    pub test_fairness_loss: MeanStd,
    pub train_signed_gap: MeanStd,
    pub test_signed_gap: MeanStd,
    pub bounds_certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub samples: usize,
    pub features: Vec<String>,
    pub group_counts: (usize, usize),
    pub subpopulation_counts: (usize, usize),
    pub lambda_max: f64,
    pub schema_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub dataset: DatasetInfo,
    /// Sorted by (lambda, seed).
    pub records: Vec<RunRecord>,
    /// One per seed, sorted by seed.
    pub baseline: Vec<RunRecord>,
    pub summary: Vec<LambdaSummary>,
    pub baseline_summary: LambdaSummary,
}

impl ExperimentResult {
    pub fn all_records(&self) -> impl Iterator<Item = &RunRecord> {
        self.records.iter().chain(&self.baseline)
    }

    /// Results JSON with every `wall_clock_ms` set to zero.
    pub fn to_json_without_timing(&self) -> Result<String> {
        let mut copy = self.clone();
        for r in copy.records.iter_mut().chain(copy.baseline.iter_mut()) {
            r.wall_clock_ms = 0.0;
        }
        Ok(serde_json::to_string_pretty(&copy)?)
    }
}

/// Train/test partition for one seed.
#[derive(Debug, Clone)]
pub struct SeedSplit {
    pub seed: u64,
    pub attempt: u64,
    pub train: Dataset,
    pub test: Dataset,
}

/// Whether every lambda is admissible on `train` and the indicator's rates
/// are defined for both groups on both partitions.
fn split_usable(train: &Dataset, test: &Dataset, ind: FairnessIndicator, lambdas: &[f64]) -> bool {
    let defined = |ds: &Dataset| {
        let (u, f) = subpopulation_counts(ds, ind);
        u > 0 && f > 0
    };
    if !(defined(train) && defined(test)) {
        return false;
    }
    match lambda_max(train, ind) {
        Ok(range) => lambdas.iter().all(|&l| range.contains(l)),
        Err(_) => false,
    }
}

/// Split for `seed`, retrying with derived sub-seeds when the partition is
/// degenerate.
pub fn split_for_seed(ds: &Dataset, cfg: &ExperimentConfig, seed: u64) -> Result<SeedSplit> {
    for attempt in 0..cfg.max_resplits {
        let sub = mix_seed(seed, attempt);
        match split_train_test(ds, cfg.train_fraction, sub) {
            Ok((train, test)) if split_usable(&train, &test, cfg.indicator, &cfg.lambdas) => {
                return Ok(SeedSplit { seed, attempt, train, test });
            }
            Ok(_) | Err(FabError::ResampleNeeded(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(FabError::ResampleNeeded(format!(
        "seed {seed}: no usable split in {} attempts",
        cfg.max_resplits
    )))
}

/// Evaluate a trained ensemble on both partitions and audit the bound.
pub fn evaluate(
    model: ModelKind,
    ens: &Ensemble,
    split: &SeedSplit,
    ind: FairnessIndicator,
    started: Instant,
) -> Result<RunRecord> {
    let pred_train = ens.predict_dataset(&split.train)?;
    let pred_test = ens.predict_dataset(&split.test)?;
    let gap_train = confusion(&pred_train, &split.train)?.signed_gap(ind)?;
    let gap_test = confusion(&pred_test, &split.test)?.signed_gap(ind)?;
    let bound = verify_bound(ens, &split.train)?;
    let hi = lambda_max(&split.train, ind)?.hi;
    Ok(RunRecord {
        model,
        lambda: ens.lambda,
        seed: split.seed,
        split_attempt: split.attempt,
        train_size: split.train.len(),
        test_size: split.test.len(),
        train_accuracy: accuracy(&pred_train, &split.train.labels())?,
        test_accuracy: accuracy(&pred_test, &split.test.labels())?,
        train_fairness_loss: gap_train.abs(),
        test_fairness_loss: gap_test.abs(),
        train_signed_gap: gap_train,
        test_signed_gap: gap_test,
        boundary_lambda: ens.lambda > 0.0 && (ens.lambda - hi).abs() <= LambdaRange::TOLERANCE,
        bound,
        wall_clock_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

/// Records plus the trained models, in the order of `records`.
pub struct SweepOutput {
    pub result: ExperimentResult,
    pub models: Vec<(RunRecord, Ensemble)>,
}

/// Run the sweep on an already prepared (balanced) dataset.
pub fn run_prepared(ds: &Dataset, cfg: &ExperimentConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let range = check_lambdas(ds, cfg.indicator, &cfg.lambdas)?;

    let splits: Vec<SeedSplit> = cfg
        .seeds
        .par_iter()
        .map(|&seed| split_for_seed(ds, cfg, seed))
        .collect::<Result<_>>()?;

    // Jobs: every (lambda, seed) cell plus one baseline per seed.
    let mut jobs: Vec<(ModelKind, f64, usize)> = Vec::new();
    for &lambda in &cfg.lambdas {
        for k in 0..splits.len() {
            jobs.push((ModelKind::Fab, lambda, k));
        }
    }
    for k in 0..splits.len() {
        jobs.push((ModelKind::Adaboost, 0.0, k));
    }
    let done: Vec<(RunRecord, Ensemble)> = jobs
        .par_iter()
        .map(|&(kind, lambda, k)| {
            let started = Instant::now();
            let split = &splits[k];
            let fab_cfg = cfg.fab_config(lambda);
            let ens = match kind {
                ModelKind::Fab => train_fab(&split.train, &fab_cfg)?,
                ModelKind::Adaboost => train_adaboost(&split.train, &fab_cfg)?,
            };
            let record = evaluate(kind, &ens, split, cfg.indicator, started)?;
            Ok((record, ens))
        })
        .collect::<Result<_>>()?;

    let mut models = done;
    models.sort_by(|(a, _), (b, _)| {
        (a.model == ModelKind::Adaboost)
            .cmp(&(b.model == ModelKind::Adaboost))
            .then(a.lambda.total_cmp(&b.lambda))
            .then(a.seed.cmp(&b.seed))
    });
    let (records, baseline): (Vec<RunRecord>, Vec<RunRecord>) = models
        .iter()
        .map(|(r, _)| r.clone())
        .partition(|r| r.model == ModelKind::Fab);

    let summary = aggregate(&records);
    let baseline_summary = aggregate(&baseline)
        .pop()
        .ok_or_else(|| FabError::Contract("no baseline runs".into()))?;
    let result = ExperimentResult {
        config: cfg.clone(),
        dataset: DatasetInfo {
            samples: ds.len(),
            features: ds.feature_names().to_vec(),
            group_counts: ds.group_counts(),
            subpopulation_counts: subpopulation_counts(ds, cfg.indicator),
            lambda_max: range.hi,
            schema_fingerprint: ds.schema_fingerprint().to_string(),
        },
        records,
        baseline,
        summary,
        baseline_summary,
    };
    Ok(SweepOutput { result, models })
}

/// Load, balance, sweep and persist to `output_dir` when one is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let ds = prepare(cfg)?;
    let out = run_prepared(&ds, cfg)?;
    if let Some(dir) = &cfg.output_dir {
        persist(&out, dir, cfg.write_models)?;
    }
    Ok(out.result)
}

/// Per-lambda means and sample standard deviations, sorted by lambda.
/// Records are grouped by `(model, lambda)`.
pub fn aggregate(records: &[RunRecord]) -> Vec<LambdaSummary> {
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        a.lambda
            .total_cmp(&b.lambda)
            .then((a.model == ModelKind::Adaboost).cmp(&(b.model == ModelKind::Adaboost)))
            .then(a.seed.cmp(&b.seed))
    });
    let mut out = Vec::new();
    for group in sorted.chunk_by(|a, b| a.lambda == b.lambda && a.model == b.model) {
        let col = |f: fn(&RunRecord) -> f64| MeanStd::of(&group.iter().map(|r| f(r)).collect::<Vec<_>>());
        out.push(LambdaSummary {
            model: group[0].model,
            lambda: group[0].lambda,
            runs: group.len(),
            train_accuracy: col(|r| r.train_accuracy),
            test_accuracy: col(|r| r.test_accuracy),
            train_fairness_loss: col(|r| r.train_fairness_loss),
            test_fairness_loss: col(|r| r.test_fairness_loss),
            train_signed_gap: col(|r| r.train_signed_gap),
            test_signed_gap: col(|r| r.test_signed_gap),
            bounds_certified: group.iter().all(|r| r.bound.certified()),
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

pub const PLOT_HEADER: [&str; 5] = [
    "lambda",
    "mean_accuracy",
    "std_accuracy",
    "mean_fairness_loss",
    "std_fairness_loss",
];

/// Write one trade-off CSV row per summary, ordered by lambda.
pub fn emit_plot_data(summaries: &[LambdaSummary], split: Split, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut rows: Vec<&LambdaSummary> = summaries.iter().collect();
    rows.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(PLOT_HEADER)?;
    for s in rows {
        let (acc, fl) = match split {
            Split::Train => (s.train_accuracy, s.train_fairness_loss),
            Split::Test => (s.test_accuracy, s.test_fairness_loss),
        };
        w.write_record([
            s.lambda.to_string(),
            acc.mean.to_string(),
            acc.std.to_string(),
            fl.mean.to_string(),
            fl.std.to_string(),
        ])?;
    }
    w.flush().map_err(|e| FabError::io(path, e))
}

fn write_summary_csv(result: &ExperimentResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "model",
        "lambda",
        "runs",
        "mean_train_accuracy",
        "std_train_accuracy",
        "mean_test_accuracy",
        "std_test_accuracy",
        "mean_train_fairness_loss",
        "std_train_fairness_loss",
        "mean_test_fairness_loss",
        "std_test_fairness_loss",
        "bounds_certified",
    ])?;
    for s in std::iter::once(&result.baseline_summary).chain(&result.summary) {
        let model = match s.model {
            ModelKind::Fab => "fab",
            ModelKind::Adaboost => "adaboost",
        };
        w.write_record([
            model.to_string(),
            s.lambda.to_string(),
            s.runs.to_string(),
            s.train_accuracy.mean.to_string(),
            s.train_accuracy.std.to_string(),
            s.test_accuracy.mean.to_string(),
            s.test_accuracy.std.to_string(),
            s.train_fairness_loss.mean.to_string(),
            s.train_fairness_loss.std.to_string(),
            s.test_fairness_loss.mean.to_string(),
            s.test_fairness_loss.std.to_string(),
            s.bounds_certified.to_string(),
        ])?;
    }
    w.flush().map_err(|e| FabError::io(path, e))
}

pub fn model_file_name(record: &RunRecord) -> String {
    match record.model {
        ModelKind::Fab => format!("model_{}_{}.json", record.lambda, record.seed),
        ModelKind::Adaboost => format!("model_adaboost_{}.json", record.seed),
    }
}

/// Write `results.json`, `summary.csv`, `plotdata_{train,test}.csv`, the
/// baseline's `plotdata_{train,test}_adaboost.csv` and optionally one JSON
/// file per model.
pub fn persist(out: &SweepOutput, dir: &Path, write_models: bool) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| FabError::io(dir, e))?;
    let results = dir.join("results.json");
    let file = File::create(&results).map_err(|e| FabError::io(&results, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &out.result)?;
    w.flush().map_err(|e| FabError::io(&results, e))?;

    write_summary_csv(&out.result, &dir.join("summary.csv"))?;
    for split in [Split::Train, Split::Test] {
        emit_plot_data(&out.result.summary, split, dir.join(format!("plotdata_{}.csv", split.name())))?;
        emit_plot_data(
            std::slice::from_ref(&out.result.baseline_summary),
            split,
            dir.join(format!("plotdata_{}_adaboost.csv", split.name())),
        )?;
    }
    if write_models {
        for (record, ens) in &out.models {
            let path = dir.join(model_file_name(record));
            fs::write(&path, ens.to_json()?).map_err(|e| FabError::io(&path, e))?;
        }
    }
    Ok(())
}

/// Spearman rank correlation with average ranks for ties. `None` when
/// either side is constant or the lengths differ.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let rx = ranks(x);
    let ry = ranks(y);
    pearson(&rx, &ry)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

//! Synthetic two-group data with an injected false-negative disparity.
//!
//! A latent ability drives a continuous score (binarized at its median)
//! and ten noisy observed features. For the unfavored group the features
//! are shifted down and noisier, so a classifier trained on them misses
//! more of that group's positives.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{binarize_continuous_label, Dataset, DatasetSchema, Sample, ThresholdRule};
use crate::error::{FabError, Result};
use crate::preprocess::rng;

pub const FEATURES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub rows: usize,
    /// Rows that get exactly one empty feature cell.
    pub rows_with_missing: usize,
    /// Probability that a row belongs to the favored group.
    pub favored_share: f64,
    /// Mean latent ability of the favored group (unfavored is 0).
    pub favored_ability: f64,
    /// Downward shift of the unfavored group's features.
    pub shift: f64,
    pub noise_favored: f64,
    pub noise_unfavored: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            rows: 9349,
            rows_with_missing: 935,
            favored_share: 0.6,
            favored_ability: 0.25,
            shift: 0.6,
            noise_favored: 0.8,
            noise_unfavored: 1.4,
            seed: 0,
        }
    }
}

/// Generated rows before missing-value handling and label binarization.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTable {
    pub group: Vec<u8>,
    /// `rows x FEATURES`; `None` is an empty cell.
    pub features: Vec<[Option<f64>; FEATURES]>,
    pub score: Vec<f64>,
}

const LOADINGS: [f64; FEATURES] = [1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.0, 0.0];

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticTable> {
    if cfg.rows == 0 || cfg.rows_with_missing > cfg.rows {
        return Err(FabError::Config(format!(
            "{} rows with {} missing",
            cfg.rows, cfg.rows_with_missing
        )));
    }
    if !(0.0..=1.0).contains(&cfg.favored_share) {
        return Err(FabError::Config("favored_share must be in [0, 1]".into()));
    }
    let normal = |sd: f64| {
        Normal::new(0.0, sd).map_err(|e| FabError::Config(format!("noise {sd}: {e}")))
    };
    let std_normal = normal(1.0)?;
    let score_noise = normal(0.3)?;
    let noise = [normal(cfg.noise_unfavored)?, normal(cfg.noise_favored)?];

    let mut r = rng(cfg.seed);
    let mut table = SyntheticTable {
        group: Vec::with_capacity(cfg.rows),
        features: Vec::with_capacity(cfg.rows),
        score: Vec::with_capacity(cfg.rows),
    };
    for _ in 0..cfg.rows {
        let g = u8::from(r.random_bool(cfg.favored_share));
        let ability = std_normal.sample(&mut r) + if g == 1 { cfg.favored_ability } else { 0.0 };
        let mut x = [None; FEATURES];
        for (j, cell) in x.iter_mut().enumerate() {
            let shift = if g == 0 && LOADINGS[j] > 0.0 { cfg.shift } else { 0.0 };
            let v = LOADINGS[j] * ability - shift + noise[usize::from(g)].sample(&mut r);
            *cell = Some(round2(v));
        }
        table.group.push(g);
        table.features.push(x);
        table.score.push(ability + score_noise.sample(&mut r));
    }
    for i in sample(&mut r, cfg.rows, cfg.rows_with_missing) {
        let j = r.random_range(0..FEATURES);
        table.features[i][j] = None;
    }
    Ok(table)
}

impl SyntheticTable {
    pub fn len(&self) -> usize {
        self.group.len()
    }

    pub fn is_empty(&self) -> bool {
        self.group.is_empty()
    }

    fn complete_rows(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.features[i].iter().all(Option::is_some))
            .collect()
    }

    /// Labels for every row, thresholded at the median score of the
    /// complete rows.
    pub fn labels(&self) -> Result<Vec<i8>> {
        let complete: Vec<f64> = self.complete_rows().iter().map(|&i| self.score[i]).collect();
        if complete.is_empty() {
            return Err(FabError::EmptyDataset);
        }
        let mut sorted = complete.clone();
        sorted.sort_by(f64::total_cmp);
        let threshold = median_of_sorted(&sorted);
        binarize_continuous_label(&self.score, ThresholdRule::Explicit(threshold))
    }

    pub fn feature_names() -> Vec<String> {
        std::iter::once("group".to_string())
            .chain((1..=FEATURES).map(|j| format!("x{j}")))
            .collect()
    }

    /// Drop incomplete rows and binarize the score at its median.
    pub fn to_dataset(&self) -> Result<Dataset> {
        let labels = self.labels()?;
        let samples = self
            .complete_rows()
            .into_iter()
            .map(|i| {
                let mut f = Vec::with_capacity(FEATURES + 1);
                f.push(f64::from(self.group[i]));
                f.extend(self.features[i].iter().map(|v| v.unwrap()));
                Sample::new(f, labels[i], self.group[i])
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(samples, Self::feature_names(), 0)
    }

    /// Columns `group, x1..x10, score, label`; empty cells for missing values.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let labels = self.labels()?;
        let file = File::create(path).map_err(|e| FabError::io(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        let mut header = Self::feature_names();
        header.push("score".into());
        header.push("label".into());
        w.write_record(&header)?;
        for (i, &label) in labels.iter().enumerate() {
            let mut row = Vec::with_capacity(header.len());
            row.push(self.group[i].to_string());
            row.extend(
                self.features[i]
                    .iter()
                    .map(|v| v.map(|x| x.to_string()).unwrap_or_default()),
            );
            row.push(self.score[i].to_string());
            row.push(if label == 1 { "1" } else { "0" }.to_string());
            w.write_record(&row)?;
        }
        let mut inner = w
            .into_inner()
            .map_err(|e| FabError::io(path, e.into_error()))?;
        inner.flush().map_err(|e| FabError::io(path, e))
    }

    /// Schema matching [`SyntheticTable::write_csv`].
    pub fn schema() -> DatasetSchema {
        DatasetSchema {
            label_column: "label".into(),
            positive_label_value: "1".into(),
            sensitive_column: "group".into(),
            favored_value: "1".into(),
            categorical_columns: Vec::new(),
            drop_columns: vec!["score".into()],
        }
    }
}

fn median_of_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Default-sized dataset for `seed`.
pub fn dataset(seed: u64) -> Result<Dataset> {
    generate(&SyntheticConfig { seed, ..SyntheticConfig::default() })?.to_dataset()
}

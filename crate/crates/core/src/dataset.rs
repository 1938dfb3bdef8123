//! Tabular data loading.
//!
//! A [`Dataset`] holds samples with a `±1` label and a `{0,1}` sensitive
//! attribute, where `S = 1` marks the favored group. The sensitive attribute
//! stays in the feature vector at [`Dataset::sensitive_index`]; the tree
//! learner is responsible for ignoring it.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{FabError, Result};

/// One labelled example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    /// `-1` or `+1`.
    pub label: i8,
    /// `1` for the favored group, `0` otherwise.
    pub sensitive: u8,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: i8, sensitive: u8) -> Result<Self> {
        if label != 1 && label != -1 {
            return Err(FabError::InvalidDataset(format!("label {label} is not ±1")));
        }
        if sensitive > 1 {
            return Err(FabError::InvalidDataset(format!(
                "sensitive value {sensitive} is not 0/1"
            )));
        }
        if let Some(v) = features.iter().find(|v| !v.is_finite()) {
            return Err(FabError::InvalidDataset(format!("non-finite feature value {v}")));
        }
        Ok(Sample {
            features,
            label,
            sensitive,
        })
    }

    #[inline]
    pub fn y(&self) -> f64 {
        f64::from(self.label)
    }

    #[inline]
    pub fn is_favored(&self) -> bool {
        self.sensitive == 1
    }
}

/// Declarative description of how to read a CSV file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub label_column: String,
    /// Cell value mapped to `y = +1`; every other value becomes `-1`.
    pub positive_label_value: String,
    pub sensitive_column: String,
    /// Cell value mapped to `S = 1`.
    pub favored_value: String,
    #[serde(default)]
    pub categorical_columns: Vec<String>,
    #[serde(default)]
    pub drop_columns: Vec<String>,
}

impl DatasetSchema {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| FabError::io(path, e))?;
        let schema: DatasetSchema = serde_json::from_reader(file)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.label_column == self.sensitive_column {
            return Err(FabError::Schema(
                "label_column and sensitive_column must differ".into(),
            ));
        }
        for col in [&self.label_column, &self.sensitive_column] {
            if self.drop_columns.contains(col) {
                return Err(FabError::Schema(format!(
                    "column `{col}` cannot be dropped"
                )));
            }
        }
        Ok(())
    }
}

/// What to do with a row that has an empty cell in a used column.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnMissing {
    #[default]
    DropRow,
    Error,
}

#[derive(Debug, PartialEq)]
struct Meta {
    feature_names: Vec<String>,
    sensitive_index: usize,
    schema_fingerprint: String,
    /// Code-to-text tables for categorical features, indexed by feature.
    categories: Vec<Option<Vec<String>>>,
}

/// Validated, immutable collection of samples.
///
/// Invariants: at least one sample, both sensitive groups present, uniform
/// feature arity, and `features[sensitive_index] == sensitive` for every
/// sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    meta: Arc<Meta>,
}

impl Dataset {
    pub fn new(
        samples: Vec<Sample>,
        feature_names: Vec<String>,
        sensitive_index: usize,
    ) -> Result<Self> {
        let mut hasher = Sha256::new();
        for name in &feature_names {
            hasher.update(name.as_bytes());
            hasher.update([0u8]);
        }
        hasher.update(sensitive_index.to_le_bytes());
        let fingerprint = hex(&hasher.finalize());
        let categories = vec![None; feature_names.len()];
        Self::from_parts(
            samples,
            Arc::new(Meta {
                feature_names,
                sensitive_index,
                schema_fingerprint: fingerprint,
                categories,
            }),
        )
    }

    fn from_parts(samples: Vec<Sample>, meta: Arc<Meta>) -> Result<Self> {
        if samples.is_empty() {
            return Err(FabError::EmptyDataset);
        }
        let arity = meta.feature_names.len();
        if meta.sensitive_index >= arity {
            return Err(FabError::InvalidDataset(format!(
                "sensitive index {} out of range for {arity} features",
                meta.sensitive_index
            )));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != arity {
                return Err(FabError::InvalidDataset(format!(
                    "sample {i} has {} features, expected {arity}",
                    s.features.len()
                )));
            }
            if s.features[meta.sensitive_index] != f64::from(s.sensitive) {
                return Err(FabError::InvalidDataset(format!(
                    "sample {i}: sensitive feature does not match its group"
                )));
            }
        }
        let favored = samples.iter().filter(|s| s.is_favored()).count();
        if favored == 0 || favored == samples.len() {
            return Err(FabError::InvalidDataset(
                "both sensitive groups must be non-empty".into(),
            ));
        }
        Ok(Dataset { samples, meta })
    }

    /// New dataset with the samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let samples = indices
            .iter()
            .map(|&i| {
                self.samples.get(i).cloned().ok_or_else(|| {
                    FabError::Contract(format!("subset index {i} out of range"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(samples, Arc::clone(&self.meta))
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.meta.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.meta.feature_names
    }

    pub fn sensitive_index(&self) -> usize {
        self.meta.sensitive_index
    }

    pub fn schema_fingerprint(&self) -> &str {
        &self.meta.schema_fingerprint
    }

    pub fn labels(&self) -> Vec<i8> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// `(count(S=0), count(S=1))`.
    pub fn group_counts(&self) -> (usize, usize) {
        let favored = self.samples.iter().filter(|s| s.is_favored()).count();
        (self.len() - favored, favored)
    }

    /// Number of samples in the `(group, label)` cell.
    pub fn cell_count(&self, sensitive: u8, label: i8) -> usize {
        self.samples
            .iter()
            .filter(|s| s.sensitive == sensitive && s.label == label)
            .count()
    }

    /// Text table for a categorical feature (code `k` is entry `k`).
    pub fn categories(&self, feature: usize) -> Option<&[String]> {
        self.meta.categories.get(feature)?.as_deref()
    }

    /// Inverse of the ordinal encoding.
    pub fn decode(&self, feature: usize, code: f64) -> Option<&str> {
        if code < 0.0 || code.fract() != 0.0 {
            return None;
        }
        self.categories(feature)?
            .get(code as usize)
            .map(String::as_str)
    }
}

/// Load a CSV file with a header row according to `schema`.
///
/// Every column except the label and `drop_columns` becomes a feature, in
/// header order. Categorical columns are encoded by first appearance among
/// retained rows; the sensitive column is encoded as its group (`1` for
/// `favored_value`). Only used columns are checked for empty cells.
pub fn load_csv(path: impl AsRef<Path>, schema: &DatasetSchema, on_missing: OnMissing) -> Result<Dataset> {
    let path = path.as_ref();
    schema.validate()?;
    let file = File::open(path).map_err(|e| FabError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();

    let position = |col: &str| header.iter().position(|h| h == col);
    let mut required = vec![&schema.label_column, &schema.sensitive_column];
    required.extend(schema.categorical_columns.iter());
    required.extend(schema.drop_columns.iter());
    for col in required {
        if position(col).is_none() {
            return Err(FabError::Schema(format!("column `{col}` not found in header")));
        }
    }
    let label_col = position(&schema.label_column).unwrap();
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&c| c != label_col && !schema.drop_columns.contains(&header[c]))
        .collect();
    let sensitive_index = feature_cols
        .iter()
        .position(|&c| header[c] == schema.sensitive_column)
        .unwrap();

    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let missing = feature_cols
            .iter()
            .chain(std::iter::once(&label_col))
            .find(|&&c| record.get(c).is_none_or(str::is_empty));
        match (missing, on_missing) {
            (None, _) => rows.push(record),
            (Some(_), OnMissing::DropRow) => {}
            (Some(&c), OnMissing::Error) => {
                return Err(FabError::MissingValue {
                    row: row_idx + 1,
                    column: header[c].clone(),
                })
            }
        }
    }
    if rows.is_empty() {
        return Err(FabError::EmptyDataset);
    }

    let sensitive_col = feature_cols[sensitive_index];
    let distinct: BTreeSet<&str> = rows.iter().map(|r| &r[sensitive_col]).collect();
    if distinct.len() > 2 {
        return Err(FabError::Cardinality {
            column: schema.sensitive_column.clone(),
            distinct: distinct.len(),
        });
    }
    let unfavored_value = distinct
        .iter()
        .find(|v| **v != schema.favored_value)
        .map(|v| v.to_string());

    // First-appearance ordinal codes per categorical feature.
    let mut categories: Vec<Option<Vec<String>>> = vec![None; feature_cols.len()];
    let mut codes: Vec<Option<HashMap<String, usize>>> = vec![None; feature_cols.len()];
    for (f, &c) in feature_cols.iter().enumerate() {
        if f == sensitive_index || !schema.categorical_columns.contains(&header[c]) {
            continue;
        }
        let mut table = Vec::new();
        let mut lookup = HashMap::new();
        for row in &rows {
            let v = &row[c];
            if !lookup.contains_key(v) {
                lookup.insert(v.to_owned(), table.len());
                table.push(v.to_owned());
            }
        }
        categories[f] = Some(table);
        codes[f] = Some(lookup);
    }
    if let Some(other) = &unfavored_value {
        categories[sensitive_index] = Some(vec![other.clone(), schema.favored_value.clone()]);
    }

    let mut samples = Vec::with_capacity(rows.len());
    for (row_idx, row) in rows.iter().enumerate() {
        let sensitive = u8::from(row[sensitive_col] == schema.favored_value);
        let label = if row[label_col] == schema.positive_label_value { 1 } else { -1 };
        let mut features = Vec::with_capacity(feature_cols.len());
        for (f, &c) in feature_cols.iter().enumerate() {
            let cell = &row[c];
            let value = if f == sensitive_index {
                f64::from(sensitive)
            } else if let Some(lookup) = &codes[f] {
                lookup[cell] as f64
            } else {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| FabError::Parse {
                        row: row_idx + 1,
                        column: header[c].clone(),
                        value: cell.to_owned(),
                    })?
            };
            features.push(value);
        }
        samples.push(Sample::new(features, label, sensitive)?);
    }

    let feature_names: Vec<String> = feature_cols.iter().map(|&c| header[c].clone()).collect();
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(schema)?);
    for name in &header {
        hasher.update(name.as_bytes());
        hasher.update([0u8]);
    }
    hasher.update(serde_json::to_vec(&categories)?);
    let meta = Meta {
        feature_names,
        sensitive_index,
        schema_fingerprint: hex(&hasher.finalize()),
        categories,
    };
    Dataset::from_parts(samples, Arc::new(meta))
}

/// Threshold used to turn a continuous score into `±1` labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    Median,
    Explicit(f64),
}

/// `+1` for values strictly above the threshold, `-1` otherwise.
pub fn binarize_continuous_label(raw: &[f64], rule: ThresholdRule) -> Result<Vec<i8>> {
    if raw.is_empty() {
        return Err(FabError::Contract("cannot binarize an empty vector".into()));
    }
    if raw.iter().any(|v| v.is_nan()) {
        return Err(FabError::Contract("NaN in continuous label".into()));
    }
    let threshold = match rule {
        ThresholdRule::Explicit(t) => t,
        ThresholdRule::Median => median(raw),
    };
    let labels: Vec<i8> = raw
        .iter()
        .map(|&v| if v > threshold { 1 } else { -1 })
        .collect();
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(FabError::DegenerateLabel(format!(
            "every value falls on one side of threshold {threshold}"
        )));
    }
    Ok(labels)
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

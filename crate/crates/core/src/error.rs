use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = FabError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FabError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("sensitive column `{column}` has {distinct} distinct values, expected at most 2")]
    Cardinality { column: String, distinct: usize },

    #[error("row {row}: missing value in column `{column}`")]
    MissingValue { row: usize, column: String },

    #[error("row {row}: cannot parse `{value}` in numeric column `{column}`")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("degenerate label: {0}")]
    DegenerateLabel(String),

    #[error("balancing infeasible: {0}")]
    BalanceInfeasible(String),

    #[error("resample needed: {0}")]
    ResampleNeeded(String),

    #[error("degenerate lambda range: {0}")]
    DegenerateRange(String),

    #[error("lambda {lambda} outside admissible range [0, {max}]")]
    LambdaOutOfRange { lambda: f64, max: f64 },

    #[error("undefined rate: {0}")]
    UndefinedRate(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl FabError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FabError::Io {
            path: path.into(),
            source,
        }
    }
}

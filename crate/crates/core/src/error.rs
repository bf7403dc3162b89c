use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: {reason}")]
    Parse { row: usize, reason: String },

    #[error("row {row}: dates are not contiguous, expected {expected} but found {found}")]
    NonContiguous {
        row: usize,
        expected: NaiveDate,
        found: NaiveDate,
    },

    #[error("row {row}: missing value in column `{column}`")]
    MissingValue { row: usize, column: String },

    #[error("row {row}: negative value {value} in column `{column}`")]
    NegativeValue { row: usize, column: String, value: f64 },

    #[error("temperature ordering violated: tmin {tmin} > tmax {tmax}")]
    TemperatureOrder { tmin: f64, tmax: f64 },

    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    #[error("invalid period: {0}")]
    InvalidPeriod(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("column mismatch: {0}")]
    ColumnMismatch(String),

    #[error("input is not standardized: column {column} has mean {mean:.3e} and variance {variance:.3e}")]
    NotStandardized { column: usize, mean: f64, variance: f64 },

    #[error("coordinate descent did not converge in {iterations} iterations (max change {max_change:.3e})")]
    Convergence {
        iterations: usize,
        max_change: f64,
        last_iterate: Vec<f64>,
    },

    #[error("training diverged at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("weight solver failed: {0}")]
    Solver(String),

    #[error("{learner} failed on {}: {source}", fold_label(*fold))]
    Learner {
        learner: String,
        /// `None` for the refit on the full training period.
        fold: Option<usize>,
        #[source]
        source: Box<Error>,
    },

    #[error("basin {basin}: stage `{stage}` failed: {source}")]
    Stage {
        basin: String,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by malformed input data rather than configuration.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Parse { .. }
            | Error::NonContiguous { .. }
            | Error::MissingValue { .. }
            | Error::NegativeValue { .. }
            | Error::TemperatureOrder { .. }
            | Error::InsufficientHistory(_)
            | Error::InvalidPeriod(_)
            | Error::Csv(_)
            | Error::Io { .. } => true,
            Error::Stage { source, .. } | Error::Learner { source, .. } => source.is_data_error(),
            _ => false,
        }
    }
}

fn fold_label(fold: Option<usize>) -> String {
    match fold {
        Some(f) => format!("fold {f}"),
        None => "the full training set".to_string(),
    }
}

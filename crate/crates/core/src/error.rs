use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the model, solvers, ingestion and reporting layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value at t = {t} ({context})")]
    NonFinite { t: f64, context: String },

    #[error("time {t} outside [{t0}, {tf}]")]
    OutOfRange { t: f64, t0: f64, tf: f64 },

    #[error("no value for {0}")]
    DateOutOfRange(String),

    #[error("trajectories do not share a time grid")]
    GridMismatch,

    #[error(
        "control at node {node} component {component} lies on its bound; probe must be interior"
    )]
    ProbeAtBound { node: usize, component: usize },

    #[error("division by zero: real value is 0")]
    DivisionByZero,

    #[error("empty input")]
    EmptyInput,

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("{count} malformed row(s): {}", summarize_rows(.rows))]
    MalformedRows {
        count: usize,
        rows: Vec<(usize, String)>,
    },

    #[error("missing day(s) in window: {}", .0.join(", "))]
    MissingDays(Vec<String>),

    #[error("duplicate record for {date} region {region}")]
    DuplicateRecord { date: String, region: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn summarize_rows(rows: &[(usize, String)]) -> String {
    let shown: Vec<String> = rows
        .iter()
        .take(5)
        .map(|(row, msg)| format!("row {row}: {msg}"))
        .collect();
    let mut out = shown.join("; ");
    if rows.len() > 5 {
        out.push_str(&format!("; ... ({} more)", rows.len() - 5));
    }
    out
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn non_finite(t: f64, context: impl Into<String>) -> Self {
        Error::NonFinite {
            t,
            context: context.into(),
        }
    }
}

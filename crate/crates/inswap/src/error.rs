//! Error type shared by every module.

use std::fmt;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// The individual requirements a two-well landscape has to meet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionBullet {
    /// Periodic, smooth, defined on a compact interval.
    PeriodicDomain,
    /// Exactly two local minima with the global one strictly lower.
    TwoMinima,
    /// Exactly one local maximum between the minima.
    SingleBarrier,
    /// V(x_L) = 0 and V(x_R) = h_L - h_R > 0.
    Normalization,
    /// The potential on the boundary exceeds h_L.
    BoundaryHeight,
}

impl fmt::Display for ConditionBullet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::PeriodicDomain => "periodic compact domain required",
            Self::TwoMinima => "two local minima required",
            Self::SingleBarrier => "exactly one interior barrier required",
            Self::Normalization => "V(x_L) = 0 < V(x_R) required",
            Self::BoundaryHeight => "boundary values must exceed h_L",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("ladder outside the simplex: {0}")]
    Ladder(String),

    #[error("degenerate critical point near x = {location}: {detail}")]
    Classification { location: f64, detail: String },

    #[error("two-well condition violated ({bullet}): {detail}")]
    Condition {
        bullet: ConditionBullet,
        detail: String,
    },

    #[error("capacity exceeded: {what} is {got}, limit {limit}")]
    Capacity {
        what: &'static str,
        got: usize,
        limit: usize,
    },

    #[error("structural error: {0}")]
    Structural(String),

    #[error("internal consistency failure: {0}")]
    Theory(String),

    #[error("step size too large: jump of {jump} at x = {x} exceeds half the period")]
    StepSize { x: f64, jump: f64 },

    #[error("quadrature did not converge: achieved relative error {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("schema version mismatch: expected {expected}, found {found}")]
    Schema { expected: u32, found: u32 },

    #[error("replicate {replicate} (seed {seed}) failed: {source}")]
    Replicate {
        seed: u64,
        replicate: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error on line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error("invalid configuration field `{field}`: {detail}")]
    Config { field: String, detail: String },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub fn config(field: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            detail: detail.into(),
        }
    }
}

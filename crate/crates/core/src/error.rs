use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not positive definite (minimum eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("restricted design is rank deficient (condition number estimate {condition:e})")]
    RankDeficient { condition: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("enumeration of C({p},{k}) = {count:e} supports exceeds guard {guard:e}; use rho_lower")]
    CombinatorialGuard {
        p: usize,
        k: usize,
        count: f64,
        guard: f64,
    },

    #[error("no admissible candidate: {0}")]
    NoCandidate(String),

    #[error("unknown {kind} '{value}' (valid: {valid})")]
    UnknownId {
        kind: &'static str,
        value: String,
        valid: String,
    },

    #[error("missing oracle baseline for {0}")]
    MissingBaseline(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed data in {path}: {message}")]
    Malformed { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable code persisted in the sweep store's `error` column.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NotPositiveDefinite { .. } => "not_pd",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::Singular(_) => "singular",
            Error::NonFinite(_) => "non_finite",
            Error::CombinatorialGuard { .. } => "combinatorial_guard",
            Error::NoCandidate(_) => "no_candidate",
            Error::UnknownId { .. } => "unknown_id",
            Error::MissingBaseline(_) => "missing_baseline",
            Error::Config(_) => "config",
            Error::Malformed { .. } => "malformed",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

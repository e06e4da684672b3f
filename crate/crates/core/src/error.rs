use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad class of a failure, used by front ends to pick exit codes and
/// HTTP statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad arguments or configuration supplied by the caller.
    Usage,
    /// The input data is malformed or does not fit the request.
    Data,
    /// The data is valid but the computation cannot proceed on it.
    Computation,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}, column {column}: {message}")]
    Ingest {
        row: usize,
        column: String,
        message: String,
    },

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("unknown region id `{0}`")]
    UnknownRegion(String),

    #[error("dataset is empty after applying filters")]
    EmptyAfterFilter,

    #[error("invalid filter on `{variable}`: lower bound {lo} exceeds upper bound {hi}")]
    InvalidFilter { variable: String, lo: f64, hi: f64 },

    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("need at least {needed} rows, got {actual}")]
    TooFewRows { needed: usize, actual: usize },

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal residual {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("degenerate projection: all scores equal {0}")]
    DegenerateProjection(f64),

    #[error("all eigenvalues are zero; the selected columns are constant")]
    ZeroVariance,

    #[error("empty sample set")]
    EmptySampleSet,

    #[error("empty histogram")]
    EmptyHistogram,

    #[error("requested {requested} sites but only {available} rows are available")]
    TooManySites { requested: usize, available: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            InvalidFilter { .. } | InvalidConfig(_) | InvalidMixture(_) | TooManySites { .. } => {
                ErrorClass::Usage
            }
            Ingest { .. }
            | Malformed(_)
            | UnknownVariable(_)
            | UnknownRegion(_)
            | EmptyAfterFilter
            | DimensionMismatch { .. }
            | Json(_) => ErrorClass::Data,
            TooFewRows { .. }
            | NoConvergence { .. }
            | DegenerateProjection(_)
            | ZeroVariance
            | EmptySampleSet
            | EmptyHistogram => ErrorClass::Computation,
        }
    }

    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            Ingest { .. } => "ingest_error",
            Malformed(_) => "malformed_input",
            UnknownVariable(_) => "unknown_variable",
            UnknownRegion(_) => "unknown_region",
            EmptyAfterFilter => "empty_after_filter",
            InvalidFilter { .. } => "invalid_filter",
            InvalidMixture(_) => "invalid_mixture",
            InvalidConfig(_) => "invalid_config",
            DimensionMismatch { .. } => "dimension_mismatch",
            TooFewRows { .. } => "too_few_rows",
            NoConvergence { .. } => "no_convergence",
            DegenerateProjection(_) => "degenerate_projection",
            ZeroVariance => "zero_variance",
            EmptySampleSet => "empty_sample_set",
            EmptyHistogram => "empty_histogram",
            TooManySites { .. } => "too_many_sites",
            Json(_) => "invalid_json",
        }
    }
}

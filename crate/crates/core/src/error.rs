use thiserror::Error;

/// Errors raised by the model, its solvers and the Monte Carlo oracle.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// The sharing cutoff falls below the Pareto support, i.e. `tau * m * Lambda^sigma < pi`.
    #[error("non-interior equilibrium: tau*m*Lambda^sigma = {lhs:.6e} < pi = {pi:.6e} (cutoff q0 = {q0:.6} < 1)")]
    NonInterior { lhs: f64, pi: f64, q0: f64, m: f64 },

    #[error("no convergence after {iterations} iterations (last iterate {last:.6e}, residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        last: f64,
        residual: f64,
    },

    #[error("maximum not bracketed on [{lo:.3e}, {hi:.3e}]")]
    BracketFailure { lo: f64, hi: f64 },

    #[error("degenerate simulated market: {0}")]
    Degenerate(String),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, value: f64, reason: &'static str) -> ModelError {
    ModelError::InvalidParameter { name, value, reason }
}

/// Errors from the calibration toolkit (tail fits and CSV ingestion).
#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },

    #[error("non-positive value {value} at position {index}")]
    NonPositive { index: usize, value: f64 },

    #[error("only {non_empty} non-empty rank bins (need at least 3); reduce n_bins or raise tail_cut")]
    InsufficientBins { non_empty: usize },

    #[error("invalid argument `{name}` = {value}: {reason}")]
    InvalidArgument {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("column `{column}` not found; available: {available:?}")]
    MissingColumn { column: String, available: Vec<String> },

    #[error("no usable rows in column `{column}` ({dropped} dropped, {malformed} malformed)")]
    NoUsableRows {
        column: String,
        dropped: usize,
        malformed: usize,
    },

    #[error(transparent)]
    Model(#[from] ModelError),
}

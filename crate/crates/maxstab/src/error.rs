//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong, from bad parameters to numeric collapse.
///
/// The CLI maps each variant class to a stable process exit code via
/// [`MaxstabError::exit_code`]: 2 for usage/parameter errors, 3 for data
/// errors, 4 for numeric failures, 5 for infeasible configurations.
#[derive(Debug, Error)]
pub enum MaxstabError {
    /// Dependence or distribution parameters outside their domain.
    #[error("invalid parameters: {reason}")]
    InvalidParams { reason: String },

    /// A requested operation is undefined for the given input.
    #[error("invalid input: {reason}")]
    InvalidInput { reason: String },

    /// The space-time lag is (0, 0) where a nondegenerate pair is required.
    #[error("degenerate lag: bivariate quantities need (h, u) != (0, 0)")]
    DegenerateLag,

    /// Covariance factorization failed even after jitter escalation.
    #[error("covariance matrix is not positive semidefinite (jitter exhausted at {max_jitter:e})")]
    CovarianceNotPsd { max_jitter: f64 },

    /// Exact simulation requested on a point set above the supported cap.
    #[error("point set of size {n} exceeds the exact-simulation cap {cap}")]
    PointSetTooLarge { n: usize, cap: usize },

    /// A marginal transform saturated in double precision.
    #[error("marginal transform saturated at location {location}, time {time}: value {value} maps to CDF {cdf}")]
    Saturated {
        location: usize,
        time: usize,
        value: f64,
        cdf: f64,
    },

    /// Input series unusable for marginal fitting.
    #[error("degenerate sample: {reason}")]
    DegenerateSample { reason: String },

    /// Observation cube has the wrong margin tag for this operation.
    #[error("margin mismatch: operation needs {expected} margins, cube is tagged {found}")]
    MarginMismatch {
        expected: &'static str,
        found: &'static str,
    },

    /// CSV lattice is not a complete grid.
    #[error("incomplete lattice: {n_missing} cell(s) missing, first {} shown: {}", shown.len(), shown.join("; "))]
    IncompleteLattice {
        n_missing: usize,
        shown: Vec<String>,
    },

    /// Malformed input data (CSV payload, metadata line, non-finite value).
    #[error("data error: {reason}")]
    Data { reason: String },

    /// Optimizer or solver failed to converge.
    #[error("no convergence: {reason}")]
    NoConvergence { reason: String },

    /// Too many subsampling blocks failed to produce an estimate.
    #[error("subsampling dropped {dropped} of {total} blocks (more than {limit_percent}%)")]
    TooManyDroppedBlocks {
        dropped: usize,
        total: usize,
        limit_percent: u8,
    },

    /// Configuration is structurally impossible (block exceeds window, ...).
    #[error("infeasible configuration: {reason}")]
    Infeasible { reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl MaxstabError {
    /// Process exit code class for the CLI.
    pub fn exit_code(&self) -> i32 {
        use MaxstabError::*;
        match self {
            InvalidParams { .. } | InvalidInput { .. } | DegenerateLag => 2,
            Io(_) | Csv(_) | Json(_) | Data { .. } | IncompleteLattice { .. }
            | MarginMismatch { .. } => 3,
            CovarianceNotPsd { .. } | Saturated { .. } | DegenerateSample { .. }
            | NoConvergence { .. } | TooManyDroppedBlocks { .. } => 4,
            PointSetTooLarge { .. } | Infeasible { .. } => 5,
        }
    }
}

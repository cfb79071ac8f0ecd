use thiserror::Error;

/// Errors raised across grid construction, assembly, solves and stepping.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operator tagged {tag} violates its symmetry: defect {defect:e} > {bound:e}")]
    SymmetryViolation {
        tag: &'static str,
        defect: f64,
        bound: f64,
    },

    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),

    #[error("splitting check failed: {0}")]
    SplittingCheck(String),

    #[error("{method} did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("{method} broke down after {iterations} iterations (relative residual {residual:e})")]
    Breakdown {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("power iteration did not converge in {iterations} iterations")]
    PowerIteration { iterations: usize },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Failures of an iterative numerical process, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. } | Error::Breakdown { .. } | Error::PowerIteration { .. }
        )
    }
}

pub type Result<V> = std::result::Result<V, Error>;

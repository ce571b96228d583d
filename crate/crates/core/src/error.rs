use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("overflow: intermediate magnitude {magnitude:e} is not representable")]
    Overflow { magnitude: f64 },

    #[error("matrix is singular to working precision (pivot {pivot:e})")]
    Singular { pivot: f64 },

    #[error("Lyapunov equation is not solvable: eigenvalue pair sums to ~0 (pivot {pivot:e})")]
    NotSolvable { pivot: f64 },

    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("resolvent evaluated too close to a pole (pivot {pivot:e})")]
    NearPole { pivot: f64 },

    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for failures caused by finite-precision arithmetic rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Overflow { .. }
                | Error::Singular { .. }
                | Error::NotSolvable { .. }
                | Error::NoConvergence { .. }
                | Error::NearPole { .. }
        )
    }
}

//! Dense real linear algebra for the small matrices of a triplet (P ≲ 64).

mod eigen;
mod expm;
mod lu;
mod lyapunov;
mod matrix;
mod resolvent;

use serde::{Deserialize, Serialize};

pub use eigen::{eigenvalues, Spectrum};
pub use expm::expm;
pub use lu::{balanced_hadamard_ratio, determinant, lu_factor, EquilibratedLu, LuFactors};
pub use lyapunov::{lyapunov_residual, lyapunov_solve};
pub use matrix::DenseMatrix;
pub use resolvent::complex_resolvent_apply;

/// Numerical thresholds shared by the factorizations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Relative residual accepted from solves.
    pub solve_relative: f64,
    /// Pivots below `pivot_relative · max|entry|` are treated as zero.
    pub pivot_relative: f64,
    /// Γ is flagged near-singular when `|det Γ|` falls below this fraction
    /// of the smaller of its row-norm and column-norm products.
    pub near_singular: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            solve_relative: 1e-12,
            pivot_relative: 1e-14,
            near_singular: 1e-8,
        }
    }
}

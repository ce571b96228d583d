use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::determinant;
use crate::realization::{build_triplet, BoundState, ScatteringSpec};
use crate::solution::{make_evaluator, n_soliton_gamma_direct};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolitonComparison {
    /// `max |det Γ_triplet − det Γ_direct| / (1 + |det Γ_direct|)`.
    pub max_deviation: f64,
    pub compared: usize,
    /// Points skipped because either determinant overflowed.
    pub flagged: usize,
}

/// Compares the triplet-route determinant with the Cauchy-matrix N-soliton
/// determinant on the tensor grid. The two matrices are transposes of one
/// another up to a diagonal similarity, so only determinants are compared.
pub fn soliton_equivalence(
    bound_states: &[BoundState],
    eta: f64,
    x_grid: &[f64],
    t_grid: &[f64],
) -> Result<SolitonComparison> {
    let spec = ScatteringSpec {
        eta,
        bound_states: bound_states.to_vec(),
        ..ScatteringSpec::default()
    };
    let ev = make_evaluator(&build_triplet(&spec)?)?;
    let mut out = SolitonComparison {
        max_deviation: 0.0,
        compared: 0,
        flagged: 0,
    };
    for &t in t_grid {
        for &x in x_grid {
            let direct = n_soliton_gamma_direct(bound_states, eta, x, t).and_then(|g| determinant(&g, ev.tolerances()));
            match (ev.det_gamma(x, t), direct) {
                (Ok(a), Ok(b)) if a.is_finite() && b.is_finite() => {
                    out.max_deviation = out.max_deviation.max((a - b).abs() / (1.0 + b.abs()));
                    out.compared += 1;
                }
                (Ok(_), Ok(_)) | (Err(Error::Overflow { .. }), _) | (_, Err(Error::Overflow { .. })) => {
                    out.flagged += 1
                }
                (Err(e), _) | (_, Err(e)) => return Err(e),
            }
        }
    }
    Ok(out)
}

//! Independent checks of an evaluated solution: the PDE residual, the
//! Marchenko equation, the Fourier form of the kernel Ω, positivity of
//! `det Γ`, and the N-soliton determinant.

mod marchenko;
mod positivity;
mod report;
mod residual;
mod soliton;

pub use marchenko::{
    marchenko_relative_residual, marchenko_residual, marchenko_scale, omega_quadrature_check, TAIL_CUTOFF,
};
pub use positivity::{positivity_scan, scan_nodes, PositivityWindow, CROSSING_TOL};
pub use report::{run_verification, CheckOutcome, CheckStatus, VerificationReport, VerifyConfig};
pub use residual::{
    centred_weights, pde_residual, pde_residual_of, FnField, ResidualConfig, ResidualGrid, ResidualLevel,
    ResidualReport, SampledField,
};
pub use soliton::{soliton_equivalence, SolitonComparison};

//! Explicit solutions of the half-line Korteweg-de Vries equation
//! `uₜ + ηuₓ − 6uuₓ + uₓₓₓ = 0` from matrix triplets `(A, B, C)`.
//!
//! A triplet is either given directly or realized from rational reflection
//! data and bound states ([`realization`]). [`solution`] evaluates
//! `Γ(x;t)`, its determinant and the potential in closed form, and
//! [`verification`] checks the result against the PDE, the Marchenko
//! equation and the N-soliton formula.

// Index loops mirror the matrix algorithms they implement; negated
// comparisons are deliberate so that NaN fails the test.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod dd;
pub mod error;
pub mod exec;
pub mod extended;
pub mod linalg;
pub mod quadrature;
pub mod realization;
pub mod solution;
pub mod verification;

pub use error::{Error, Result};
pub use exec::Execution;

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, expm, DenseMatrix, Tolerances};
use crate::quadrature::{integrate, integrate_decaying, integrate_oscillatory_tail, ABS_TOL};
use crate::realization::{eval_pi_r, Triplet};
use crate::solution::GammaEvaluator;

/// Integrand samples below this magnitude end the tail of the Marchenko integral.
pub const TAIL_CUTOFF: f64 = 1e-14;

/// `|K(x,y;t) + Ω(x+y;t) + ∫ₓ^∞ K(x,z;t)·Ω(y+z;t) dz|`.
///
/// `budget` caps the number of adaptive panels per unit of decay length.
/// Quadrature tolerances are relative to [`marchenko_scale`].
pub fn marchenko_residual(ev: &GammaEvaluator, x: f64, y: f64, t: f64, budget: usize) -> Result<f64> {
    marchenko_terms(ev, x, y, t, budget).map(|(r, _)| r)
}

/// The residual divided by [`marchenko_scale`], so that growing solitons
/// (`Ω ~ e^{8κ³t}`) are judged against the size of the equation's terms.
pub fn marchenko_relative_residual(ev: &GammaEvaluator, x: f64, y: f64, t: f64, budget: usize) -> Result<f64> {
    marchenko_terms(ev, x, y, t, budget).map(|(r, scale)| r / scale)
}

/// `1 + |K(x,y;t)| + |Ω(x+y;t)|`.
pub fn marchenko_scale(ev: &GammaEvaluator, x: f64, y: f64, t: f64) -> Result<f64> {
    Ok(1.0 + ev.marchenko_k(x, y, t)?.abs() + ev.marchenko_omega(x + y, t)?.abs())
}

fn marchenko_terms(ev: &GammaEvaluator, x: f64, y: f64, t: f64, budget: usize) -> Result<(f64, f64)> {
    if ev.is_formal() {
        return Err(Error::Unsupported(
            "Marchenko residual needs the spectrum of A in the open right half-plane".into(),
        ));
    }
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::validation("x", format!("must be finite and >= 0, got {x}")));
    }
    if !(y.is_finite() && y >= x) {
        return Err(Error::validation("y", format!("must satisfy y >= x, got x={x}, y={y}")));
    }
    let k = ev.marchenko_k(x, y, t)?;
    let omega = ev.marchenko_omega(x + y, t)?;
    let scale = 1.0 + k.abs() + omega.abs();
    let rate = 2.0 * ev.diagnostics().spectrum.min_real_part;
    let failure = RefCell::new(None);
    let integral = integrate_decaying(
        |z| match ev
            .marchenko_k(x, z, t)
            .and_then(|kz| Ok(kz * ev.marchenko_omega(y + z, t)?))
        {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        x,
        rate,
        TAIL_CUTOFF * scale,
        ABS_TOL * scale,
        budget,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(((k + omega + integral?.value).abs(), scale))
}

/// Compares `(1/2π)∫ ΠR(k)·e^{iky} dk` with the reflection part of
/// `C·e^{−yA}·B` at each `y` and returns the largest deviation.
///
/// Reality of the data gives `ΠR(−k) = conj ΠR(k)`, so the integral is
/// `(1/π)∫₀^∞ Re(ΠR(k)·e^{iky}) dk`. The integrand decays only like `1/k`;
/// past a cutover it is summed over half-periods `π/y` and extrapolated.
pub fn omega_quadrature_check(triplet: &Triplet, y_points: &[f64], tol: &Tolerances) -> Result<f64> {
    if triplet.reflection_dim().is_none() {
        return Err(Error::Unsupported(
            "the Fourier cross-check needs a triplet realized from scattering data".into(),
        ));
    }
    if let Some(i) = y_points.iter().position(|y| !(y.is_finite() && *y > 0.0)) {
        return Err(Error::validation(
            format!("yPoints[{i}]"),
            format!("must be > 0, got {}", y_points[i]),
        ));
    }
    let part = triplet.reflection_part();
    if part.dim() == 0 {
        return Ok(0.0);
    }
    let spectrum = eigenvalues(part.a())?;
    if spectrum.min_real_part <= 0.0 {
        return Err(Error::Unsupported("poles of ΠR on or below the real axis".into()));
    }
    let cutover = (8.0 * spectrum.radius()).max(20.0);
    let mut worst = 0.0f64;
    for &y in y_points {
        let failure = RefCell::new(None);
        let f = |k: f64| match eval_pi_r(triplet, Complex64::new(k, 0.0), tol) {
            Ok(pr) => (pr * Complex64::from_polar(1.0, k * y)).re / PI,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        };
        let head = integrate(f, 0.0, cutover, ABS_TOL, 4000);
        let tail = integrate_oscillatory_tail(f, cutover, PI / y, ABS_TOL, 60);
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        let quadrature = head?.value + tail?.value;
        let reference = reflection_omega(&part, y)?;
        worst = worst.max((quadrature - reference).abs());
    }
    Ok(worst)
}

/// `C·e^{−yA}·B` on the reflection block.
fn reflection_omega(part: &Triplet, y: f64) -> Result<f64> {
    DenseMatrix::chain(&[part.c(), &expm(part.a(), -y)?, part.b()])?.scalar()
}

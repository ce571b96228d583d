use num_complex::Complex64;

use super::{lu_factor, DenseMatrix, Tolerances};
use crate::error::{Error, Result};

/// `(k·I − i·A)⁻¹·B` for a single column `B`, solved over the real 2P embedding.
///
/// With `k = a + ib` and `x = xr + i·xi` the system splits into
/// `a·xr − (bI − A)·xi = B` and `(bI − A)·xr + a·xi = 0`.
pub fn complex_resolvent_apply(
    a: &DenseMatrix,
    k: Complex64,
    b: &DenseMatrix,
    tol: &Tolerances,
) -> Result<Vec<Complex64>> {
    a.require_square("resolvent operator")?;
    let p = a.rows();
    if b.rows() != p || b.cols() != 1 {
        return Err(Error::Dimension(format!(
            "resolvent input must be {p}x1, got {}x{}",
            b.rows(),
            b.cols()
        )));
    }
    if !(k.re.is_finite() && k.im.is_finite()) {
        return Err(Error::validation("k", "must be finite"));
    }
    if p == 0 {
        return Ok(Vec::new());
    }
    let mut e = DenseMatrix::zeros(2 * p, 2 * p);
    for i in 0..p {
        for j in 0..p {
            let shifted = if i == j { k.im } else { 0.0 } - a[(i, j)];
            e[(i, p + j)] = -shifted;
            e[(p + i, j)] = shifted;
        }
        e[(i, i)] = k.re;
        e[(p + i, p + i)] = k.re;
    }
    let mut rhs = DenseMatrix::zeros(2 * p, 1);
    for i in 0..p {
        rhs[(i, 0)] = b[(i, 0)];
    }
    let factors = lu_factor(&e, tol).map_err(|err| match err {
        Error::Singular { pivot } => Error::NearPole { pivot },
        other => other,
    })?;
    let x = factors.solve(&rhs)?;

    let residual = e.matmul(&x)?.sub(&rhs)?.max_abs();
    let scale = b.max_abs().max(f64::MIN_POSITIVE);
    let growth = e.norm_inf() * x.max_abs();
    if residual > tol.solve_relative * (scale + growth) {
        return Err(Error::NearPole { pivot: residual });
    }
    Ok((0..p).map(|i| Complex64::new(x[(i, 0)], x[(p + i, 0)])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_resolvent() {
        let a = DenseMatrix::from_diagonal(&[1.0]);
        let b = DenseMatrix::column(&[1.0]).unwrap();
        let x = complex_resolvent_apply(&a, Complex64::new(1.0, 0.0), &b, &Tolerances::default()).unwrap();
        assert!((x[0] - Complex64::new(0.5, 0.5)).norm() < 1e-16);
    }

    #[test]
    fn residual_against_complex_product() {
        let a = DenseMatrix::from_rows(&[[0.5, 1.0, 0.0], [-1.0, 0.5, -1.0], [0.0, 0.0, 2.0]]).unwrap();
        let b = DenseMatrix::column(&[0.3, -1.0, 1.0]).unwrap();
        let k = Complex64::new(0.7, -0.2);
        let x = complex_resolvent_apply(&a, k, &b, &Tolerances::default()).unwrap();
        for i in 0..3 {
            let mut acc = k * x[i];
            for j in 0..3 {
                acc -= Complex64::i() * a[(i, j)] * x[j];
            }
            assert!((acc - b[(i, 0)]).norm() < 1e-14);
        }
    }

    #[test]
    fn decays_like_inverse_k() {
        let a = DenseMatrix::from_diagonal(&[1.0, 2.0]);
        let b = DenseMatrix::column(&[1.0, 1.0]).unwrap();
        let tol = Tolerances::default();
        for &k in &[1e3, 1e5] {
            let x = complex_resolvent_apply(&a, Complex64::new(k, 0.0), &b, &tol).unwrap();
            assert!((x[0].norm() * k - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn pole_is_rejected() {
        // iA has eigenvalue i at k = i
        let a = DenseMatrix::from_diagonal(&[1.0]);
        let b = DenseMatrix::column(&[1.0]).unwrap();
        assert!(matches!(
            complex_resolvent_apply(&a, Complex64::new(0.0, 1.0), &b, &Tolerances::default()),
            Err(Error::NearPole { .. })
        ));
    }
}

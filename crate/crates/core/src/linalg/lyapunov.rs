use super::{lu_factor, DenseMatrix, Tolerances};
use crate::error::{Error, Result};

/// Solves `A·Q + Q·A = rhs` through the P²×P² Kronecker system.
///
/// The system is singular exactly when two eigenvalues of `A` sum to zero.
/// One step of iterative refinement is applied after the direct solve.
pub fn lyapunov_solve(a: &DenseMatrix, rhs: &DenseMatrix, tol: &Tolerances) -> Result<DenseMatrix> {
    a.require_square("Lyapunov coefficient")?;
    let p = a.rows();
    if rhs.rows() != p || rhs.cols() != p {
        return Err(Error::Dimension(format!(
            "Lyapunov right-hand side is {}x{}, expected {p}x{p}",
            rhs.rows(),
            rhs.cols()
        )));
    }
    if p == 0 {
        return Ok(DenseMatrix::zeros(0, 0));
    }

    let n = p * p;
    let mut kron = DenseMatrix::zeros(n, n);
    for i in 0..p {
        for j in 0..p {
            let row = i * p + j;
            for k in 0..p {
                kron[(row, k * p + j)] += a[(i, k)];
                kron[(row, i * p + k)] += a[(k, j)];
            }
        }
    }
    let factors = lu_factor(&kron, tol).map_err(|e| match e {
        Error::Singular { pivot } => Error::NotSolvable { pivot },
        other => other,
    })?;

    let vec_rhs = DenseMatrix::new(n, 1, rhs.as_slice().to_vec())?;
    let mut x = factors.solve(&vec_rhs)?;
    let residual = vec_rhs.sub(&kron.matmul(&x)?)?;
    x = x.add(&factors.solve(&residual)?)?;

    DenseMatrix::new(p, p, x.as_slice().to_vec()).map_err(|_| Error::Overflow {
        magnitude: f64::INFINITY,
    })
}

/// `‖A·Q + Q·A − rhs‖_∞`.
pub fn lyapunov_residual(a: &DenseMatrix, q: &DenseMatrix, rhs: &DenseMatrix) -> Result<f64> {
    Ok(a.matmul(q)?.add(&q.matmul(a)?)?.sub(rhs)?.norm_inf())
}

use super::{DenseMatrix, Tolerances};
use crate::error::{Error, Result};

/// Partial-pivoting LU factorization `P·M = L·U`, packed into one matrix
/// (unit lower triangle below the diagonal, upper triangle on and above).
#[derive(Debug, Clone)]
pub struct LuFactors {
    /// `permutation[i]` is the row of the input that ended up in row `i`.
    pub permutation: Vec<usize>,
    pub factors: DenseMatrix,
    /// Parity of the permutation, +1 or -1.
    pub sign: f64,
}

pub fn lu_factor(m: &DenseMatrix, tol: &Tolerances) -> Result<LuFactors> {
    m.require_square("LU input")?;
    let n = m.rows();
    let mut lu = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    let threshold = tol.pivot_relative * m.max_abs();

    for k in 0..n {
        let (p, pivot) = (k..n)
            .map(|i| (i, lu[(i, k)].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(pivot > threshold) || pivot == 0.0 {
            return Err(Error::Singular { pivot });
        }
        if p != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = tmp;
            }
            perm.swap(k, p);
            sign = -sign;
        }
        let d = lu[(k, k)];
        for i in k + 1..n {
            let l = lu[(i, k)] / d;
            lu[(i, k)] = l;
            if l != 0.0 {
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= l * u;
                }
            }
        }
    }
    let factors = lu.check_overflow()?;
    Ok(LuFactors {
        permutation: perm,
        factors,
        sign,
    })
}

impl LuFactors {
    pub fn dim(&self) -> usize {
        self.factors.rows()
    }

    pub fn determinant(&self) -> f64 {
        (0..self.dim()).fold(self.sign, |d, i| d * self.factors[(i, i)])
    }

    /// Solves `M·X = rhs` for every column of `rhs`.
    pub fn solve(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        let n = self.dim();
        if rhs.rows() != n {
            return Err(Error::Dimension(format!(
                "right-hand side has {} rows, system has {n}",
                rhs.rows()
            )));
        }
        let lu = &self.factors;
        let mut x = DenseMatrix::zeros(n, rhs.cols());
        for c in 0..rhs.cols() {
            let mut col: Vec<f64> = self.permutation.iter().map(|&p| rhs[(p, c)]).collect();
            for i in 0..n {
                let s: f64 = (0..i).map(|j| lu[(i, j)] * col[j]).sum();
                col[i] -= s;
            }
            for i in (0..n).rev() {
                let s: f64 = (i + 1..n).map(|j| lu[(i, j)] * col[j]).sum();
                col[i] = (col[i] - s) / lu[(i, i)];
            }
            for (i, v) in col.into_iter().enumerate() {
                x[(i, c)] = v;
            }
        }
        x.check_overflow()
    }

    /// Solves `X·M = rhs` for a row block `rhs`.
    pub fn solve_left(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        // X·M = R  <=>  Mᵀ·Xᵀ = Rᵀ, with Mᵀ = Uᵀ·Lᵀ·P
        let n = self.dim();
        if rhs.cols() != n {
            return Err(Error::Dimension(format!(
                "left-hand side has {} columns, system has {n}",
                rhs.cols()
            )));
        }
        let lu = &self.factors;
        let mut x = DenseMatrix::zeros(rhs.rows(), n);
        for r in 0..rhs.rows() {
            let mut z: Vec<f64> = (0..n).map(|j| rhs[(r, j)]).collect();
            for i in 0..n {
                let s: f64 = (0..i).map(|j| lu[(j, i)] * z[j]).sum();
                z[i] = (z[i] - s) / lu[(i, i)];
            }
            for i in (0..n).rev() {
                let s: f64 = (i + 1..n).map(|j| lu[(j, i)] * z[j]).sum();
                z[i] -= s;
            }
            for (i, &p) in self.permutation.iter().enumerate() {
                x[(r, p)] = z[i];
            }
        }
        x.check_overflow()
    }

    pub fn inverse(&self) -> Result<DenseMatrix> {
        self.solve(&DenseMatrix::identity(self.dim()))
    }
}

/// Power of two nearest the largest magnitude in `values`, or 1 for all zeros.
fn power_of_two_scale(values: impl Iterator<Item = f64>) -> f64 {
    let norm = values.map(f64::abs).fold(0.0, f64::max);
    if norm > 0.0 && norm.is_finite() {
        2f64.powi(norm.log2().round() as i32)
    } else {
        1.0
    }
}

/// `|det M|` against the Hadamard bound of `D₁·M·D₂`, where the diagonal
/// powers of two `D₁`, `D₂` come from alternating column and row max-norm
/// sweeps.
///
/// The ratio lies in `[0, 1]`: 1 for orthogonal rows, 0 for a singular
/// matrix. Unlike the raw Hadamard ratio it ignores the `e^{±κx}` stretching
/// that diagonal factors put on the rows and columns of Γ. Computed in log
/// space, so `det` may be huge or tiny.
pub fn balanced_hadamard_ratio(m: &DenseMatrix, det: f64) -> f64 {
    let n = m.rows();
    if n == 0 {
        return 1.0;
    }
    if det == 0.0 {
        return 0.0;
    }
    let mut a: Vec<f64> = m.as_slice().to_vec();
    let mut log_scale = 0.0;
    for _ in 0..8 {
        let mut changed = false;
        for j in 0..n {
            let c = power_of_two_scale((0..n).map(|i| a[i * n + j]));
            if c != 1.0 {
                changed = true;
                log_scale += c.log2();
                (0..n).for_each(|i| a[i * n + j] /= c);
            }
        }
        for i in 0..n {
            let r = power_of_two_scale(a[i * n..(i + 1) * n].iter().copied());
            if r != 1.0 {
                changed = true;
                log_scale += r.log2();
                a[i * n..(i + 1) * n].iter_mut().for_each(|v| *v /= r);
            }
        }
        if !changed {
            break;
        }
    }
    let log_norm = |v: &mut dyn Iterator<Item = f64>| 0.5 * v.map(|x| x * x).sum::<f64>().log2();
    let rows: f64 = (0..n).map(|i| log_norm(&mut (0..n).map(|j| a[i * n + j]))).sum();
    let cols: f64 = (0..n).map(|j| log_norm(&mut (0..n).map(|i| a[i * n + j]))).sum();
    (det.abs().log2() - log_scale - rows.min(cols)).exp2().min(1.0)
}

/// LU of `R⁻¹·M·C⁻¹`, with `R` and `C` diagonal powers of two that bring
/// every row and column to unit max-norm.
///
/// The scaling is exact in binary floating point. It keeps the relative
/// pivot threshold meaningful for matrices whose rows or columns differ by
/// many orders of magnitude, such as Γ(x;t) once `E(t)` has grown.
#[derive(Debug, Clone)]
pub struct EquilibratedLu {
    lu: LuFactors,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
}

impl EquilibratedLu {
    pub fn new(m: &DenseMatrix, tol: &Tolerances) -> Result<Self> {
        m.require_square("LU input")?;
        m.check_finite()?;
        let n = m.rows();
        let col_scale: Vec<f64> = (0..n).map(|j| power_of_two_scale((0..n).map(|i| m[(i, j)]))).collect();
        let row_scale: Vec<f64> = (0..n)
            .map(|i| power_of_two_scale((0..n).map(|j| m[(i, j)] / col_scale[j])))
            .collect();
        let data = (0..n * n)
            .map(|k| m[(k / n, k % n)] / col_scale[k % n] / row_scale[k / n])
            .collect();
        Ok(EquilibratedLu {
            lu: lu_factor(&DenseMatrix::new(n, n, data)?, tol)?,
            row_scale,
            col_scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.lu.dim()
    }

    pub fn determinant(&self) -> f64 {
        self.row_scale
            .iter()
            .zip(&self.col_scale)
            .fold(self.lu.determinant(), |d, (r, c)| d * r * c)
    }

    /// Solves `M·X = rhs`; a non-finite entry in the result is an overflow.
    pub fn solve(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        let n = self.dim();
        if rhs.rows() != n {
            return Err(Error::Dimension(format!(
                "right-hand side has {} rows, system has {n}",
                rhs.rows()
            )));
        }
        let c = rhs.cols();
        let scaled = DenseMatrix::new(
            n,
            c,
            (0..n * c)
                .map(|k| rhs[(k / c, k % c)] / self.row_scale[k / c])
                .collect(),
        );
        let y = self.lu.solve(&scaled.map_err(|_| Error::Overflow {
            magnitude: f64::INFINITY,
        })?)?;
        let data: Vec<f64> = (0..n * c).map(|k| y[(k / c, k % c)] / self.col_scale[k / c]).collect();
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Overflow { magnitude: v.abs() });
        }
        DenseMatrix::new(n, c, data)
    }
}

/// `det M` through an [`EquilibratedLu`]; zero when the factorization finds
/// a vanishing pivot.
pub fn determinant(m: &DenseMatrix, tol: &Tolerances) -> Result<f64> {
    m.require_square("determinant input")?;
    match EquilibratedLu::new(m, tol) {
        Ok(f) => Ok(f.determinant()),
        // An exactly singular matrix has determinant zero; only the
        // factorization is undefined.
        Err(Error::Singular { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

//! `u(x,t)` in double-double precision, for finite-difference verification.
//!
//! Mirrors the closed form of [`GammaEvaluator::u_closed_form`] with every
//! intermediate carried in [`Dd`]. The Lyapunov solution is lifted by
//! iterative refinement, so the only double-precision inputs are the
//! triplet entries themselves.

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::linalg::{balanced_hadamard_ratio, lyapunov_solve, DenseMatrix};
use crate::solution::GammaEvaluator;

#[derive(Debug, Clone, PartialEq)]
pub struct DdMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Dd>,
}

impl DdMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DdMatrix {
            rows,
            cols,
            data: vec![Dd::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Dd::ONE;
        }
        m
    }

    pub fn from_f64(m: &DenseMatrix) -> Self {
        DdMatrix {
            rows: m.rows(),
            cols: m.cols(),
            data: m.as_slice().iter().map(|&v| Dd::new(v)).collect(),
        }
    }

    pub fn to_f64(&self) -> Result<DenseMatrix> {
        let rows: Vec<Vec<f64>> = (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j).to_f64()).collect())
            .collect();
        DenseMatrix::from_rows(&rows)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Dd {
        self.data[i * self.cols + j]
    }

    fn set(&mut self, i: usize, j: usize, v: Dd) {
        self.data[i * self.cols + j] = v;
    }

    pub fn matmul(&self, o: &DdMatrix) -> DdMatrix {
        assert_eq!(self.cols, o.rows, "inner dimensions");
        let mut out = DdMatrix::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == Dd::ZERO {
                    continue;
                }
                for j in 0..o.cols {
                    let idx = i * o.cols + j;
                    out.data[idx] += a * o.get(k, j);
                }
            }
        }
        out
    }

    pub fn add(&self, o: &DdMatrix) -> DdMatrix {
        DdMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&o.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, o: &DdMatrix) -> DdMatrix {
        DdMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&o.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: Dd) -> DdMatrix {
        DdMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| a * s).collect(),
        }
    }

    fn ldexp(&self, k: i32) -> DdMatrix {
        DdMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| a.ldexp(k)).collect(),
        }
    }

    pub fn norm_1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j).hi().abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn scalar(&self) -> Dd {
        debug_assert_eq!((self.rows, self.cols), (1, 1));
        self.data[0]
    }
}

/// `exp(s·M)` by Taylor series on `s·M / 2^j` with `‖·‖₁ ≤ 1/4`, then squaring.
pub fn expm_dd(m: &DdMatrix, s: Dd) -> Result<DdMatrix> {
    let n = m.rows();
    let scaled = m.scale(s);
    let norm = scaled.norm_1();
    if !norm.is_finite() {
        return Err(Error::Overflow { magnitude: norm });
    }
    let j = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as i32
    } else {
        0
    };
    let x = scaled.ldexp(-j);
    let mut sum = DdMatrix::identity(n);
    let mut term = DdMatrix::identity(n);
    for k in 1..=40 {
        term = term.matmul(&x).scale(Dd::ONE / k as f64);
        sum = sum.add(&term);
        if term.norm_1() < 1e-35 {
            break;
        }
    }
    for _ in 0..j {
        sum = sum.matmul(&sum);
    }
    if sum.is_finite() {
        Ok(sum)
    } else {
        Err(Error::Overflow {
            magnitude: f64::INFINITY,
        })
    }
}

/// LU with partial pivoting of `M·D⁻¹`, `D` the power-of-two column norms.
struct DdLu {
    factors: DdMatrix,
    perm: Vec<usize>,
    col_scale: Vec<i32>,
    det: Dd,
}

impl DdLu {
    fn new(m: &DdMatrix) -> Result<DdLu> {
        let n = m.rows();
        let mut a = m.clone();
        let col_scale: Vec<i32> = (0..n)
            .map(|j| {
                let norm = (0..n).map(|i| m.get(i, j).hi().abs()).fold(0.0, f64::max);
                if norm > 0.0 {
                    norm.log2().round() as i32
                } else {
                    0
                }
            })
            .collect();
        for i in 0..n {
            for j in 0..n {
                a.set(i, j, m.get(i, j).ldexp(-col_scale[j]));
            }
        }
        let mut perm: Vec<usize> = (0..n).collect();
        let mut det = Dd::ONE;
        let scale = a.data.iter().map(|v| v.hi().abs()).fold(0.0, f64::max);
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a.get(i, k).hi().abs().total_cmp(&a.get(j, k).hi().abs()))
                .unwrap_or(k);
            let pivot = a.get(p, k);
            if !(pivot.hi().abs() > 1e-30 * scale) {
                return Err(Error::Singular {
                    pivot: pivot.hi().abs(),
                });
            }
            if p != k {
                for j in 0..n {
                    let tmp = a.get(k, j);
                    a.set(k, j, a.get(p, j));
                    a.set(p, j, tmp);
                }
                perm.swap(k, p);
                det = -det;
            }
            det *= pivot;
            for i in k + 1..n {
                let l = a.get(i, k) / pivot;
                a.set(i, k, l);
                for j in k + 1..n {
                    let v = a.get(i, j) - l * a.get(k, j);
                    a.set(i, j, v);
                }
            }
        }
        let det = det.ldexp(col_scale.iter().sum());
        Ok(DdLu {
            factors: a,
            perm,
            col_scale,
            det,
        })
    }

    fn solve(&self, rhs: &DdMatrix) -> DdMatrix {
        let n = self.factors.rows();
        let mut out = DdMatrix::zeros(n, rhs.cols());
        for c in 0..rhs.cols() {
            let mut y: Vec<Dd> = self.perm.iter().map(|&p| rhs.get(p, c)).collect();
            for i in 0..n {
                for k in 0..i {
                    y[i] = y[i] - self.factors.get(i, k) * y[k];
                }
            }
            for i in (0..n).rev() {
                for k in i + 1..n {
                    y[i] = y[i] - self.factors.get(i, k) * y[k];
                }
                y[i] = y[i] / self.factors.get(i, i);
            }
            for (i, v) in y.into_iter().enumerate() {
                out.set(i, c, v.ldexp(-self.col_scale[i]));
            }
        }
        out
    }
}

/// Double-double counterpart of a [`GammaEvaluator`].
#[derive(Debug, Clone)]
pub struct ExtendedEvaluator {
    a: DdMatrix,
    b: DdMatrix,
    c: DdMatrix,
    ab: DdMatrix,
    q: DdMatrix,
    generator: DdMatrix,
    near_singular: f64,
}

impl ExtendedEvaluator {
    pub fn new(ev: &GammaEvaluator) -> Result<Self> {
        let tr = ev.triplet();
        let a = DdMatrix::from_f64(tr.a());
        let b = DdMatrix::from_f64(tr.b());
        let c = DdMatrix::from_f64(tr.c());
        let bc = b.matmul(&c);
        let mut q = DdMatrix::from_f64(ev.q());
        for _ in 0..3 {
            let r = bc.sub(&a.matmul(&q).add(&q.matmul(&a)));
            if r.norm_1() == 0.0 {
                break;
            }
            let delta = lyapunov_solve(tr.a(), &r.to_f64()?, ev.tolerances())?;
            q = q.add(&DdMatrix::from_f64(&delta));
        }
        let a3 = a.matmul(&a).matmul(&a);
        let generator = a3.scale(Dd::new(8.0)).add(&a.scale(Dd::new(2.0 * tr.eta())));
        Ok(ExtendedEvaluator {
            ab: a.matmul(&b),
            a,
            b,
            c,
            q,
            generator,
            near_singular: ev.tolerances().near_singular,
        })
    }

    pub fn q(&self) -> &DdMatrix {
        &self.q
    }

    /// `e^{−xA}`.
    pub fn space_factor(&self, x: Dd) -> Result<DdMatrix> {
        expm_dd(&self.a, -x)
    }

    /// `E(t)`.
    pub fn time_factor(&self, t: Dd) -> Result<DdMatrix> {
        expm_dd(&self.generator, t)
    }

    /// `u` from precomputed `W = e^{−xA}` and `E(t)`.
    ///
    /// Near-singular Γ (by the same Hadamard test as the double-precision
    /// evaluator) is reported as [`Error::Singular`].
    pub fn u_from_factors(&self, w: &DdMatrix, e: &DdMatrix) -> Result<Dd> {
        let n = self.a.rows();
        let gamma = w.matmul(&self.q).matmul(w).matmul(e).add(&DdMatrix::identity(n));
        if !gamma.is_finite() {
            return Err(Error::Overflow {
                magnitude: f64::INFINITY,
            });
        }
        let lu = DdLu::new(&gamma)?;
        let det = lu.det.to_f64().abs();
        if balanced_hadamard_ratio(&gamma.to_f64()?, det) < self.near_singular {
            return Err(Error::Singular { pivot: det });
        }
        let row = self.c.matmul(e).matmul(w);
        let v = lu.solve(&w.matmul(&self.b));
        let v_a = lu.solve(&w.matmul(&self.ab));
        let f = row.matmul(&v).scalar();
        let first = row.matmul(&self.a).matmul(&v).scalar();
        let third = row.matmul(&v_a).scalar();
        let u = (f * f - first - third) * 2.0;
        if u.is_finite() {
            Ok(u)
        } else {
            Err(Error::Overflow {
                magnitude: f64::INFINITY,
            })
        }
    }

    pub fn u(&self, x: Dd, t: Dd) -> Result<Dd> {
        self.u_from_factors(&self.space_factor(x)?, &self.time_factor(t)?)
    }
}

impl GammaEvaluator {
    /// Double-double twin of this evaluator.
    pub fn extended(&self) -> Result<ExtendedEvaluator> {
        ExtendedEvaluator::new(self)
    }
}

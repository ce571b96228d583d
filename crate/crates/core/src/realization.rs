//! Assembly of the triplet `(A, B, C)` from rational reflection pole data
//! and bound states.
//!
//! Block layout of `A` (block-diagonal, in this order):
//!
//! * each complex pole pair `±α + iβ` of multiplicity `m` contributes a
//!   `2m×2m` upper block-bidiagonal block with `Λ = [[β, α], [−α, β]]` on the
//!   diagonal and `−I₂` above it;
//! * each imaginary pole `iω` of multiplicity `m` contributes an `m×m`
//!   Jordan-type block with `ω` on the diagonal and `−1` above it;
//! * each bound state contributes the `1×1` block `[κ]`.
//!
//! `B` has a single `1` at the last row of every block. For a pole of
//! multiplicity `m` the coefficients enter `C` highest order first.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complex_resolvent_apply, eigenvalues, DenseMatrix, Spectrum, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairCoefficient {
    pub eps: f64,
    pub gamma: f64,
}

/// Poles at `k = ±α + iβ`; `coeffs[s-1]` multiplies the order-`s` term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexPolePair {
    pub alpha: f64,
    pub beta: f64,
    pub coeffs: Vec<PairCoefficient>,
}

/// Pole at `k = iω`; `r[s-1]` multiplies the order-`s` term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImaginaryPole {
    pub omega: f64,
    pub r: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundState {
    pub kappa: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ScatteringSpec {
    #[serde(default)]
    pub eta: f64,
    #[serde(default)]
    pub complex_poles: Vec<ComplexPolePair>,
    #[serde(default, rename = "imagPoles")]
    pub imaginary_poles: Vec<ImaginaryPole>,
    #[serde(default)]
    pub bound_states: Vec<BoundState>,
}

fn positive(field: String, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be finite and > 0, got {v}")))
    }
}

fn finite(field: String, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be finite, got {v}")))
    }
}

impl ScatteringSpec {
    /// The matrix size `P = N + 2·Σ m(complex) + Σ m(imaginary)`.
    pub fn dimension(&self) -> usize {
        self.bound_states.len()
            + 2 * self.complex_poles.iter().map(|p| p.coeffs.len()).sum::<usize>()
            + self.imaginary_poles.iter().map(|p| p.r.len()).sum::<usize>()
    }

    pub fn reflection_dimension(&self) -> usize {
        self.dimension() - self.bound_states.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::validation(
                "eta",
                format!("must be finite and >= 0, got {}", self.eta),
            ));
        }
        for (j, pole) in self.complex_poles.iter().enumerate() {
            positive(format!("complexPoles[{j}].alpha"), pole.alpha)?;
            positive(format!("complexPoles[{j}].beta"), pole.beta)?;
            if pole.coeffs.is_empty() {
                return Err(Error::validation(
                    format!("complexPoles[{j}].coeffs"),
                    "multiplicity must be at least 1",
                ));
            }
            for (s, c) in pole.coeffs.iter().enumerate() {
                finite(format!("complexPoles[{j}].coeffs[{s}].eps"), c.eps)?;
                finite(format!("complexPoles[{j}].coeffs[{s}].gamma"), c.gamma)?;
            }
            for (i, other) in self.complex_poles[..j].iter().enumerate() {
                if other.alpha == pole.alpha && other.beta == pole.beta {
                    return Err(Error::validation(
                        format!("complexPoles[{j}]"),
                        format!("duplicates the pole pair of complexPoles[{i}]"),
                    ));
                }
            }
        }
        for (j, pole) in self.imaginary_poles.iter().enumerate() {
            positive(format!("imagPoles[{j}].omega"), pole.omega)?;
            if pole.r.is_empty() {
                return Err(Error::validation(
                    format!("imagPoles[{j}].r"),
                    "multiplicity must be at least 1",
                ));
            }
            for (s, &r) in pole.r.iter().enumerate() {
                finite(format!("imagPoles[{j}].r[{s}]"), r)?;
            }
            if j > 0 && self.imaginary_poles[j - 1].omega >= pole.omega {
                return Err(Error::validation(
                    format!("imagPoles[{j}].omega"),
                    "imaginary poles must be strictly increasing in omega",
                ));
            }
        }
        for (j, bs) in self.bound_states.iter().enumerate() {
            positive(format!("boundStates[{j}].kappa"), bs.kappa)?;
            positive(format!("boundStates[{j}].c"), bs.c)?;
            if j > 0 && self.bound_states[j - 1].kappa >= bs.kappa {
                return Err(Error::validation(
                    format!("boundStates[{j}].kappa"),
                    "bound states must be strictly increasing in kappa (distinct)",
                ));
            }
        }
        Ok(())
    }
}

/// Constant real matrices `A` (P×P), `B` (P×1), `C` (1×P) and the drift `η`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Triplet {
    a: DenseMatrix,
    b: DenseMatrix,
    c: DenseMatrix,
    eta: f64,
    /// Leading rows/columns that realize the reflection part, when the
    /// triplet was assembled from pole data.
    #[serde(skip)]
    reflection_dim: Option<usize>,
}

impl Triplet {
    pub fn new(a: DenseMatrix, b: DenseMatrix, c: DenseMatrix, eta: f64) -> Result<Self> {
        a.require_square("A")?;
        let p = a.rows();
        if b.rows() != p || b.cols() != 1 {
            return Err(Error::validation(
                "B",
                format!("must be {p}x1, got {}x{}", b.rows(), b.cols()),
            ));
        }
        if c.rows() != 1 || c.cols() != p {
            return Err(Error::validation(
                "C",
                format!("must be 1x{p}, got {}x{}", c.rows(), c.cols()),
            ));
        }
        for (name, m) in [("A", &a), ("B", &b), ("C", &c)] {
            m.check_finite().map_err(|e| Error::validation(name, e.to_string()))?;
        }
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::validation("eta", format!("must be finite and >= 0, got {eta}")));
        }
        Ok(Triplet {
            a,
            b,
            c,
            eta,
            reflection_dim: None,
        })
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn b(&self) -> &DenseMatrix {
        &self.b
    }

    pub fn c(&self) -> &DenseMatrix {
        &self.c
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    pub fn reflection_dim(&self) -> Option<usize> {
        self.reflection_dim
    }

    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        let mut t = Triplet::new(self.a.clone(), self.b.clone(), self.c.clone(), eta)?;
        t.reflection_dim = self.reflection_dim;
        Ok(t)
    }

    /// The sub-triplet realizing `ΠR`: the leading reflection blocks when
    /// known, otherwise the whole triplet.
    pub fn reflection_part(&self) -> Triplet {
        match self.reflection_dim {
            Some(r) if r < self.dim() => Triplet {
                a: self.a.submatrix(0, 0, r, r),
                b: self.b.submatrix(0, 0, r, 1),
                c: self.c.submatrix(0, 0, 1, r),
                eta: self.eta,
                reflection_dim: Some(r),
            },
            _ => self.clone(),
        }
    }
}

pub fn build_triplet(spec: &ScatteringSpec) -> Result<Triplet> {
    spec.validate()?;
    let p = spec.dimension();
    if p == 0 {
        return Err(Error::validation(
            "spec",
            "no poles and no bound states: nothing to build (P = 0)",
        ));
    }

    let mut pairs: Vec<&ComplexPolePair> = spec.complex_poles.iter().collect();
    pairs.sort_by(|x, y| x.beta.total_cmp(&y.beta).then(x.alpha.total_cmp(&y.alpha)));

    let mut blocks = Vec::new();
    let mut b = Vec::with_capacity(p);
    let mut c = Vec::with_capacity(p);

    for pair in pairs {
        let m = pair.coeffs.len();
        let mut block = DenseMatrix::zeros(2 * m, 2 * m);
        for i in 0..m {
            let o = 2 * i;
            block[(o, o)] = pair.beta;
            block[(o, o + 1)] = pair.alpha;
            block[(o + 1, o)] = -pair.alpha;
            block[(o + 1, o + 1)] = pair.beta;
            if i + 1 < m {
                block[(o, o + 2)] = -1.0;
                block[(o + 1, o + 3)] = -1.0;
            }
        }
        blocks.push(block);
        b.extend(std::iter::repeat_n(0.0, 2 * m - 1));
        b.push(1.0);
        for coeff in pair.coeffs.iter().rev() {
            c.push(2.0 * coeff.gamma);
            c.push(2.0 * coeff.eps);
        }
    }

    for pole in &spec.imaginary_poles {
        let m = pole.r.len();
        let mut block = DenseMatrix::zeros(m, m);
        for i in 0..m {
            block[(i, i)] = pole.omega;
            if i + 1 < m {
                block[(i, i + 1)] = -1.0;
            }
        }
        blocks.push(block);
        b.extend(std::iter::repeat_n(0.0, m - 1));
        b.push(1.0);
        c.extend(pole.r.iter().rev());
    }

    for bs in &spec.bound_states {
        blocks.push(DenseMatrix::from_diagonal(&[bs.kappa]));
        b.push(1.0);
        c.push(bs.c);
    }

    let mut triplet = Triplet::new(
        DenseMatrix::block_diagonal(&blocks),
        DenseMatrix::column(&b)?,
        DenseMatrix::row(&c)?,
        spec.eta,
    )?;
    triplet.reflection_dim = Some(spec.reflection_dimension());
    Ok(triplet)
}

/// `ΠR(k) = −i·C·(k − iA)⁻¹·B` over the reflection part of the triplet.
pub fn eval_pi_r(triplet: &Triplet, k: Complex64, tol: &Tolerances) -> Result<Complex64> {
    let part = triplet.reflection_part();
    if part.dim() == 0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let x = complex_resolvent_apply(&part.a, k, &part.b, tol)?;
    let s: Complex64 = x.iter().enumerate().map(|(j, v)| part.c[(0, j)] * v).sum();
    Ok(-Complex64::i() * s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TripletDiagnostics {
    pub spectrum: Spectrum,
    /// All eigenvalues of `A` have positive real part, so the Γ integral converges.
    pub convergent: bool,
    /// Index pairs `(i, j)` with `λᵢ + λⱼ ≈ 0`.
    pub resonant_pairs: Vec<(usize, usize)>,
    pub eigen_failure: Option<String>,
    pub valid: bool,
}

pub fn validate_triplet(t: &Triplet) -> TripletDiagnostics {
    let spectrum = match eigenvalues(&t.a) {
        Ok(s) => s,
        Err(e) => {
            return TripletDiagnostics {
                spectrum: Spectrum::new(Vec::new()),
                convergent: false,
                resonant_pairs: Vec::new(),
                eigen_failure: Some(e.to_string()),
                valid: false,
            }
        }
    };
    let scale = 1.0 + spectrum.radius();
    let ev = &spectrum.eigenvalues;
    let mut resonant_pairs = Vec::new();
    for i in 0..ev.len() {
        for j in i..ev.len() {
            if (ev[i] + ev[j]).norm() <= 1e-10 * scale {
                resonant_pairs.push((i, j));
            }
        }
    }
    let convergent = spectrum.min_real_part > 0.0;
    let valid = convergent && resonant_pairs.is_empty();
    TripletDiagnostics {
        spectrum,
        convergent,
        resonant_pairs,
        eigen_failure: None,
        valid,
    }
}

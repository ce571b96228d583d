//! Exact evaluation of `Γ(x;t)`, `det Γ`, the Marchenko kernel and its
//! solution, and the potential `u(x,t)`.
//!
//! The integral defining Γ is never quadratured. With `Q` the constant
//! solution of `A·Q + Q·A = B·C`,
//!
//! ```text
//! ∫ₓ^∞ e^{−zA} B C e^{−zA} dz = e^{−xA} Q e^{−xA},
//! Γ(x;t) = I + e^{−xA} Q e^{−xA} E(t),   E(t) = exp(t·(8A³ + 2ηA)).
//! ```
//!
//! Everything else reduces to matrix exponentials and LU solves.

use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::{
    balanced_hadamard_ratio, expm, lyapunov_residual, lyapunov_solve, DenseMatrix, EquilibratedLu, Tolerances,
};
use crate::realization::{validate_triplet, BoundState, Triplet, TripletDiagnostics};

const TIME_CACHE_CAPACITY: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionFlag {
    Ok,
    NearSingular,
    Overflow,
}

impl ConditionFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            ConditionFlag::Ok => "ok",
            ConditionFlag::NearSingular => "near-singular",
            ConditionFlag::Overflow => "overflow",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolutionSample {
    pub x: f64,
    pub t: f64,
    /// NaN unless `flag` is [`ConditionFlag::Ok`].
    pub u: f64,
    pub det_gamma: f64,
    pub flag: ConditionFlag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolutionGrid {
    pub x_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    /// `samples[it][ix]`, t-major.
    pub samples: Vec<Vec<SolutionSample>>,
}

impl SolutionGrid {
    pub fn iter(&self) -> impl Iterator<Item = &SolutionSample> {
        self.samples.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.x_grid.len() * self.t_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flagged_count(&self) -> usize {
        self.iter().filter(|s| s.flag != ConditionFlag::Ok).count()
    }
}

/// Quantities shared by every formula at one `(x, t)`.
struct PointState {
    /// e^{−xA}
    w: DenseMatrix,
    e: Arc<DenseMatrix>,
    lu: EquilibratedLu,
    det: f64,
    flag: ConditionFlag,
}

/// Precomputed data for exact evaluation of Γ(x;t) and everything derived from it.
///
/// Immutable after construction apart from an internal, lock-protected
/// cache of `E(t)`; results never depend on cache hits.
#[derive(Debug)]
pub struct GammaEvaluator {
    triplet: Triplet,
    q: DenseMatrix,
    ab: DenseMatrix,
    generator: DenseMatrix,
    diagnostics: TripletDiagnostics,
    tol: Tolerances,
    cache: Mutex<Vec<(u64, Arc<DenseMatrix>)>>,
}

impl Clone for GammaEvaluator {
    fn clone(&self) -> Self {
        GammaEvaluator {
            triplet: self.triplet.clone(),
            q: self.q.clone(),
            ab: self.ab.clone(),
            generator: self.generator.clone(),
            diagnostics: self.diagnostics.clone(),
            tol: self.tol,
            cache: Mutex::new(Vec::new()),
        }
    }
}

pub fn make_evaluator(triplet: &Triplet) -> Result<GammaEvaluator> {
    GammaEvaluator::new(triplet, Tolerances::default())
}

fn check_coordinate(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::validation(name, format!("must be finite and >= 0, got {v}")))
    }
}

impl GammaEvaluator {
    pub fn new(triplet: &Triplet, tol: Tolerances) -> Result<Self> {
        let diagnostics = validate_triplet(triplet);
        let a = triplet.a();
        let bc = triplet.b().matmul(triplet.c())?;
        let q = lyapunov_solve(a, &bc, &tol)?;
        let a2 = a.matmul(a)?;
        let a3 = a2.matmul(a)?;
        let generator = a3.scale(8.0).add(&a.scale(2.0 * triplet.eta()))?.check_overflow()?;
        Ok(GammaEvaluator {
            triplet: triplet.clone(),
            q,
            ab: a.matmul(triplet.b())?,
            generator,
            diagnostics,
            tol,
            cache: Mutex::new(Vec::new()),
        })
    }

    pub fn triplet(&self) -> &Triplet {
        &self.triplet
    }

    pub fn q(&self) -> &DenseMatrix {
        &self.q
    }

    pub fn diagnostics(&self) -> &TripletDiagnostics {
        &self.diagnostics
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    /// True when the spectrum of `A` is not in the open right half-plane:
    /// the closed forms still hold formally but the Γ integral diverges.
    pub fn is_formal(&self) -> bool {
        !self.diagnostics.convergent
    }

    pub fn dim(&self) -> usize {
        self.triplet.dim()
    }

    pub fn lyapunov_residual(&self) -> Result<f64> {
        let bc = self.triplet.b().matmul(self.triplet.c())?;
        lyapunov_residual(self.triplet.a(), &self.q, &bc)
    }

    /// `E(t) = exp(t·(8A³ + 2ηA))`.
    pub fn time_factor(&self, t: f64) -> Result<Arc<DenseMatrix>> {
        check_coordinate("t", t)?;
        let key = t.to_bits();
        if let Some((_, e)) = self.cache.lock().unwrap().iter().find(|(k, _)| *k == key) {
            return Ok(Arc::clone(e));
        }
        let e = Arc::new(expm(&self.generator, t)?);
        let mut cache = self.cache.lock().unwrap();
        if cache.len() >= TIME_CACHE_CAPACITY {
            cache.remove(0);
        }
        cache.push((key, Arc::clone(&e)));
        Ok(e)
    }

    fn space_factor(&self, x: f64) -> Result<DenseMatrix> {
        check_coordinate("x", x)?;
        expm(self.triplet.a(), -x)
    }

    fn gamma_parts(&self, x: f64, t: f64) -> Result<(DenseMatrix, Arc<DenseMatrix>, DenseMatrix)> {
        let w = self.space_factor(x)?;
        let e = self.time_factor(t)?;
        let p = self.dim();
        let gamma = DenseMatrix::chain(&[&w, &self.q, &w, &e])?
            .add(&DenseMatrix::identity(p))?
            .check_overflow()?;
        Ok((w, e, gamma))
    }

    /// `Γ(x;t)`.
    pub fn gamma(&self, x: f64, t: f64) -> Result<DenseMatrix> {
        Ok(self.gamma_parts(x, t)?.2)
    }

    /// `∂Γ/∂x = −e^{−xA}·B·C·e^{−xA}·E(t)`.
    pub fn gamma_x(&self, x: f64, t: f64) -> Result<DenseMatrix> {
        let w = self.space_factor(x)?;
        let e = self.time_factor(t)?;
        DenseMatrix::chain(&[&w, self.triplet.b(), self.triplet.c(), &w, &e])?
            .scale(-1.0)
            .check_overflow()
    }

    pub fn det_gamma(&self, x: f64, t: f64) -> Result<f64> {
        let g = self.gamma(x, t)?;
        let det = match EquilibratedLu::new(&g, &self.tol) {
            Ok(lu) => lu.determinant(),
            Err(Error::Singular { .. }) => 0.0,
            Err(e) => return Err(e),
        };
        if det.is_finite() {
            Ok(det)
        } else {
            Err(Error::Overflow { magnitude: det.abs() })
        }
    }

    fn point(&self, x: f64, t: f64) -> Result<PointState> {
        let (w, e, gamma) = self.gamma_parts(x, t)?;
        let lu = EquilibratedLu::new(&gamma, &self.tol)?;
        let det = lu.determinant();
        if !det.is_finite() {
            return Err(Error::Overflow { magnitude: det.abs() });
        }
        // Hadamard ratio after diagonal balancing: W and E(t) stretch rows
        // and columns by e^{±κx} and e^{8κ³t} without making Γ ill-posed
        let flag = if balanced_hadamard_ratio(&gamma, det) < self.tol.near_singular {
            ConditionFlag::NearSingular
        } else {
            ConditionFlag::Ok
        };
        Ok(PointState { w, e, lu, det, flag })
    }

    fn sample_with(&self, x: f64, t: f64, formula: impl FnOnce(&PointState) -> Result<f64>) -> Result<SolutionSample> {
        check_coordinate("x", x)?;
        check_coordinate("t", t)?;
        let flagged = |flag, det| SolutionSample {
            x,
            t,
            u: f64::NAN,
            det_gamma: det,
            flag,
        };
        let st = match self.point(x, t) {
            Ok(st) => st,
            Err(Error::Overflow { .. }) => return Ok(flagged(ConditionFlag::Overflow, f64::NAN)),
            Err(Error::Singular { .. }) => return Ok(flagged(ConditionFlag::NearSingular, 0.0)),
            Err(e) => return Err(e),
        };
        if st.flag != ConditionFlag::Ok {
            return Ok(flagged(st.flag, st.det));
        }
        match formula(&st) {
            Ok(u) if u.is_finite() => Ok(SolutionSample {
                x,
                t,
                u,
                det_gamma: st.det,
                flag: ConditionFlag::Ok,
            }),
            Ok(_) | Err(Error::Overflow { .. }) => Ok(flagged(ConditionFlag::Overflow, st.det)),
            Err(Error::Singular { .. }) => Ok(flagged(ConditionFlag::NearSingular, st.det)),
            Err(e) => Err(e),
        }
    }

    /// `u = 2·∂ₓ[C·E·e^{−xA}·Γ⁻¹·e^{−xA}·B]` with the derivative taken analytically:
    ///
    /// ```text
    /// u = 2·[ −C E W A Γ⁻¹ W B + (C E W Γ⁻¹ W B)² − C E W Γ⁻¹ W A B ],  W = e^{−xA}
    /// ```
    pub fn u_closed_form(&self, x: f64, t: f64) -> Result<SolutionSample> {
        self.sample_with(x, t, |st| {
            let (a, b, c) = (self.triplet.a(), self.triplet.b(), self.triplet.c());
            let row = DenseMatrix::chain(&[c, &st.e, &st.w])?;
            let v = st.lu.solve(&st.w.matmul(b)?)?;
            let v_a = st.lu.solve(&st.w.matmul(&self.ab)?)?;
            let f = row.matmul(&v)?.scalar()?;
            let first = row.matmul(a)?.matmul(&v)?.scalar()?;
            let third = row.matmul(&v_a)?.scalar()?;
            Ok(2.0 * (-first + f * f - third))
        })
    }

    /// `u = −2·∂ₓ tr(Γ⁻¹Γₓ) = −2·tr(−(Γ⁻¹Γₓ)² + Γ⁻¹Γₓₓ)`.
    pub fn u_log_det(&self, x: f64, t: f64) -> Result<SolutionSample> {
        self.sample_with(x, t, |st| {
            let (a, b, c) = (self.triplet.a(), self.triplet.b(), self.triplet.c());
            let kernel = DenseMatrix::chain(&[&st.w, b, c, &st.w])?;
            let gamma_x = kernel.matmul(&st.e)?.scale(-1.0);
            let gamma_xx = a.matmul(&kernel)?.add(&kernel.matmul(a)?)?.matmul(&st.e)?;
            let m1 = st.lu.solve(&gamma_x)?;
            let m2 = st.lu.solve(&gamma_xx)?;
            let d2 = -m1.matmul(&m1)?.trace() + m2.trace();
            Ok(-2.0 * d2)
        })
    }

    /// `Ω(y;t) = C·E(t)·e^{−yA}·B`.
    pub fn marchenko_omega(&self, y: f64, t: f64) -> Result<f64> {
        if !y.is_finite() {
            return Err(Error::validation("y", "must be finite"));
        }
        let e = self.time_factor(t)?;
        let wy = expm(self.triplet.a(), -y)?;
        let v = DenseMatrix::chain(&[self.triplet.c(), &e, &wy, self.triplet.b()])?.scalar()?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Overflow { magnitude: v.abs() })
        }
    }

    /// `K(x,y;t) = −C·E(t)·e^{−xA}·Γ(x;t)⁻¹·e^{−yA}·B`, for `y ≥ x ≥ 0`.
    pub fn marchenko_k(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        if !(y.is_finite() && y >= x) {
            return Err(Error::validation("y", format!("must satisfy y >= x, got x={x}, y={y}")));
        }
        let st = self.point(x, t)?;
        if st.flag != ConditionFlag::Ok {
            return Err(Error::Singular { pivot: st.det.abs() });
        }
        let wy = expm(self.triplet.a(), -y)?;
        let row = DenseMatrix::chain(&[self.triplet.c(), &st.e, &st.w])?;
        let v = st.lu.solve(&wy.matmul(self.triplet.b())?)?;
        let k = -row.matmul(&v)?.scalar()?;
        if k.is_finite() {
            Ok(k)
        } else {
            Err(Error::Overflow { magnitude: k.abs() })
        }
    }

    /// Evaluates `u` (closed form) on the tensor grid, t-major.
    pub fn sample_grid(&self, x_grid: &[f64], t_grid: &[f64], exec: Execution) -> Result<SolutionGrid> {
        for (name, g) in [("xGrid", x_grid), ("tGrid", t_grid)] {
            if let Some(i) = g.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::validation(format!("{name}[{i}]"), "must be finite and >= 0"));
            }
            if g.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::validation(name, "must be sorted ascending"));
            }
        }
        let nx = x_grid.len();
        // warm the E(t) cache once per row before fanning out
        for &t in t_grid {
            let _ = self.time_factor(t);
        }
        let flat = exec.map(nx * t_grid.len(), |idx| {
            self.u_closed_form(x_grid[idx % nx], t_grid[idx / nx])
        });
        let flat: Vec<SolutionSample> = flat.into_iter().collect::<Result<_>>()?;
        let samples = if nx == 0 {
            vec![Vec::new(); t_grid.len()]
        } else {
            flat.chunks(nx).map(<[SolutionSample]>::to_vec).collect()
        };
        Ok(SolutionGrid {
            x_grid: x_grid.to_vec(),
            t_grid: t_grid.to_vec(),
            samples,
        })
    }
}

pub(crate) fn validate_bound_states(bound_states: &[BoundState]) -> Result<()> {
    for (j, bs) in bound_states.iter().enumerate() {
        if !(bs.kappa.is_finite() && bs.kappa > 0.0) {
            return Err(Error::validation(format!("boundStates[{j}].kappa"), "must be > 0"));
        }
        if !(bs.c.is_finite() && bs.c > 0.0) {
            return Err(Error::validation(format!("boundStates[{j}].c"), "must be > 0"));
        }
        if bound_states[..j].iter().any(|o| o.kappa == bs.kappa) {
            return Err(Error::validation(
                format!("boundStates[{j}].kappa"),
                "kappa values must be distinct",
            ));
        }
    }
    Ok(())
}

/// The Cauchy-type N-soliton matrix
/// `Γ_jl = δ_jl + c_j·e^{−2κ_j x + 8κ_j³ t + 2ηκ_j t}/(κ_j + κ_l)`, built entrywise.
pub fn n_soliton_gamma_direct(bound_states: &[BoundState], eta: f64, x: f64, t: f64) -> Result<DenseMatrix> {
    validate_bound_states(bound_states)?;
    check_coordinate("x", x)?;
    check_coordinate("t", t)?;
    let n = bound_states.len();
    let mut g = DenseMatrix::identity(n);
    for (j, bj) in bound_states.iter().enumerate() {
        let k = bj.kappa;
        let weight = bj.c * (-2.0 * k * x + 8.0 * k.powi(3) * t + 2.0 * eta * k * t).exp();
        for (l, bl) in bound_states.iter().enumerate() {
            g[(j, l)] += weight / (k + bl.kappa);
        }
    }
    g.check_overflow()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::realization::{build_triplet, ScatteringSpec};

    const S3: f64 = 1.7320508075688772;

    fn soliton(kappa: f64, c: f64, eta: f64) -> GammaEvaluator {
        let spec = ScatteringSpec {
            eta,
            bound_states: vec![BoundState { kappa, c }],
            ..Default::default()
        };
        make_evaluator(&build_triplet(&spec).unwrap()).unwrap()
    }

    fn paper_triplet(eps: f64, gamma: f64, eta: f64) -> Triplet {
        Triplet::new(
            DenseMatrix::from_rows(&[[0.5, -S3 / 2.0], [S3 / 2.0, 0.5]]).unwrap(),
            DenseMatrix::column(&[0.0, 1.0]).unwrap(),
            DenseMatrix::row(&[2.0 * gamma, 2.0 * eps]).unwrap(),
            eta,
        )
        .unwrap()
    }

    #[test]
    fn zero_c_gives_identity_and_zero_u() {
        let t = Triplet::new(
            DenseMatrix::from_rows(&[[1.0, 0.3], [0.0, 2.0]]).unwrap(),
            DenseMatrix::column(&[1.0, 1.0]).unwrap(),
            DenseMatrix::row(&[0.0, 0.0]).unwrap(),
            1.0,
        )
        .unwrap();
        let ev = make_evaluator(&t).unwrap();
        assert_eq!(ev.q().max_abs(), 0.0);
        for &(x, t) in &[(0.0, 0.0), (1.0, 0.5), (3.0, 2.0)] {
            assert_eq!(ev.gamma(x, t).unwrap(), DenseMatrix::identity(2));
            assert_eq!(ev.det_gamma(x, t).unwrap(), 1.0);
            assert_eq!(ev.u_closed_form(x, t).unwrap().u, 0.0);
            assert_eq!(ev.u_log_det(x, t).unwrap().u, 0.0);
            assert_eq!(ev.marchenko_k(x, x + 1.0, t).unwrap(), 0.0);
        }
    }

    #[test]
    fn diagonal_q_is_cauchy() {
        let spec = ScatteringSpec {
            bound_states: vec![BoundState { kappa: 0.5, c: 1.0 }, BoundState { kappa: 1.5, c: 2.5 }],
            ..Default::default()
        };
        let ev = make_evaluator(&build_triplet(&spec).unwrap()).unwrap();
        let kappa = [0.5, 1.5];
        let c = [1.0, 2.5];
        for j in 0..2 {
            for l in 0..2 {
                let expected = c[l] / (kappa[j] + kappa[l]);
                assert!((ev.q()[(j, l)] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn one_soliton_gamma_and_peak() {
        let ev = soliton(1.0, 2.0, 0.0);
        for &(x, t) in &[(0.0, 0.0), (0.3, 0.1), (2.0, 0.25)] {
            let g = ev.gamma(x, t).unwrap().scalar().unwrap();
            let expected = 1.0 + (-2.0 * x + 8.0 * t).exp();
            assert!((g - expected).abs() < 1e-14 * expected);
        }
        for &t in &[0.0, 0.1, 0.5] {
            let s = ev.u_closed_form(4.0 * t, t).unwrap();
            assert_eq!(s.flag, ConditionFlag::Ok);
            assert!((s.u + 2.0).abs() < 1e-12, "u = {}", s.u);
        }
        let k = ev.marchenko_k(0.4, 1.1, 0.0).unwrap();
        let expected = -2.0 * (-0.4f64 - 1.1).exp() / (1.0 + (-0.8f64).exp());
        assert!((k - expected).abs() < 1e-15);
    }

    #[test]
    fn paper_example_determinant_at_origin() {
        let ev = make_evaluator(&paper_triplet(0.5, 0.5, 1.0)).unwrap();
        let expected = 1.0 - 0.375 + 0.5 * (0.5 + S3 / 2.0);
        assert!((ev.det_gamma(0.0, 0.0).unwrap() - expected).abs() < 1e-14);
        let far = ev.gamma(50.0, 0.0).unwrap().sub(&DenseMatrix::identity(2)).unwrap();
        assert!(far.max_abs() < 1e-20);
    }

    #[test]
    fn omega_closed_forms() {
        let (eps, gamma) = (0.3, 0.8);
        let ev = make_evaluator(&paper_triplet(eps, gamma, 0.0)).unwrap();
        assert!((ev.marchenko_omega(0.0, 0.0).unwrap() - 2.0 * eps).abs() < 1e-15);
        for &y in &[0.4, 1.7] {
            let a = S3 * y / 2.0;
            let expected = 2.0 * (-y / 2.0f64).exp() * (gamma * a.sin() + eps * a.cos());
            assert!((ev.marchenko_omega(y, 0.0).unwrap() - expected).abs() < 1e-15);
        }
        assert!(ev.marchenko_omega(80.0, 0.0).unwrap().abs() < 1e-15);

        let ev = soliton(1.3, 0.7, 2.0);
        let (y, t) = (0.9, 0.2);
        let k = 1.3f64;
        let expected = 0.7 * (8.0 * k.powi(3) * t + 2.0 * 2.0 * k * t - k * y).exp();
        assert!((ev.marchenko_omega(y, t).unwrap() / expected - 1.0).abs() < 1e-13);
    }

    #[test]
    fn direct_soliton_matrix() {
        let g = n_soliton_gamma_direct(&[BoundState { kappa: 1.0, c: 2.0 }], 0.0, 0.0, 0.0).unwrap();
        assert_eq!(g.to_rows(), vec![vec![2.0]]);
        let tiny = n_soliton_gamma_direct(
            &[
                BoundState { kappa: 1.0, c: 1e-300 },
                BoundState { kappa: 2.0, c: 1e-300 },
            ],
            0.0,
            0.0,
            0.0,
        )
        .unwrap();
        assert!(tiny.sub(&DenseMatrix::identity(2)).unwrap().max_abs() < 1e-299);
        assert!(n_soliton_gamma_direct(
            &[BoundState { kappa: 1.0, c: 2.0 }, BoundState { kappa: 1.0, c: 1.0 }],
            0.0,
            0.0,
            0.0
        )
        .is_err());
    }

    #[test]
    fn negative_x_is_rejected() {
        let ev = soliton(1.0, 2.0, 0.0);
        assert!(matches!(ev.u_closed_form(-0.1, 0.0), Err(Error::Validation { .. })));
        assert!(ev.gamma(-1.0, 0.0).is_err());
    }

    #[test]
    fn overflow_is_flagged_not_propagated() {
        let ev = soliton(2.0, 3.0, 0.0);
        let s = ev.u_closed_form(0.0, 20.0).unwrap();
        assert_eq!(s.flag, ConditionFlag::Overflow);
        assert!(s.u.is_nan());
    }

    #[test]
    fn grid_plumbing() {
        let ev = soliton(1.0, 2.0, 0.0);
        let g = ev.sample_grid(&[], &[], Execution::Parallel).unwrap();
        assert!(g.is_empty());
        let g = ev
            .sample_grid(&[0.0, 1.0, 2.0], &[0.0, 0.5], Execution::Parallel)
            .unwrap();
        assert_eq!(g.samples.len(), 2);
        assert_eq!(g.samples[1][2].x, 2.0);
        assert_eq!(g.samples[1][2].t, 0.5);
        assert!(ev.sample_grid(&[1.0, 0.0], &[0.0], Execution::Sequential).is_err());

        let formal = Triplet::new(
            DenseMatrix::from_diagonal(&[-0.5]),
            DenseMatrix::column(&[1.0]).unwrap(),
            DenseMatrix::row(&[0.3]).unwrap(),
            0.0,
        )
        .unwrap();
        let ev = make_evaluator(&formal).unwrap();
        assert!(ev.is_formal());
        let g = ev.sample_grid(&[0.0, 0.5], &[0.0], Execution::Sequential).unwrap();
        assert_eq!(g.len(), 2);
    }
}

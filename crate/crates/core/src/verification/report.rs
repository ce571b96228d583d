use serde::{Deserialize, Serialize};

use super::{
    marchenko_relative_residual, omega_quadrature_check, pde_residual, positivity_scan, soliton_equivalence,
    PositivityWindow, ResidualConfig, ResidualGrid, ResidualReport,
};
use crate::error::Result;
use crate::exec::Execution;
use crate::realization::ScatteringSpec;
use crate::solution::GammaEvaluator;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct VerifyConfig {
    pub x_window: (f64, f64),
    pub t_window: (f64, f64),
    pub residual: ResidualConfig,
    pub residual_tol: f64,
    pub marchenko_points: usize,
    /// Marchenko samples are drawn from `[0, box]³`.
    pub marchenko_box: f64,
    pub marchenko_budget: usize,
    pub marchenko_tol: f64,
    pub omega_y_points: Vec<f64>,
    pub omega_tol: f64,
    pub x_horizon: f64,
    pub t_horizon: f64,
    pub scan_density: f64,
    pub soliton_tol: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            x_window: (0.0, 10.0),
            t_window: (0.0, 2.0),
            residual: ResidualConfig::default(),
            residual_tol: 1e-5,
            marchenko_points: 50,
            marchenko_box: 3.0,
            marchenko_budget: 200,
            marchenko_tol: 1e-8,
            omega_y_points: vec![0.5, 1.0, 2.0],
            omega_tol: 1e-6,
            x_horizon: 20.0,
            t_horizon: 20.0,
            scan_density: 2.0,
            soliton_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckOutcome {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CheckStatus {
    pub name: String,
    pub outcome: CheckOutcome,
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerificationReport {
    pub pde_residual_max: Option<f64>,
    pub pde_residual_grid: Option<ResidualGrid>,
    pub pde_residual: Option<ResidualReport>,
    /// Largest residual relative to `1 + |K| + |Ω|` over the sampled points.
    pub marchenko_residual_max: Option<f64>,
    pub omega_quadrature_error: Option<f64>,
    pub soliton_deviation: Option<f64>,
    pub positivity_window: PositivityWindow,
    pub checks: Vec<CheckStatus>,
}

impl VerificationReport {
    /// No check failed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.outcome != CheckOutcome::Fail)
    }
}

/// Deterministic low-discrepancy points in `[0,1)³`: the additive recurrence
/// with steps `g⁻¹, g⁻², g⁻³`, `g` the positive root of `g⁴ = g + 1`.
fn r3_sequence(n: usize) -> Vec<[f64; 3]> {
    const G: f64 = 1.220_744_084_605_759_5;
    let a = [1.0 / G, 1.0 / (G * G), 1.0 / (G * G * G)];
    (1..=n)
        .map(|i| {
            let f = |k: usize| (0.5 + a[k] * i as f64).fract();
            [f(0), f(1), f(2)]
        })
        .collect()
}

fn check(name: &str, value: f64, tol: f64, note: impl Into<String>) -> CheckStatus {
    CheckStatus {
        name: name.to_string(),
        outcome: if value <= tol {
            CheckOutcome::Pass
        } else {
            CheckOutcome::Fail
        },
        value: Some(value),
        tolerance: Some(tol),
        note: note.into(),
    }
}

fn skipped(name: &str, note: impl Into<String>) -> CheckStatus {
    CheckStatus {
        name: name.to_string(),
        outcome: CheckOutcome::Skipped,
        value: None,
        tolerance: None,
        note: note.into(),
    }
}

fn failed(name: &str, note: impl Into<String>) -> CheckStatus {
    CheckStatus {
        name: name.to_string(),
        outcome: CheckOutcome::Fail,
        value: None,
        tolerance: None,
        note: note.into(),
    }
}

/// Runs every applicable check. `spec` is the scattering data the triplet was
/// realized from, when there is one.
///
/// The positivity scan runs first; the PDE and Marchenko checks are confined
/// to times before any detected sign change of `det Γ`.
pub fn run_verification(
    ev: &GammaEvaluator,
    spec: Option<&ScatteringSpec>,
    cfg: &VerifyConfig,
    exec: Execution,
) -> Result<VerificationReport> {
    let window = positivity_scan(ev, cfg.x_horizon, cfg.t_horizon, cfg.scan_density, exec)?;
    let mut checks = Vec::new();
    checks.push(CheckStatus {
        name: "positivity".into(),
        outcome: if window.tau_lower.is_none() && window.certified_up_to.is_some() {
            CheckOutcome::Pass
        } else {
            CheckOutcome::Fail
        },
        value: window.tau_lower,
        tolerance: None,
        note: window.summary(),
    });

    // stay clear of a sign change: u blows up where det Γ vanishes
    let t_limit = window.tau_lower.map(|tau| 0.9 * tau);
    let usable = t_limit.is_none_or(|t| t > 0.0);

    let mut report = VerificationReport {
        pde_residual_max: None,
        pde_residual_grid: None,
        pde_residual: None,
        marchenko_residual_max: None,
        omega_quadrature_error: None,
        soliton_deviation: None,
        positivity_window: window.clone(),
        checks: Vec::new(),
    };

    if usable {
        let t_end = t_limit.map_or(cfg.t_window.1, |t| t.min(cfg.t_window.1));
        match pde_residual(ev, cfg.x_window, (cfg.t_window.0, t_end), &cfg.residual, exec) {
            Ok(r) => {
                let mut status = check(
                    "pde-residual",
                    r.max_abs(),
                    cfg.residual_tol,
                    format!(
                        "observed orders {:?} for stencil order {}",
                        r.observed_orders(),
                        r.order()
                    ),
                );
                let vanishes = r.levels.iter().all(|l| l.max_abs == 0.0);
                if vanishes {
                    status.note = "residual vanishes identically at every step size".into();
                } else if status.outcome == CheckOutcome::Pass && r.levels.len() >= 3 && !r.refinement_demonstrated() {
                    status.outcome = CheckOutcome::Fail;
                    status.note = format!("refinement order not demonstrated: {}", status.note);
                }
                checks.push(status);
                report.pde_residual_max = Some(r.max_abs());
                report.pde_residual_grid = Some(r.grid);
                report.pde_residual = Some(r);
            }
            Err(e) => checks.push(failed("pde-residual", e.to_string())),
        }
    } else {
        checks.push(skipped("pde-residual", "det Γ is not positive at t = 0"));
    }

    if ev.is_formal() {
        checks.push(skipped(
            "marchenko-residual",
            "spectrum of A not in the right half-plane",
        ));
    } else if !usable {
        checks.push(skipped("marchenko-residual", "det Γ is not positive at t = 0"));
    } else {
        // t stays inside the requested window and clear of any sign change
        let t0 = cfg.t_window.0.min(cfg.marchenko_box);
        let mut t1 = cfg.t_window.1.min(cfg.marchenko_box);
        if let Some(limit) = t_limit {
            t1 = t1.min(limit);
        }
        let t1 = t1.max(t0);
        let mut worst = 0.0f64;
        let mut error = None;
        for p in r3_sequence(cfg.marchenko_points) {
            let x = p[0] * cfg.marchenko_box;
            let y = x + p[1] * (cfg.marchenko_box - x);
            let t = t0 + p[2] * (t1 - t0);
            match marchenko_relative_residual(ev, x, y, t, cfg.marchenko_budget) {
                Ok(r) => worst = worst.max(r),
                Err(e) => {
                    error = Some(format!("at (x, y, t) = ({x}, {y}, {t}): {e}"));
                    break;
                }
            }
        }
        match error {
            None => {
                report.marchenko_residual_max = Some(worst);
                checks.push(check(
                    "marchenko-residual",
                    worst,
                    cfg.marchenko_tol,
                    format!(
                        "{} points, relative to 1 + |K| + |Ω|, t in [{t0}, {t1}]",
                        cfg.marchenko_points
                    ),
                ));
            }
            Some(e) => checks.push(failed("marchenko-residual", e)),
        }
    }

    if spec.is_some() && ev.triplet().reflection_dim().is_some() {
        match omega_quadrature_check(ev.triplet(), &cfg.omega_y_points, ev.tolerances()) {
            Ok(dev) => {
                report.omega_quadrature_error = Some(dev);
                checks.push(check(
                    "omega-quadrature",
                    dev,
                    cfg.omega_tol,
                    "t = 0 Fourier cross-check",
                ));
            }
            Err(e) => checks.push(failed("omega-quadrature", e.to_string())),
        }
    } else {
        checks.push(skipped("omega-quadrature", "no scattering data"));
    }

    match spec {
        Some(s) if s.complex_poles.is_empty() && s.imaginary_poles.is_empty() && !s.bound_states.is_empty() => {
            let xs: Vec<f64> = (0..=50)
                .map(|i| cfg.x_window.0 + (cfg.x_window.1 - cfg.x_window.0) * i as f64 / 50.0)
                .collect();
            let ts: Vec<f64> = (0..=10)
                .map(|i| cfg.t_window.0 + (cfg.t_window.1 - cfg.t_window.0) * i as f64 / 10.0)
                .collect();
            let cmp = soliton_equivalence(&s.bound_states, s.eta, &xs, &ts)?;
            report.soliton_deviation = Some(cmp.max_deviation);
            checks.push(check(
                "soliton-equivalence",
                cmp.max_deviation,
                cfg.soliton_tol,
                format!("{} points compared, {} overflowed", cmp.compared, cmp.flagged),
            ));
        }
        _ => checks.push(skipped("soliton-equivalence", "not a pure bound-state spec")),
    }

    report.checks = checks;
    Ok(report)
}

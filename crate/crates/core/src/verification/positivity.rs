use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::solution::GammaEvaluator;

/// Bisection stops once the bracket is this narrow.
pub const CROSSING_TOL: f64 = 1e-8;

/// Outcome of a positivity scan of `det Γ` over `[0, X] × [0, T]`.
///
/// Positivity is only ever *certified on grid*: nothing is claimed between
/// grid points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PositivityWindow {
    pub x_horizon: f64,
    pub t_horizon: f64,
    /// Grid points per unit length in each direction.
    pub density: f64,
    /// Earliest bracketed sign change of `det Γ`, refined from below to
    /// [`CROSSING_TOL`]. `Some(0.0)` when `det Γ(x;0) ≤ 0` somewhere.
    pub tau_lower: Option<f64>,
    /// The x at which `tau_lower` was found (smallest x on ties).
    pub crossing_x: Option<f64>,
    /// Every grid row with `t` up to this value has `det Γ > 0`.
    pub certified_up_to: Option<f64>,
    /// First grid `t` at which `det Γ` was not representable.
    pub overflow_frontier: Option<f64>,
}

impl PositivityWindow {
    /// Positive on the whole grid up to the t horizon.
    pub fn certified_to_horizon(&self) -> bool {
        self.tau_lower.is_none() && self.overflow_frontier.is_none() && self.certified_up_to == Some(self.t_horizon)
    }

    pub fn summary(&self) -> String {
        match (self.tau_lower, self.certified_up_to, self.overflow_frontier) {
            (Some(tau), _, _) => format!(
                "det Γ changes sign near t = {tau:.9} at x = {:.9}",
                self.crossing_x.unwrap_or(f64::NAN)
            ),
            (None, Some(t), Some(f)) => {
                format!("certified on grid up to t = {t} (overflow frontier at t = {f})")
            }
            (None, Some(t), None) => format!("certified on grid up to t = {t}"),
            (None, None, _) => "nothing certified: overflow on the first grid row".to_string(),
        }
    }
}

/// Grid `0, 1/d, 2/d, …` up to and including `horizon`. Grids for a larger
/// horizon extend those for a smaller one.
pub fn scan_nodes(horizon: f64, density: f64) -> Vec<f64> {
    let step = 1.0 / density;
    let n = (horizon * density + 1e-9).floor() as usize;
    let mut nodes: Vec<f64> = (0..=n).map(|i| i as f64 * step).collect();
    if horizon - nodes[n] > 1e-12 {
        nodes.push(horizon);
    }
    nodes
}

#[derive(Clone, Copy, PartialEq)]
enum Cell {
    Positive,
    NonPositive,
    Overflow,
}

fn classify(ev: &GammaEvaluator, x: f64, t: f64) -> Result<Cell> {
    match ev.det_gamma(x, t) {
        Ok(d) if d > 0.0 => Ok(Cell::Positive),
        Ok(_) => Ok(Cell::NonPositive),
        Err(Error::Overflow { .. }) => Ok(Cell::Overflow),
        Err(e) => Err(e),
    }
}

/// Bisects `[good, bad]` down to [`CROSSING_TOL`], keeping `good` on the
/// positive side. `at` maps the scanned coordinate to `(x, t)`.
fn bisect(ev: &GammaEvaluator, mut good: f64, mut bad: f64, at: impl Fn(f64) -> (f64, f64)) -> Result<f64> {
    while (bad - good).abs() > CROSSING_TOL {
        let mid = 0.5 * (good + bad);
        let (x, t) = at(mid);
        if classify(ev, x, t)? == Cell::Positive {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok(good)
}

pub fn positivity_scan(
    ev: &GammaEvaluator,
    x_horizon: f64,
    t_horizon: f64,
    density: f64,
    exec: Execution,
) -> Result<PositivityWindow> {
    for (name, v) in [("xHorizon", x_horizon), ("tHorizon", t_horizon), ("density", density)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::validation(name, format!("must be positive, got {v}")));
        }
    }
    let xs = scan_nodes(x_horizon, density);
    let ts = scan_nodes(t_horizon, density);
    let nx = xs.len();
    let cells: Vec<Cell> = exec
        .map(nx * ts.len(), |idx| classify(ev, xs[idx % nx], ts[idx / nx]))
        .into_iter()
        .collect::<Result<_>>()?;

    let mut window = PositivityWindow {
        x_horizon,
        t_horizon,
        density,
        tau_lower: None,
        crossing_x: None,
        certified_up_to: None,
        overflow_frontier: None,
    };
    for (j, row) in cells.chunks(nx).enumerate() {
        if let Some(i) = row.iter().position(|c| *c == Cell::NonPositive) {
            let x = xs[i];
            if j == 0 {
                window.tau_lower = Some(0.0);
                // locate the first non-positive x along t = 0
                window.crossing_x = Some(if i == 0 {
                    0.0
                } else {
                    bisect(ev, xs[i - 1], x, |s| (s, 0.0))?
                });
            } else {
                window.tau_lower = Some(bisect(ev, ts[j - 1], ts[j], |s| (x, s))?);
                window.crossing_x = Some(x);
            }
            return Ok(window);
        }
        if row.contains(&Cell::Overflow) {
            window.overflow_frontier = Some(ts[j]);
            return Ok(window);
        }
        window.certified_up_to = Some(ts[j]);
    }
    Ok(window)
}

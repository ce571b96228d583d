//! Finite-difference residual of `uₜ + ηuₓ − 6uuₓ + uₓₓₓ` on exact samples.
//!
//! Samples and stencil sums are carried in double-double, so the residual
//! measures truncation error of the stencils and nothing else: the third
//! difference quotient at `h = 10⁻³` would otherwise multiply double-precision
//! sample noise by roughly `5·10⁹`.

use serde::{Deserialize, Serialize};

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::extended::{DdMatrix, ExtendedEvaluator};
use crate::solution::GammaEvaluator;

/// Stencil and grid settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct ResidualConfig {
    /// Finest x step.
    pub h_x: f64,
    /// Finest t step.
    pub h_t: f64,
    /// Accuracy order of the `uₓ` and `uₓₓₓ` stencils (even, 2..=8).
    pub x_order: usize,
    /// Accuracy order of the `uₜ` stencil (even, 2..=8).
    pub t_order: usize,
    pub nx: usize,
    pub nt: usize,
    /// Number of step sizes `h, 2h, 4h, …` evaluated.
    pub levels: usize,
}

impl Default for ResidualConfig {
    fn default() -> Self {
        ResidualConfig {
            h_x: 1e-3,
            h_t: 1e-3,
            x_order: 6,
            t_order: 6,
            nx: 21,
            nt: 11,
            levels: 3,
        }
    }
}

impl ResidualConfig {
    fn validate(&self) -> Result<()> {
        for (name, h) in [("hX", self.h_x), ("hT", self.h_t)] {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::validation(name, format!("step must be positive, got {h}")));
            }
        }
        for (name, p) in [("xOrder", self.x_order), ("tOrder", self.t_order)] {
            if !(2..=8).contains(&p) || p % 2 == 1 {
                return Err(Error::validation(
                    name,
                    format!("order must be one of 2, 4, 6, 8, got {p}"),
                ));
            }
        }
        if self.nx == 0 || self.nt == 0 || self.levels == 0 {
            return Err(Error::validation("grid", "nx, nt and levels must be positive"));
        }
        Ok(())
    }

    /// Order the combined residual converges with.
    pub fn order(&self) -> usize {
        self.x_order.min(self.t_order)
    }
}

/// The node grid the residual was evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResidualGrid {
    pub x_start: f64,
    pub x_end: f64,
    pub nx: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub nt: usize,
}

impl ResidualGrid {
    pub fn x_nodes(&self) -> Vec<f64> {
        linspace(self.x_start, self.x_end, self.nx)
    }

    pub fn t_nodes(&self) -> Vec<f64> {
        linspace(self.t_start, self.t_end, self.nt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResidualLevel {
    pub h_x: f64,
    pub h_t: f64,
    pub max_abs: f64,
    pub argmax_x: f64,
    pub argmax_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResidualReport {
    pub grid: ResidualGrid,
    pub x_order: usize,
    pub t_order: usize,
    /// Finest step first.
    pub levels: Vec<ResidualLevel>,
    /// Pointwise residual at the finest step, `[it·nx + ix]`.
    pub values: Vec<f64>,
}

impl ResidualReport {
    /// `max |r|` at the finest step.
    pub fn max_abs(&self) -> f64 {
        self.levels[0].max_abs
    }

    pub fn order(&self) -> usize {
        self.x_order.min(self.t_order)
    }

    /// `max|r|(2h) / max|r|(h)` for consecutive levels.
    pub fn ratios(&self) -> Vec<f64> {
        self.levels.windows(2).map(|w| w[1].max_abs / w[0].max_abs).collect()
    }

    pub fn observed_orders(&self) -> Vec<f64> {
        self.ratios().into_iter().map(f64::log2).collect()
    }

    /// Every halving of `h` divides the residual by `2^p` up to a factor of 2.
    /// Needs at least three levels.
    pub fn refinement_demonstrated(&self) -> bool {
        let expected = 2f64.powi(self.order() as i32);
        self.levels.len() >= 3
            && self
                .ratios()
                .iter()
                .all(|&r| r >= expected / 2.0 && r <= expected * 2.0)
    }
}

/// A field `u(x,t)` that can be sampled on tensor stencils, with per-coordinate
/// work shared between samples.
pub trait SampledField: Sync {
    type AtX: Send + Sync;
    type AtT: Send + Sync;
    fn at_x(&self, x: Dd) -> Result<Self::AtX>;
    fn at_t(&self, t: Dd) -> Result<Self::AtT>;
    fn u(&self, x: &Self::AtX, t: &Self::AtT) -> Result<Dd>;
}

impl SampledField for ExtendedEvaluator {
    type AtX = DdMatrix;
    type AtT = DdMatrix;

    fn at_x(&self, x: Dd) -> Result<DdMatrix> {
        self.space_factor(x)
    }

    fn at_t(&self, t: Dd) -> Result<DdMatrix> {
        self.time_factor(t)
    }

    fn u(&self, w: &DdMatrix, e: &DdMatrix) -> Result<Dd> {
        self.u_from_factors(w, e)
    }
}

/// Adapter for a plain closure `u(x, t)`.
pub struct FnField<F>(pub F);

impl<F> SampledField for FnField<F>
where
    F: Fn(Dd, Dd) -> Result<Dd> + Sync,
{
    type AtX = Dd;
    type AtT = Dd;

    fn at_x(&self, x: Dd) -> Result<Dd> {
        Ok(x)
    }

    fn at_t(&self, t: Dd) -> Result<Dd> {
        Ok(t)
    }

    fn u(&self, x: &Dd, t: &Dd) -> Result<Dd> {
        (self.0)(*x, *t)
    }
}

/// Weights of the centred stencil on the offsets `−r..=r` (unit spacing) for
/// the `m`-th derivative at 0, by Fornberg's recursion.
pub fn centred_weights(m: usize, r: usize) -> Vec<Dd> {
    let z: Vec<Dd> = (-(r as i64)..=r as i64).map(|k| Dd::new(k as f64)).collect();
    let n = z.len();
    let mut c = vec![vec![Dd::ZERO; m + 1]; n];
    c[0][0] = Dd::ONE;
    let mut c1 = Dd::ONE;
    let mut c4 = z[0];
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = Dd::ONE;
        let c5 = c4;
        c4 = z[i];
        for j in 0..i {
            let c3 = z[i] - z[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (c[i - 1][k - 1] * k as f64 - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -(c1 * c5 * c[i - 1][0]) / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - c[j][k - 1] * k as f64) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    b
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

fn flagged_sample(x: Dd, t: Dd, e: Error) -> Error {
    Error::validation(
        "window",
        format!(
            "sample at x = {}, t = {} is not evaluable ({e})",
            x.to_f64(),
            t.to_f64()
        ),
    )
}

struct Stencils {
    rx: usize,
    rt: usize,
    d1x: Vec<Dd>,
    d3x: Vec<Dd>,
    d1t: Vec<Dd>,
}

impl Stencils {
    fn new(cfg: &ResidualConfig) -> Self {
        let rx = cfg.x_order / 2 + 1;
        let rt = cfg.t_order / 2;
        // the first-derivative stencil is narrower; pad it to the shared width
        let mut d1x = vec![Dd::ZERO];
        d1x.extend(centred_weights(1, rx - 1));
        d1x.push(Dd::ZERO);
        Stencils {
            rx,
            rt,
            d1x,
            d3x: centred_weights(3, rx),
            d1t: centred_weights(1, rt),
        }
    }
}

/// Residual of the KdV equation with drift `eta` for an arbitrary sampled field.
pub fn pde_residual_of<F: SampledField>(
    field: &F,
    eta: f64,
    x_window: (f64, f64),
    t_window: (f64, f64),
    cfg: &ResidualConfig,
    exec: Execution,
) -> Result<ResidualReport> {
    cfg.validate()?;
    for (name, (a, b)) in [("xWindow", x_window), ("tWindow", t_window)] {
        if !(a.is_finite() && b.is_finite() && a <= b) {
            return Err(Error::validation(
                name,
                format!("expected finite start <= end, got [{a}, {b}]"),
            ));
        }
    }
    let st = Stencils::new(cfg);
    let coarsest = 2f64.powi(cfg.levels as i32 - 1);
    // stencils may not reach below x = 0 or t = 0
    let x_start = x_window.0.max(st.rx as f64 * cfg.h_x * coarsest);
    let t_start = t_window.0.max(st.rt as f64 * cfg.h_t * coarsest);
    if x_start > x_window.1 || t_start > t_window.1 {
        return Err(Error::validation(
            "window",
            "too small for the stencil reach at the coarsest step",
        ));
    }
    let grid = ResidualGrid {
        x_start,
        x_end: x_window.1,
        nx: cfg.nx,
        t_start,
        t_end: t_window.1,
        nt: cfg.nt,
    };
    let (xs, ts) = (grid.x_nodes(), grid.t_nodes());

    let mut levels = Vec::with_capacity(cfg.levels);
    let mut finest_values = Vec::new();
    for level in 0..cfg.levels {
        let scale = 2f64.powi(level as i32);
        let (hx, ht) = (cfg.h_x * scale, cfg.h_t * scale);
        let values = residual_level(field, eta, &xs, &ts, hx, ht, &st, exec)?;
        let (mut max_abs, mut at) = (0.0f64, 0usize);
        for (i, v) in values.iter().enumerate() {
            if v.abs() > max_abs {
                max_abs = v.abs();
                at = i;
            }
        }
        levels.push(ResidualLevel {
            h_x: hx,
            h_t: ht,
            max_abs,
            argmax_x: xs[at % xs.len()],
            argmax_t: ts[at / xs.len()],
        });
        if level == 0 {
            finest_values = values;
        }
    }
    Ok(ResidualReport {
        grid,
        x_order: cfg.x_order,
        t_order: cfg.t_order,
        levels,
        values: finest_values,
    })
}

#[allow(clippy::too_many_arguments)]
fn residual_level<F: SampledField>(
    field: &F,
    eta: f64,
    xs: &[f64],
    ts: &[f64],
    hx: f64,
    ht: f64,
    st: &Stencils,
    exec: Execution,
) -> Result<Vec<f64>> {
    let (rx, rt) = (st.rx, st.rt);
    let (sx, stw) = (2 * rx + 1, 2 * rt + 1);
    let (nx, nt) = (xs.len(), ts.len());
    // offsets are exact multiples of h in double-double
    let x_at = |idx: usize| Dd::new(xs[idx / sx]) + Dd::product((idx % sx) as f64 - rx as f64, hx);
    let t_at = |idx: usize| Dd::new(ts[idx / stw]) + Dd::product((idx % stw) as f64 - rt as f64, ht);

    let fx: Vec<F::AtX> = exec
        .map(nx * sx, |idx| {
            field
                .at_x(x_at(idx))
                .map_err(|e| flagged_sample(x_at(idx), Dd::ZERO, e))
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let ft: Vec<F::AtT> = exec
        .map(nt * stw, |idx| {
            field
                .at_t(t_at(idx))
                .map_err(|e| flagged_sample(Dd::ZERO, t_at(idx), e))
        })
        .into_iter()
        .collect::<Result<_>>()?;

    let (hx_dd, ht_dd) = (Dd::new(hx), Dd::new(ht));
    let hx3 = hx_dd * hx_dd * hx_dd;
    exec.map(nx * nt, |node| {
        let (i, j) = (node % nx, node / nx);
        let sample = |kx: usize, kt: usize| {
            field
                .u(&fx[i * sx + kx], &ft[j * stw + kt])
                .map_err(|e| flagged_sample(x_at(i * sx + kx), t_at(j * stw + kt), e))
        };
        let (mut ux, mut uxxx, mut ut) = (Dd::ZERO, Dd::ZERO, Dd::ZERO);
        let mut u = Dd::ZERO;
        for k in 0..sx {
            let v = sample(k, rt)?;
            ux += st.d1x[k] * v;
            uxxx += st.d3x[k] * v;
            if k == rx {
                u = v;
            }
        }
        for k in 0..stw {
            let v = if k == rt { u } else { sample(rx, k)? };
            ut += st.d1t[k] * v;
        }
        let ux = ux / hx_dd;
        let r = ut / ht_dd + ux * eta - u * ux * 6.0 + uxxx / hx3;
        Ok(r.to_f64())
    })
    .into_iter()
    .collect()
}

/// Residual of the solution represented by `ev`, sampled in double-double.
pub fn pde_residual(
    ev: &GammaEvaluator,
    x_window: (f64, f64),
    t_window: (f64, f64),
    cfg: &ResidualConfig,
    exec: Execution,
) -> Result<ResidualReport> {
    let ext = ev.extended()?;
    pde_residual_of(&ext, ev.triplet().eta(), x_window, t_window, cfg, exec)
}

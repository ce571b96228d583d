//! Adaptive Gauss–Kronrod quadrature and the two infinite-range variants
//! the verifiers need: exponentially decaying integrands, and slowly decaying
//! oscillatory ones summed period by period with Wynn's ε-algorithm.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Default absolute tolerance.
pub const ABS_TOL: f64 = 1e-12;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss weights for the odd-indexed Kronrod nodes (and the centre).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
    /// False when the interval budget ran out before the tolerance was met.
    pub converged: bool,
}

/// One 15-point Kronrod rule with the embedded 7-point Gauss rule.
/// Returns `(kronrod, |kronrod − gauss|)`.
fn kronrod15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let dx = h * XGK[i];
        let (f1, f2) = (f(c - dx), f(c + dx));
        k += WGK[i] * (f1 + f2);
        if i % 2 == 1 {
            g += WG[i / 2] * (f1 + f2);
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&o.error)
    }
}

/// Globally adaptive bisection: always splits the panel with the largest
/// error estimate, until the summed estimate is below `abs_tol` or
/// `max_panels` panels exist.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, abs_tol: f64, max_panels: usize) -> Result<Estimate> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::validation("interval", "endpoints must be finite"));
    }
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
            converged: true,
        });
    }
    let (value, error) = kronrod15(&mut f, a, b);
    let mut evaluations = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let mut err = error;
    while err > abs_tol && heap.len() < max_panels.max(1) {
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let (v1, e1) = kronrod15(&mut f, worst.a, mid);
        let (v2, e2) = kronrod15(&mut f, mid, worst.b);
        evaluations += 30;
        err += e1 + e2 - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    // re-sum rather than trust the running error update
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.error).sum();
    if !value.is_finite() {
        return Err(Error::Overflow { magnitude: value.abs() });
    }
    Ok(Estimate {
        value,
        error,
        evaluations,
        converged: error <= abs_tol,
    })
}

/// `∫_a^∞ f` for integrands bounded by a multiple of `e^{−rate·z}`.
///
/// Panels of width `1/rate` are integrated in turn; the range is truncated
/// once two consecutive panels have every sample below `cutoff` in
/// magnitude. `max_panels` bounds the adaptive refinement of each panel.
pub fn integrate_decaying(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    rate: f64,
    cutoff: f64,
    abs_tol: f64,
    max_panels: usize,
) -> Result<Estimate> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::validation(
            "rate",
            format!("decay rate must be positive, got {rate}"),
        ));
    }
    let width = 1.0 / rate;
    let mut out = Estimate {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
        converged: true,
    };
    let mut quiet = 0;
    let mut lo = a;
    // e^{-rate·z} falls by e^{-1} per panel: 2000 panels is far past any f64 scale
    for _ in 0..2000 {
        let hi = lo + width;
        let mut peak = 0.0f64;
        let est = integrate(
            |z| {
                let v = f(z);
                peak = peak.max(v.abs());
                v
            },
            lo,
            hi,
            abs_tol * 0.1,
            max_panels,
        )?;
        out.value += est.value;
        out.error += est.error;
        out.evaluations += est.evaluations;
        out.converged &= est.converged;
        quiet = if peak < cutoff { quiet + 1 } else { 0 };
        if quiet >= 2 {
            return Ok(out);
        }
        lo = hi;
    }
    Err(Error::NoConvergence { iterations: 2000 })
}

/// Limit of a sequence of partial sums by Wynn's ε-algorithm.
///
/// Returns the estimate from the deepest even column together with its
/// distance from the previous even column as an error indication.
pub fn wynn_epsilon(partial_sums: &[f64]) -> (f64, f64) {
    let n = partial_sums.len();
    if n < 3 {
        let last = partial_sums.last().copied().unwrap_or(0.0);
        return (last, f64::INFINITY);
    }
    let mut prev = vec![0.0; n + 1];
    let mut cur: Vec<f64> = partial_sums.to_vec();
    let mut best = *partial_sums.last().unwrap();
    let mut best_err = f64::INFINITY;
    let mut previous_even = best;
    for k in 1..n {
        let next: Vec<f64> = (0..cur.len() - 1)
            .map(|j| {
                let d = cur[j + 1] - cur[j];
                if d == 0.0 {
                    f64::INFINITY
                } else {
                    prev[j + 1] + 1.0 / d
                }
            })
            .collect();
        if next.iter().any(|v| !v.is_finite()) {
            break;
        }
        if k % 2 == 0 {
            let candidate = *next.last().unwrap();
            let err = (candidate - previous_even).abs();
            if err <= best_err {
                best = candidate;
                best_err = err;
            }
            previous_even = candidate;
        }
        prev = cur;
        cur = next;
        if cur.len() < 2 {
            break;
        }
    }
    (best, best_err)
}

/// `∫_a^∞ f` for integrands oscillating with half-period `half_period` under
/// an envelope too slow for truncation (such as `1/z`).
///
/// Partial sums over consecutive half-periods form an alternating sequence
/// whose limit is extrapolated by [`wynn_epsilon`].
pub fn integrate_oscillatory_tail(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    half_period: f64,
    abs_tol: f64,
    terms: usize,
) -> Result<Estimate> {
    if !(half_period.is_finite() && half_period > 0.0) {
        return Err(Error::validation("halfPeriod", "must be positive"));
    }
    let mut sums = Vec::with_capacity(terms);
    let mut acc = 0.0;
    let mut evaluations = 0;
    let mut quad_error = 0.0;
    for n in 0..terms {
        let lo = a + n as f64 * half_period;
        let est = integrate(&mut f, lo, lo + half_period, abs_tol * 0.01, 200)?;
        acc += est.value;
        quad_error += est.error;
        evaluations += est.evaluations;
        sums.push(acc);
    }
    let (value, extrapolation_error) = wynn_epsilon(&sums);
    let error = quad_error + extrapolation_error;
    Ok(Estimate {
        value,
        error,
        evaluations,
        converged: error <= abs_tol,
    })
}

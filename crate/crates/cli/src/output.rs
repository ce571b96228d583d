//! CSV and JSON renderings. Everything is built in memory and written once,
//! so identical inputs give identical bytes.

use std::fmt::Write as _;

use kdv_core::solution::SolutionGrid;
use kdv_core::verification::{CheckStatus, SolitonComparison};
use serde::Serialize;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Quotes a field when it holds a separator, quote or line break.
fn field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn grid_csv(grid: &SolutionGrid) -> String {
    let mut out = String::from("x,t,u,detGamma,flag\n");
    for s in grid.iter() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            num(s.x),
            num(s.t),
            num(s.u),
            num(s.det_gamma),
            s.flag.as_str()
        );
    }
    out
}

/// One frame: the samples at a single `t`.
pub fn frame_csv(grid: &SolutionGrid, row: usize) -> String {
    let mut out = String::from("x,u\n");
    for s in &grid.samples[row] {
        let _ = writeln!(out, "{},{}", num(s.x), num(s.u));
    }
    out
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Frame {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<Option<f64>>,
}

pub fn frame_json(grid: &SolutionGrid, row: usize) -> String {
    let samples = &grid.samples[row];
    json(&Frame {
        t: grid.t_grid[row],
        x: samples.iter().map(|s| s.x).collect(),
        u: samples.iter().map(|s| s.u.is_finite().then_some(s.u)).collect(),
    })
}

pub fn checks_csv(checks: &[CheckStatus]) -> String {
    let mut out = String::from("check,outcome,value,tolerance,note\n");
    for c in checks {
        let outcome = serde_json::to_value(c.outcome)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned));
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            field(&c.name),
            outcome.unwrap_or_default(),
            opt(c.value),
            opt(c.tolerance),
            field(&c.note)
        );
    }
    out
}

/// The grid with the Cauchy-matrix determinant alongside.
pub fn soliton_csv(grid: &SolutionGrid, direct: &[Option<f64>]) -> String {
    let mut out = String::from("x,t,u,detGamma,detDirect,flag\n");
    for (s, d) in grid.iter().zip(direct) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            num(s.x),
            num(s.t),
            num(s.u),
            num(s.det_gamma),
            opt(*d),
            s.flag.as_str()
        );
    }
    out
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SolitonDocument<'a> {
    pub comparison: SolitonComparison,
    pub tolerance: f64,
    pub grid: &'a SolutionGrid,
    pub det_direct: &'a [Option<f64>],
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("in-memory serialization cannot fail");
    s.push('\n');
    s
}

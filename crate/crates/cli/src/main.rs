//! `kdv`: build triplets from scattering data, evaluate and verify explicit
//! KdV solutions, and write plot-ready grids.
//!
//! Exit status: 0 success, 2 invalid input, 3 numerical failure,
//! 4 verification failure, 1 I/O error.

mod input;
mod output;

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kdv_core::linalg::{determinant, Tolerances};
use kdv_core::realization::{build_triplet, BoundState, ScatteringSpec};
use kdv_core::solution::{n_soliton_gamma_direct, ConditionFlag, GammaEvaluator, SolutionGrid};
use kdv_core::verification::{run_verification, soliton_equivalence, ResidualConfig, VerifyConfig};
use kdv_core::Execution;
use serde::Serialize;

use input::{load, Loaded, RawTriplet};

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Core(kdv_core::Error),
    Numerical(String),
    Verification(String),
    Io(String),
}

impl From<kdv_core::Error> for CliError {
    fn from(e: kdv_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Input(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "invalid input: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

/// `start:stop:count`, evenly spaced and inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Range {
    start: f64,
    stop: f64,
    count: usize,
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, count] = parts[..] else {
            return Err(format!("expected start:stop:count, got {s:?}"));
        };
        let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
        let range = Range {
            start: num(start)?,
            stop: num(stop)?,
            count: count.trim().parse().map_err(|e| format!("{count:?}: {e}"))?,
        };
        if !(range.start.is_finite() && range.stop.is_finite()) {
            return Err("start and stop must be finite".into());
        }
        if range.start < 0.0 {
            return Err(format!("start must be >= 0, got {}", range.start));
        }
        if range.start > range.stop {
            return Err(format!("start {} exceeds stop {}", range.start, range.stop));
        }
        if range.count == 0 {
            return Err("count must be at least 1".into());
        }
        Ok(range)
    }
}

impl Range {
    fn nodes(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let (span, last) = (self.stop - self.start, (self.count - 1) as f64);
        (0..self.count).map(|i| self.start + span * i as f64 / last).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Input document (JSON); `-` reads standard input.
    #[arg(long, short)]
    input: PathBuf,
    /// Drift constant η; overrides the document.
    #[arg(long, allow_negative_numbers = true)]
    eta: Option<f64>,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output file; standard output when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// x grid as start:stop:count.
    #[arg(long, default_value = "0:10:201")]
    x: Range,
    /// t grid as start:stop:count.
    #[arg(long, default_value = "0:2:101")]
    t: Range,
}

#[derive(Debug, Args)]
struct TolArgs {
    /// Relative residual accepted from linear solves.
    #[arg(long, allow_negative_numbers = true)]
    tol_solve: Option<f64>,
    /// LU pivots below this fraction of the largest entry count as zero.
    #[arg(long, allow_negative_numbers = true)]
    tol_pivot: Option<f64>,
    /// Γ is flagged when |det Γ| falls below this fraction of its Hadamard
    /// bound, taken after diagonal balancing.
    #[arg(long, allow_negative_numbers = true)]
    tol_near_singular: Option<f64>,
}

impl TolArgs {
    fn tolerances(&self) -> Result<Tolerances, CliError> {
        let mut tol = Tolerances::default();
        for (name, value, slot) in [
            ("--tol-solve", self.tol_solve, &mut tol.solve_relative),
            ("--tol-pivot", self.tol_pivot, &mut tol.pivot_relative),
            ("--tol-near-singular", self.tol_near_singular, &mut tol.near_singular),
        ] {
            if let Some(v) = value {
                positive(name, v)?;
                *slot = v;
            }
        }
        Ok(tol)
    }
}

#[derive(Debug, Parser)]
#[command(name = "kdv", version, about = "Explicit KdV solutions from matrix triplets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Assemble (A, B, C) from scattering data and report its spectrum.
    Build {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Evaluate u(x,t) and det Γ(x;t) on a grid.
    Eval {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Run the independent checks: PDE residual, Marchenko equation, Fourier
    /// cross-check, positivity scan and soliton reduction.
    Verify {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Residual window in x; the count sets the number of sample columns.
        #[arg(long, default_value = "0:10:21")]
        x: Range,
        /// Residual window in t; the count sets the number of sample rows.
        #[arg(long, default_value = "0:2:11")]
        t: Range,
        /// Positivity scan extent in both x and t.
        #[arg(long, allow_negative_numbers = true, default_value_t = 20.0)]
        horizon: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 1e-5)]
        tol_residual: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 1e-8)]
        tol_marchenko: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 1e-6)]
        tol_omega: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 1e-10)]
        tol_soliton: f64,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// N-soliton solution from bound states, checked against the Cauchy-matrix
    /// determinant.
    Soliton {
        /// Bound-state document; alternatively give --kappa and --c.
        #[arg(long, short, conflicts_with_all = ["kappa", "c"])]
        input: Option<PathBuf>,
        /// Comma-separated κ values.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, requires = "c")]
        kappa: Vec<f64>,
        /// Comma-separated norming constants, one per κ.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, requires = "kappa")]
        c: Vec<f64>,
        #[arg(long, allow_negative_numbers = true)]
        eta: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, allow_negative_numbers = true, default_value_t = 1e-10)]
        tol_soliton: f64,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Write one file per t value, columns x and u, named frame_NNN.
    Frames {
        #[command(flatten)]
        input: InputArgs,
        /// Directory for the frame files; created if missing.
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        tol: TolArgs,
    },
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Input(format!("{name}: must be positive, got {v}")))
    }
}

fn read_input(path: &Path) -> Result<String, CliError> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| CliError::Io(format!("standard input: {e}")))?;
        Ok(s)
    } else {
        fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("standard output: {e}"))),
    }
}

fn load_args(args: &InputArgs) -> Result<Loaded, CliError> {
    if let Some(eta) = args.eta {
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(CliError::Input(format!("--eta: must be finite and >= 0, got {eta}")));
        }
    }
    load(&read_input(&args.input)?, args.eta)
}

/// Reports flagged samples on stderr; a grid with nothing usable is a failure.
fn check_flags(grid: &SolutionGrid) -> Result<(), CliError> {
    let flagged = grid.flagged_count();
    if flagged == 0 {
        return Ok(());
    }
    let overflow = grid.iter().filter(|s| s.flag == ConditionFlag::Overflow).count();
    let summary = format!(
        "{flagged} of {} samples flagged ({overflow} overflow, {} near-singular)",
        grid.len(),
        flagged - overflow
    );
    if flagged == grid.len() {
        Err(CliError::Numerical(summary))
    } else {
        eprintln!("warning: {summary}");
        Ok(())
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct BuildInfo {
    dimension: usize,
    reflection_dimension: Option<usize>,
    diagnostics: kdv_core::realization::TripletDiagnostics,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct BuildDocument {
    raw_triplet: RawTriplet,
    info: BuildInfo,
}

fn cmd_build(input: &InputArgs, out: &OutputArgs) -> Result<(), CliError> {
    if out.format == Some(Format::Csv) {
        return Err(CliError::Input("--format: build writes JSON only".into()));
    }
    let loaded = load_args(input)?;
    let tr = &loaded.triplet;
    let doc = BuildDocument {
        raw_triplet: RawTriplet::from_triplet(tr),
        info: BuildInfo {
            dimension: tr.dim(),
            reflection_dimension: tr.reflection_dim(),
            diagnostics: kdv_core::realization::validate_triplet(tr),
        },
    };
    write_output(out.output.as_deref(), &output::json(&doc))
}

fn evaluate(loaded: &Loaded, grid: &GridArgs, tol: &TolArgs) -> Result<SolutionGrid, CliError> {
    let ev = GammaEvaluator::new(&loaded.triplet, tol.tolerances()?)?;
    if ev.is_formal() {
        eprintln!("warning: spectrum of A not in the open right half-plane; evaluating the formal solution");
    }
    let samples = ev.sample_grid(&grid.x.nodes(), &grid.t.nodes(), Execution::Parallel)?;
    check_flags(&samples)?;
    Ok(samples)
}

fn cmd_eval(input: &InputArgs, out: &OutputArgs, grid: &GridArgs, tol: &TolArgs) -> Result<(), CliError> {
    let samples = evaluate(&load_args(input)?, grid, tol)?;
    let text = match out.format.unwrap_or(Format::Csv) {
        Format::Csv => output::grid_csv(&samples),
        Format::Json => output::json(&samples),
    };
    write_output(out.output.as_deref(), &text)
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    input: &InputArgs,
    out: &OutputArgs,
    x: Range,
    t: Range,
    horizon: f64,
    tols: [f64; 4],
    tol: &TolArgs,
) -> Result<(), CliError> {
    positive("--horizon", horizon)?;
    for (name, v) in ["--tol-residual", "--tol-marchenko", "--tol-omega", "--tol-soliton"]
        .iter()
        .zip(tols)
    {
        positive(name, v)?;
    }
    let loaded = load_args(input)?;
    let ev = GammaEvaluator::new(&loaded.triplet, tol.tolerances()?)?;
    let cfg = VerifyConfig {
        x_window: (x.start, x.stop),
        t_window: (t.start, t.stop),
        residual: ResidualConfig {
            nx: x.count,
            nt: t.count,
            ..ResidualConfig::default()
        },
        residual_tol: tols[0],
        marchenko_tol: tols[1],
        omega_tol: tols[2],
        soliton_tol: tols[3],
        x_horizon: horizon,
        t_horizon: horizon,
        ..VerifyConfig::default()
    };
    let report = run_verification(&ev, loaded.spec.as_ref(), &cfg, Execution::Parallel)?;
    let text = match out.format.unwrap_or(Format::Json) {
        Format::Csv => output::checks_csv(&report.checks),
        Format::Json => output::json(&report),
    };
    write_output(out.output.as_deref(), &text)?;
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| c.outcome == kdv_core::verification::CheckOutcome::Fail)
            .map(|c| c.name.as_str())
            .collect();
        Err(CliError::Verification(failed.join(", ")))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_soliton(
    input: Option<&Path>,
    kappa: &[f64],
    c: &[f64],
    eta: Option<f64>,
    out: &OutputArgs,
    grid: &GridArgs,
    tol_soliton: f64,
    tol: &TolArgs,
) -> Result<(), CliError> {
    positive("--tol-soliton", tol_soliton)?;
    let spec = match input {
        Some(path) => {
            let spec = load(&read_input(path)?, eta)?
                .spec
                .ok_or_else(|| CliError::Input("rawTriplet: soliton needs bound states, not a triplet".into()))?;
            if !spec.complex_poles.is_empty() || !spec.imaginary_poles.is_empty() {
                return Err(CliError::Input("complexPoles: soliton takes bound states only".into()));
            }
            spec
        }
        None => {
            if kappa.is_empty() {
                return Err(CliError::Input(
                    "--kappa: give bound states with --kappa and --c, or --input".into(),
                ));
            }
            if kappa.len() != c.len() {
                return Err(CliError::Input(format!(
                    "--c: {} values for {} kappas",
                    c.len(),
                    kappa.len()
                )));
            }
            ScatteringSpec {
                eta: eta.unwrap_or(0.0),
                bound_states: kappa
                    .iter()
                    .zip(c)
                    .map(|(&kappa, &c)| BoundState { kappa, c })
                    .collect(),
                ..ScatteringSpec::default()
            }
        }
    };
    let loaded = Loaded {
        triplet: build_triplet(&spec)?,
        spec: Some(spec.clone()),
    };
    let samples = evaluate(&loaded, grid, tol)?;
    let tolerances = tol.tolerances()?;
    let direct: Vec<Option<f64>> = samples
        .iter()
        .map(|s| {
            n_soliton_gamma_direct(&spec.bound_states, spec.eta, s.x, s.t)
                .and_then(|g| determinant(&g, &tolerances))
                .ok()
        })
        .collect();
    let comparison = soliton_equivalence(&spec.bound_states, spec.eta, &samples.x_grid, &samples.t_grid)?;
    let text = match out.format.unwrap_or(Format::Csv) {
        Format::Csv => output::soliton_csv(&samples, &direct),
        Format::Json => output::json(&output::SolitonDocument {
            comparison,
            tolerance: tol_soliton,
            grid: &samples,
            det_direct: &direct,
        }),
    };
    write_output(out.output.as_deref(), &text)?;
    if comparison.max_deviation <= tol_soliton {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "determinant deviation {:e} exceeds {tol_soliton:e}",
            comparison.max_deviation
        )))
    }
}

fn cmd_frames(input: &InputArgs, dir: &Path, format: Format, grid: &GridArgs, tol: &TolArgs) -> Result<(), CliError> {
    let samples = evaluate(&load_args(input)?, grid, tol)?;
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let n = samples.t_grid.len();
    let width = (n - 1).to_string().len().max(3);
    for row in 0..n {
        let (text, ext) = match format {
            Format::Csv => (output::frame_csv(&samples, row), "csv"),
            Format::Json => (output::frame_json(&samples, row), "json"),
        };
        write_output(Some(&dir.join(format!("frame_{row:0width$}.{ext}"))), &text)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Build { input, output } => cmd_build(&input, &output),
        Command::Eval {
            input,
            output,
            grid,
            tol,
        } => cmd_eval(&input, &output, &grid, &tol),
        Command::Verify {
            input,
            output,
            x,
            t,
            horizon,
            tol_residual,
            tol_marchenko,
            tol_omega,
            tol_soliton,
            tol,
        } => cmd_verify(
            &input,
            &output,
            x,
            t,
            horizon,
            [tol_residual, tol_marchenko, tol_omega, tol_soliton],
            &tol,
        ),
        Command::Soliton {
            input,
            kappa,
            c,
            eta,
            output,
            grid,
            tol_soliton,
            tol,
        } => cmd_soliton(input.as_deref(), &kappa, &c, eta, &output, &grid, tol_soliton, &tol),
        Command::Frames {
            input,
            output,
            format,
            grid,
            tol,
        } => cmd_frames(&input, &output, format, &grid, &tol),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kdv: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        let r: Range = "0:1:5".parse().unwrap();
        assert_eq!(r.nodes(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!("2:2:1".parse::<Range>().unwrap().nodes(), vec![2.0]);
        for bad in ["0:1", "0:1:0", "-1:1:3", "2:1:3", "a:1:3", "0:inf:3"] {
            assert!(bad.parse::<Range>().is_err(), "{bad}");
        }
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}

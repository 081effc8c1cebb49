//! `minmax`: discrete minimax approximation on normal-matrix spectra, with
//! optimality certificates and worst-case vectors.

mod demo;
mod report;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use minmax_core::matrix_bridge::{build_commuting_problem, sample_maxmin, CommutingSpec, MatrixSpec};
use minmax_core::minimax::solve_minimax;
use minmax_core::pipeline::{self, Verdict};
use minmax_core::problem::{BasisKind, ProblemSpec};
use minmax_core::{
    Cx, Error, EvaluationTable, FieldMode, MinimaxOptions, PipelineOptions, SpectralDecomposition,
};
use serde_json::Value;

use demo::Demo;
use report::{to_json, RunReport};

/// Tolerance of the matrix equality checked by `verify` and `commuting`.
const EQUALITY_TOL: f64 = 1e-8;

#[derive(Parser, Debug)]
#[command(name = "minmax", version, about = "Discrete minimax approximation on normal-matrix spectra")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Best approximation on the points (δ, α*).
    Solve(Run),
    /// Recover and check the dual weights; with `alpha` in the input, test
    /// that polynomial for optimality.
    Certify(Run),
    /// Worst-case unit vector for a matrix input.
    Worstcase(Run),
    /// Check that `v*` attains the matrix optimum.
    Verify(Run),
    /// Commuting-family input: reduce to one matrix and verify.
    Commuting(Run),
    /// Verify a built-in instance.
    Demo {
        #[arg(value_enum)]
        name: Demo,
        #[command(flatten)]
        flags: Flags,
    },
}

#[derive(Args, Debug)]
struct Run {
    /// Problem, matrix or commuting-family JSON file.
    #[arg(required_unless_present = "demo", conflicts_with = "demo")]
    input: Option<PathBuf>,
    /// Use a built-in instance instead of a file.
    #[arg(long, value_enum)]
    demo: Option<Demo>,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args, Debug, Clone)]
struct Flags {
    #[arg(long, default_value_t = 1e-10)]
    gap_tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    active_tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    cond_tol: f64,
    /// Reduce the certificate support by Carathéodory pruning.
    #[arg(long)]
    prune: bool,
    /// Random unit vectors tried by the sampling check (0 disables it).
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the field of the coefficients.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Basis for matrix inputs without `kind`.
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    #[arg(long)]
    k: Option<usize>,
    /// Add per-stage wall-clock milliseconds to the report.
    #[arg(long)]
    timings: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Real,
    Complex,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Gmres,
    Chebyshev,
}

impl Flags {
    fn options(&self) -> PipelineOptions {
        PipelineOptions {
            minimax: MinimaxOptions { gap_tol: self.gap_tol, max_iter: self.max_iter, ..Default::default() },
            active_tol: self.active_tol,
            cond_tol: self.cond_tol,
            prune: self.prune,
            ..Default::default()
        }
    }

    fn mode(&self) -> Option<FieldMode> {
        self.mode.map(|m| match m {
            ModeArg::Real => FieldMode::Real,
            ModeArg::Complex => FieldMode::Complex,
        })
    }

    fn basis(&self) -> Option<BasisKind> {
        match (self.kind?, self.k?) {
            (KindArg::Gmres, k) => Some(BasisKind::Gmres(k)),
            (KindArg::Chebyshev, k) => Some(BasisKind::Chebyshev(k)),
        }
    }
}

/// Why a run stopped, mapped onto the exit code.
#[derive(Debug)]
enum Failure {
    /// A mathematical check failed.
    Check(String),
    Convergence(String),
    Input(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Check(_) => 1,
            Failure::Convergence(_) => 2,
            Failure::Input(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Check(m) | Failure::Convergence(m) | Failure::Input(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NotOptimal { .. } => Failure::Check(e.to_string()),
            Error::Convergence { .. } => Failure::Convergence(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

/// A parsed input: the scalar table, the matrix it came from (if any) and
/// the candidate coefficients carried by a problem file.
struct Loaded {
    table: EvaluationTable,
    decomp: SpectralDecomposition,
    alpha: Option<minmax_core::Coefficients>,
}

fn load(run: &Run) -> Result<Loaded, Failure> {
    let flags = &run.flags;
    if let Some(d) = run.demo {
        let (mut decomp, kind) = demo::instance(d)?;
        if let Some(mode) = flags.mode() {
            decomp = SpectralDecomposition::new(decomp.q.clone(), decomp.lambdas.clone(), mode, decomp.pairing.clone())?;
        }
        let table = decomp.basis_problem(flags.basis().unwrap_or(kind))?;
        return Ok(Loaded { table, decomp, alpha: None });
    }
    let path = run.input.as_ref().expect("clap requires input or --demo");
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let schema = |e: serde_json::Error| Failure::Input(format!("{}: {e}", path.display()));
    if value.get("Q").is_some() {
        let spec: MatrixSpec = serde_json::from_value(value).map_err(schema)?;
        let mut decomp = spec.to_decomposition()?;
        if let Some(mode) = flags.mode() {
            decomp = SpectralDecomposition::new(decomp.q, decomp.lambdas, mode, decomp.pairing)?;
        }
        let kind = flags
            .basis()
            .or_else(|| spec.basis())
            .ok_or_else(|| Failure::Input("matrix input needs a basis: `kind`/`k` in the file or --kind/--k".into()))?;
        let table = decomp.basis_problem(kind)?;
        Ok(Loaded { table, decomp, alpha: None })
    } else if value.get("U").is_some() {
        let spec: CommutingSpec = serde_json::from_value(value).map_err(schema)?;
        let family = spec.to_family()?;
        let mode = flags.mode().unwrap_or(FieldMode::Complex);
        let (_, table, decomp) = build_commuting_problem(&family, mode)?;
        Ok(Loaded { table, decomp, alpha: None })
    } else {
        let mut spec: ProblemSpec = serde_json::from_value(value).map_err(schema)?;
        if let Some(mode) = flags.mode() {
            spec.mode = mode;
        }
        let table = spec.to_table()?;
        // the problem as a diagonal matrix, one eigenvalue per listed point
        let gamma = table.gamma();
        let lambdas: Vec<Cx> = (0..gamma.spectrum_len()).map(|j| gamma.points()[gamma.owner(j)]).collect();
        let decomp = SpectralDecomposition::diagonal(lambdas, table.mode())?;
        Ok(Loaded { table, decomp, alpha: spec.alpha() })
    }
}

struct Clock {
    enabled: bool,
    start: Instant,
    stages: BTreeMap<String, f64>,
}

impl Clock {
    fn new(enabled: bool) -> Self {
        Clock { enabled, start: Instant::now(), stages: BTreeMap::new() }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.stages.insert(stage.to_string(), (now - self.start).as_secs_f64() * 1e3);
        self.start = now;
    }

    fn finish(self, report: &mut RunReport) {
        if self.enabled {
            report.timings = Some(self.stages);
        }
    }
}

fn execute(name: &str, run: &Run) -> Result<(RunReport, Option<Failure>), Failure> {
    let flags = &run.flags;
    let opts = flags.options();
    let mut clock = Clock::new(flags.timings);
    let loaded = load(run)?;
    clock.lap("load");
    let table = &loaded.table;

    match name {
        "solve" => {
            let raw = solve_minimax(table, &opts.minimax)?;
            if !raw.converged() {
                let mut report = RunReport::new(name, &raw);
                clock.lap("solve");
                clock.finish(&mut report);
                let msg = format!("no convergence after {} iterations (gap {:e})", raw.iterations(), raw.gap());
                return Ok((report, Some(Failure::Convergence(msg))));
            }
            let sol = pipeline::solve(table, &opts)?;
            clock.lap("solve");
            let mut report = RunReport::new(name, &sol);
            clock.finish(&mut report);
            Ok((report, None))
        }
        "certify" => {
            let mut sol = pipeline::solve(table, &opts)?;
            if let Some(alpha) = loaded.alpha {
                if alpha.len() != table.k() {
                    return Err(Failure::Input(format!("alpha has {} entries, expected {}", alpha.len(), table.k())));
                }
                sol = sol.with_alpha(table, alpha, opts.minimax.gap_tol)?;
            }
            clock.lap("solve");
            let certified = pipeline::certify_solution(sol, table, &opts)?;
            clock.lap("certify");
            let mut report = RunReport::new(name, &certified.solution);
            report.checks = certified
                .report
                .checks
                .iter()
                .filter(|c| c.required)
                .map(|c| Verdict { name: c.name.clone(), passed: c.passed, residual: c.value })
                .collect();
            report.diagnostics = certified
                .report
                .checks
                .iter()
                .filter(|c| !c.required)
                .map(|c| Verdict { name: c.name.clone(), passed: c.passed, residual: c.value })
                .collect();
            report.warnings.extend(certified.prune_warning.clone());
            report.active_tol = Some(certified.active_tol);
            report.certificate = Some(certified.certificate);
            clock.finish(&mut report);
            let failure = (!certified.report.passed).then(|| Failure::Check("not optimal: certificate checks failed".into()));
            Ok((report, failure))
        }
        "worstcase" | "verify" | "commuting" | "demo" => {
            let m = pipeline::run_matrix(&loaded.decomp, table, &opts)?;
            clock.lap("pipeline");
            let mut report = RunReport::new(name, &m.certified.solution);
            let all = pipeline::verdicts(&m, EQUALITY_TOL);
            if name == "worstcase" {
                report.diagnostics = all;
            } else {
                let (checks, diagnostics): (Vec<_>, Vec<_>) =
                    all.into_iter().partition(|v| v.name == "attained" || v.name.starts_with("certificate."));
                report.checks = checks;
                report.diagnostics = diagnostics;
                if flags.trials > 0 {
                    let (best, _) = sample_maxmin(&loaded.decomp, table, flags.trials, flags.seed, None)?;
                    clock.lap("sampling");
                    let delta = m.delta();
                    report.diagnostics.push(Verdict {
                        name: "sampling".into(),
                        passed: best <= delta + EQUALITY_TOL * delta.max(1.0),
                        residual: best,
                    });
                }
            }
            report.warnings.extend(m.certified.prune_warning.clone());
            report.active_tol = Some(m.certified.active_tol);
            report.certificate = Some(m.certified.certificate);
            report.worst_case = Some(m.worst);
            clock.finish(&mut report);
            let failure = (!report.passed()).then(|| {
                let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                Failure::Check(format!("verification failed: {}", failed.join(", ")))
            });
            Ok((report, failure))
        }
        _ => unreachable!("unknown command {name}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, run) = match cli.command {
        Command::Solve(r) => ("solve", r),
        Command::Certify(r) => ("certify", r),
        Command::Worstcase(r) => ("worstcase", r),
        Command::Verify(r) => ("verify", r),
        Command::Commuting(r) => ("commuting", r),
        Command::Demo { name, flags } => ("demo", Run { input: None, demo: Some(name), flags }),
    };
    let outcome = execute(name, &run);
    let (report, failure) = match outcome {
        Ok(pair) => pair,
        Err(f) => {
            eprintln!("minmax {name}: {}", f.message());
            return ExitCode::from(f.code());
        }
    };
    match to_json(&report) {
        Ok(json) => println!("{json}"),
        Err(e) => {
            eprintln!("minmax {name}: cannot serialize report: {e}");
            return ExitCode::from(3);
        }
    }
    match failure {
        Some(f) => {
            eprintln!("minmax {name}: {}", f.message());
            ExitCode::from(f.code())
        }
        None => ExitCode::SUCCESS,
    }
}

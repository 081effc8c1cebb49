//! Report layout and the fixed-precision JSON writer.

use std::collections::BTreeMap;
use std::io::{self, Write};

use minmax_core::pipeline::Verdict;
use minmax_core::problem::{to_pair, Pair};
use minmax_core::{Certificate, MinimaxSolution, WorstCaseVector};
use serde::Serialize;
use serde_json::ser::Formatter;

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub delta: f64,
    pub lower_bound: f64,
    pub converged: bool,
    pub iterations: usize,
    pub alpha: Vec<Pair>,
    pub certificate: Option<Certificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub active_tol: Option<f64>,
    pub worst_case: Option<WorstCaseVector>,
    pub checks: Vec<Verdict>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<Verdict>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    /// Milliseconds per stage; only with `--timings`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
}

impl RunReport {
    pub fn new(command: &str, sol: &MinimaxSolution) -> Self {
        RunReport {
            command: command.to_string(),
            delta: sol.delta(),
            lower_bound: sol.lower_bound(),
            converged: sol.converged(),
            iterations: sol.iterations(),
            alpha: sol.alpha_star().as_slice().iter().copied().map(to_pair).collect(),
            certificate: None,
            active_tol: None,
            worst_case: None,
            checks: Vec::new(),
            diagnostics: Vec::new(),
            warnings: Vec::new(),
            timings: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Compact JSON with every float written as `d.dddddddddddddddde±x`.
struct Fixed17;

impl Formatter for Fixed17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Fixed17);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

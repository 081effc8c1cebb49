//! Optimality certificates for the discrete minimax problem.
//!
//! A polynomial `p*` is a best approximation on Γ exactly when there are
//! distinct extremal points `μ_1..μ_ℓ` (where `|f − p*|` attains its
//! maximum) and positive weights `ω_j` summing to one with
//!
//! ```text
//! Σ_j ω_j [f(μ_j) − p*(μ_j)] conj(φ_i(μ_j)) = 0,   i = 1..k.
//! ```
//!
//! Equivalently, the origin lies in the convex hull of the vectors
//! `r(μ) conj(φ(μ))`, `μ ∈ Γ(p*)`. This module recovers such weights from a
//! solver result, verifies them, and reduces their support.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minimax::{dual_lower_bound, MinimaxSolution};
use crate::numerics::{least_squares, nnls, Cx, DenseMatrix, HouseholderQr};
use crate::problem::{EvaluationTable, FieldMode};

pub const DEFAULT_ACTIVE_TOL: f64 = 1e-8;
pub const DEFAULT_COND_TOL: f64 = 1e-8;

/// Extremal points and convex weights satisfying the orthogonality
/// condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Indices into Γ.
    pub support: Vec<usize>,
    pub omega: Vec<f64>,
    /// `max_i |Σ_j ω_j r(μ_j) conj(φ_i(μ_j))|`.
    pub condition_residual: f64,
    pub ell: usize,
    #[serde(skip)]
    pub field_mode: FieldMode,
    /// Residuals `f(μ_j) − p*(μ_j)` at the support points.
    #[serde(skip)]
    pub support_residuals: Vec<Cx>,
}

impl Certificate {
    fn new(support: Vec<usize>, omega: Vec<f64>, residuals: &[Cx], table: &EvaluationTable) -> Self {
        let support_residuals: Vec<Cx> = support.iter().map(|&j| residuals[j]).collect();
        let condition_residual = condition_residual(table, &support, &omega, &support_residuals);
        Certificate {
            ell: support.len(),
            support,
            omega,
            condition_residual,
            field_mode: table.mode(),
            support_residuals,
        }
    }

    /// Weights extended by zeros to all of Γ.
    pub fn full_weights(&self, n: usize) -> Vec<f64> {
        let mut w = vec![0.0; n];
        for (&j, &o) in self.support.iter().zip(&self.omega) {
            w[j] = o;
        }
        w
    }

    /// Support points as complex numbers.
    pub fn points(&self, table: &EvaluationTable) -> Vec<Cx> {
        self.support.iter().map(|&j| table.gamma().points()[j]).collect()
    }
}

/// `Σ_j ω_j r_j conj(Φ_{μ_j, i})` for every basis function.
pub fn moments(table: &EvaluationTable, support: &[usize], omega: &[f64], residuals: &[Cx]) -> Vec<Cx> {
    (0..table.k())
        .map(|i| {
            support
                .iter()
                .zip(omega)
                .zip(residuals)
                .map(|((&j, w), r)| w * r * table.phi()[(j, i)].conj())
                .sum()
        })
        .collect()
}

fn condition_residual(table: &EvaluationTable, support: &[usize], omega: &[f64], residuals: &[Cx]) -> f64 {
    moments(table, support, omega, residuals).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Indices where `|r_j| ≥ δ (1 − active_tol)`.
pub fn extract_active_set(sol: &MinimaxSolution, active_tol: f64) -> Vec<usize> {
    let threshold = sol.delta() * (1.0 - active_tol);
    sol.residuals()
        .iter()
        .enumerate()
        .filter(|(_, r)| r.norm() >= threshold)
        .map(|(j, _)| j)
        .collect()
}

/// Real `(2k + 1) x ℓ` system whose nonnegative solutions are the
/// certificate weights: real and imaginary parts of `r_j conj(Φ_{j,i})`,
/// then a row of ones for the normalization.
fn moment_system(table: &EvaluationTable, support: &[usize], residuals: &[Cx]) -> DenseMatrix {
    let k = table.k();
    let mut m = DenseMatrix::zeros(2 * k + 1, support.len());
    for (col, (&j, r)) in support.iter().zip(residuals).enumerate() {
        for i in 0..k {
            let g = r * table.phi()[(j, i)].conj();
            m[(2 * i, col)] = Cx::new(g.re, 0.0);
            m[(2 * i + 1, col)] = Cx::new(g.im, 0.0);
        }
        m[(2 * k, col)] = Cx::new(1.0, 0.0);
    }
    m
}

/// Recover positive weights on `active` satisfying the orthogonality
/// condition, by nonnegative least squares on the moment system.
///
/// Fails with [`Error::NotOptimal`] when the best nonnegative weights leave
/// a condition residual above `cond_tol · max(1, δ)`; by the
/// characterization theorem this proves the solution is not a best
/// approximation.
pub fn recover_weights(
    sol: &MinimaxSolution,
    table: &EvaluationTable,
    active: &[usize],
    cond_tol: f64,
) -> Result<Certificate> {
    if active.is_empty() {
        return Err(Error::invalid("empty active set"));
    }
    if active.iter().any(|&j| j >= table.n()) {
        return Err(Error::dim("active index out of range"));
    }
    let delta = sol.delta();
    if delta == 0.0 {
        return Ok(Certificate::new(vec![active[0]], vec![1.0], sol.residuals(), table));
    }
    // residuals scaled to unit modulus so the moment rows and the
    // normalization row are comparable for any δ
    let residuals: Vec<Cx> = active.iter().map(|&j| sol.residuals()[j] / delta).collect();
    let system = moment_system(table, active, &residuals);
    let mut rhs = vec![0.0; system.rows()];
    rhs[system.rows() - 1] = 1.0;
    let bound = cond_tol * delta.max(1.0);

    let (x, _) = nnls(&system, &rhs)?;
    let vertex = to_certificate(active, &x, sol, table);

    // The minimum-norm solution of the equality system is the most evenly
    // spread choice when the weights are not unique; take it when it is
    // nonnegative and at least as accurate as the NNLS vertex.
    let rhs_c: Vec<Cx> = rhs.iter().map(|&v| Cx::new(v, 0.0)).collect();
    let central: Vec<f64> = least_squares(&system, &rhs_c)?.iter().map(|z| z.re).collect();
    let phi_max = table.phi().as_slice().iter().map(|z| z.norm()).fold(1.0, f64::max);
    let slack = 1e-12 * delta * phi_max;
    let reference = vertex.as_ref().map_or(f64::INFINITY, |c| c.condition_residual);
    let central = to_certificate(active, &central, sol, table).filter(|c| c.condition_residual <= reference + slack);

    match central.or(vertex) {
        Some(cert) if cert.condition_residual <= bound => Ok(cert),
        Some(cert) => Err(Error::NotOptimal { residual: cert.condition_residual }),
        None => Err(Error::NotOptimal { residual: f64::INFINITY }),
    }
}

/// Normalized certificate from raw weights on `active`; `None` if any weight
/// is negative or all vanish.
fn to_certificate(active: &[usize], x: &[f64], sol: &MinimaxSolution, table: &EvaluationTable) -> Option<Certificate> {
    if x.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return None;
    }
    let total: f64 = x.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return None;
    }
    let (support, omega): (Vec<usize>, Vec<f64>) = active
        .iter()
        .zip(x)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&j, &w)| (j, w / total))
        .unzip();
    Some(Certificate::new(support, omega, sol.residuals(), table))
}

/// Largest support a reduced certificate needs: `k + 1` for real data on a
/// real point set, `2k + 1` otherwise.
pub fn support_bound(table: &EvaluationTable) -> usize {
    let k = table.k();
    let all_real = table.mode() == FieldMode::Real
        && table.gamma().points().iter().all(|z| z.im == 0.0);
    if all_real {
        k + 1
    } else {
        2 * k + 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PruneOutcome {
    pub certificate: Certificate,
    /// Set when a null direction could not be decided numerically; the
    /// certificate is then returned as it was at that point.
    pub warning: Option<String>,
}

/// Null-space test thresholds on the pivoted QR diagonal of the transposed
/// moment system (relative to its leading entry).
const NULL_CLEAR: f64 = 1e-12;
const NULL_AMBIGUOUS: f64 = 1e-8;

/// Reduce the support to at most [`support_bound`] points.
///
/// While the support is too large, a vector `d` with `Σ d_j = 0` and
/// `Σ d_j r_j conj(Φ_{j,i}) = 0` is taken from the null space of the moment
/// system, oriented so that its last nonzero entry is positive, and the
/// weights move along `−d` until one of them vanishes. That point is
/// dropped.
pub fn caratheodory_prune(cert: &Certificate, table: &EvaluationTable) -> PruneOutcome {
    let bound = support_bound(table);
    let mut support = cert.support.clone();
    let mut omega = cert.omega.clone();
    let mut residuals = cert.support_residuals.clone();
    let mut warning = None;

    while support.len() > bound {
        let m = moment_system(table, &support, &residuals);
        let qr = HouseholderQr::new(&m.transpose(), true);
        let rows = m.rows();
        let l = support.len();
        let lead = qr.r()[(0, 0)].norm();
        let diag = |i: usize| if i < rows.min(l) { qr.r()[(i, i)].norm() } else { 0.0 };
        let rank = qr.rank(NULL_CLEAR);
        if rank >= l {
            warning = Some(format!("no null direction with {l} support points"));
            break;
        }
        if (rank..rows.min(l)).any(|i| diag(i) > NULL_CLEAR * lead && diag(i) <= NULL_AMBIGUOUS * lead)
            || (rank > 0 && diag(rank - 1) <= NULL_AMBIGUOUS * lead)
        {
            warning = Some("numerically ambiguous null direction".to_string());
            break;
        }
        let q = qr.q();
        let mut d: Vec<f64> = q.column(l - 1).iter().map(|z| z.re).collect();
        let dmax = d.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let last = d.iter().rposition(|v| v.abs() > 1e-12 * dmax).unwrap_or(l - 1);
        if d[last] < 0.0 {
            d.iter_mut().for_each(|v| *v = -*v);
        }
        let (drop, step) = d
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 1e-12 * dmax)
            .map(|(j, &v)| (j, omega[j] / v))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .expect("oriented null vector has a positive entry");
        for (w, v) in omega.iter_mut().zip(&d) {
            *w -= step * v;
        }
        omega[drop] = 0.0;
        // ties vanish together
        let wmax = omega.iter().copied().fold(0.0, f64::max);
        omega.iter_mut().filter(|w| **w <= 1e-13 * wmax).for_each(|w| *w = 0.0);
        let keep: Vec<usize> = (0..l).filter(|&j| omega[j] > 0.0).collect();
        support = keep.iter().map(|&j| support[j]).collect();
        residuals = keep.iter().map(|&j| residuals[j]).collect();
        omega = keep.iter().map(|&j| omega[j]).collect();
        let total: f64 = omega.iter().sum();
        omega.iter_mut().for_each(|w| *w /= total);
    }

    let condition_residual = condition_residual(table, &support, &omega, &residuals);
    PruneOutcome {
        certificate: Certificate {
            ell: support.len(),
            support,
            omega,
            condition_residual,
            field_mode: cert.field_mode,
            support_residuals: residuals,
        },
        warning,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    /// Informational checks do not affect the overall verdict.
    pub required: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl CertificateReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Check a certificate against a solution:
///
/// * `active`: every support point has `|r| ≥ δ(1 − tol)`;
/// * `positive`: all weights positive; `normalized`: `|Σω − 1| ≤ 1e-12`;
/// * `distinct`: support indices pairwise distinct;
/// * `condition`: orthogonality residual `≤ tol · max(1, δ)`;
/// * `duality` (informational): the weighted least-squares error of `ω`
///   equals δ within `tol · max(1, δ)`;
/// * `support_size` (informational): `ℓ` against the Carathéodory bound.
pub fn verify_certificate(
    cert: &Certificate,
    sol: &MinimaxSolution,
    table: &EvaluationTable,
    tol: f64,
) -> CertificateReport {
    let n = table.n();
    let delta = sol.delta();
    let scale = delta.max(1.0);
    let mut checks = Vec::new();
    let mut push = |name: &str, passed: bool, value: f64, required: bool| {
        checks.push(Check { name: name.to_string(), passed, value, required });
    };

    let in_range = cert.support.iter().all(|&j| j < n) && cert.support.len() == cert.omega.len();
    push("dimensions", in_range, cert.support.len() as f64, true);
    if !in_range {
        return CertificateReport { passed: false, checks };
    }

    let worst_gap = cert
        .support
        .iter()
        .map(|&j| (delta - sol.residuals()[j].norm()) / delta.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    push("active", worst_gap <= tol, worst_gap, true);

    let min_w = cert.omega.iter().copied().fold(f64::INFINITY, f64::min);
    push("positive", min_w > 0.0, min_w, true);

    let sum_err = (cert.omega.iter().sum::<f64>() - 1.0).abs();
    push("normalized", sum_err <= 1e-12, sum_err, true);

    let mut sorted = cert.support.clone();
    sorted.sort_unstable();
    sorted.dedup();
    push("distinct", sorted.len() == cert.support.len(), sorted.len() as f64, true);

    let res: Vec<Cx> = cert.support.iter().map(|&j| sol.residuals()[j]).collect();
    let cond = condition_residual(table, &cert.support, &cert.omega, &res);
    push("condition", cond <= tol * scale, cond, true);

    let duality = if min_w >= 0.0 && sum_err <= 1e-10 {
        let mut w = cert.full_weights(n);
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        dual_lower_bound(table, &w).map(|lb| (delta - lb).abs()).unwrap_or(f64::INFINITY)
    } else {
        f64::INFINITY
    };
    push("duality", duality <= tol * scale, duality, false);

    let bound = support_bound(table);
    push("support_size", cert.support.len() <= bound, cert.support.len() as f64, false);

    let passed = checks.iter().all(|c| c.passed || !c.required);
    CertificateReport { passed, checks }
}

//! End-to-end runs: solve, certify, build the worst-case vector, and check
//! the matrix equality.

use serde::{Deserialize, Serialize};

use crate::certificate::{
    caratheodory_prune, extract_active_set, recover_weights, verify_certificate, Certificate, CertificateReport,
    DEFAULT_ACTIVE_TOL, DEFAULT_COND_TOL,
};
use crate::error::{Error, Result};
use crate::matrix_bridge::{best_vector_approx, matrix_residual_norm, SpectralDecomposition};
use crate::minimax::{solve_minimax, MinimaxOptions, MinimaxSolution};
use crate::numerics::{Cx, ZERO};
use crate::problem::{EvaluationTable, FieldMode};
use crate::worstcase::{
    complex_worst_vector, real_worst_vector, realize_polynomial, symmetrize_certificate, SymmetrizedCertificate,
    WorstCaseVector, DEFAULT_PAIR_TOL,
};

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOptions {
    pub minimax: MinimaxOptions,
    pub active_tol: f64,
    pub cond_tol: f64,
    pub prune: bool,
    pub pair_tol: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            minimax: MinimaxOptions::default(),
            active_tol: DEFAULT_ACTIVE_TOL,
            cond_tol: DEFAULT_COND_TOL,
            prune: false,
            pair_tol: DEFAULT_PAIR_TOL,
        }
    }
}

/// Minimax solution; in real mode with real coefficients.
///
/// Non-convergence is an error.
/// When `δ < 1` the run is continued from the final Lawson weights until
/// the gap is also small relative to δ; if that fails the first result is
/// kept.
pub fn solve(table: &EvaluationTable, opts: &PipelineOptions) -> Result<MinimaxSolution> {
    let mut sol = solve_minimax(table, &opts.minimax)?;
    if !sol.converged() {
        return Err(Error::Convergence { iterations: sol.iterations(), achieved: sol.gap() });
    }
    let relative = opts.minimax.gap_tol * sol.delta().max(RELATIVE_FLOOR);
    if sol.delta() < 1.0 && sol.gap() > relative {
        let refined = MinimaxOptions {
            gap_tol: relative,
            initial_weights: Some(sol.lawson_weights().to_vec()),
            ..opts.minimax.clone()
        };
        let again = solve_minimax(table, &refined)?;
        if again.converged() && again.gap() < sol.gap() {
            sol = again;
        }
    }
    realize(sol, table, opts)
}

/// Below this δ the gap is not tightened further.
const RELATIVE_FLOOR: f64 = 1e-12;

fn realize(sol: MinimaxSolution, table: &EvaluationTable, opts: &PipelineOptions) -> Result<MinimaxSolution> {
    if table.mode() != FieldMode::Real {
        return Ok(sol);
    }
    let alpha = realize_polynomial(sol.alpha_star(), table)?;
    sol.with_alpha(table, alpha, opts.minimax.gap_tol)
}

#[derive(Clone, Debug)]
pub struct Certified {
    pub solution: MinimaxSolution,
    pub certificate: Certificate,
    pub report: CertificateReport,
    pub prune_warning: Option<String>,
    /// Active tolerance the certificate was recovered with.
    pub active_tol: f64,
}

/// Widest active tolerance tried by [`certify_solution`].
pub const MAX_ACTIVE_TOL: f64 = 1e-4;

/// `condition_residual / (δ max|Φ|)` over the support: the condition
/// residual on the scale of its terms.
pub fn relative_condition(cert: &Certificate, sol: &MinimaxSolution, table: &EvaluationTable) -> f64 {
    let phi_max = cert
        .support
        .iter()
        .flat_map(|&j| table.phi().row(j).iter().map(|z| z.norm()))
        .fold(0.0, f64::max);
    let scale = sol.delta() * phi_max;
    if scale > 0.0 {
        cert.condition_residual / scale
    } else {
        0.0
    }
}

/// Recover, optionally prune, and verify a certificate for `sol`.
///
/// Starts at `opts.active_tol`; while the recovered weights satisfy the
/// condition only on an absolute scale (relative condition above
/// `cond_tol`), the active tolerance is widened tenfold up to
/// [`MAX_ACTIVE_TOL`]. Verification uses the tolerance finally chosen.
pub fn certify_solution(sol: MinimaxSolution, table: &EvaluationTable, opts: &PipelineOptions) -> Result<Certified> {
    let mut active_tol = opts.active_tol;
    let mut certificate = recover_weights(&sol, table, &extract_active_set(&sol, active_tol), opts.cond_tol)?;
    let mut tol = active_tol;
    while relative_condition(&certificate, &sol, table) > opts.cond_tol && tol * 10.0 <= MAX_ACTIVE_TOL {
        tol *= 10.0;
        let active = extract_active_set(&sol, tol);
        if let Ok(wider) = recover_weights(&sol, table, &active, opts.cond_tol) {
            if relative_condition(&wider, &sol, table) < relative_condition(&certificate, &sol, table) {
                certificate = wider;
                active_tol = tol;
            }
        }
    }
    let mut prune_warning = None;
    if opts.prune {
        let out = caratheodory_prune(&certificate, table);
        certificate = out.certificate;
        prune_warning = out.warning;
    }
    let report = verify_certificate(&certificate, &sol, table, opts.cond_tol.max(active_tol));
    Ok(Certified { solution: sol, certificate, report, prune_warning, active_tol })
}

pub fn certify(table: &EvaluationTable, opts: &PipelineOptions) -> Result<Certified> {
    certify_solution(solve(table, opts)?, table, opts)
}

/// Everything known about one matrix instance.
#[derive(Clone, Debug)]
pub struct MatrixRun {
    pub certified: Certified,
    pub symmetrized: Option<SymmetrizedCertificate>,
    pub worst: WorstCaseVector,
    /// `min_α ‖f(A)v* − Σ α_i φ_i(A)v*‖`.
    pub vector_value: f64,
    /// `‖f(A) − p*(A)‖₂`.
    pub matrix_norm: f64,
    /// `max_i |⟨f(A)v* − p*(A)v*, φ_i(A)v*⟩|`.
    pub orthogonality: f64,
    /// Orthogonality residual of the symmetrized certificate (real mode).
    pub symmetrized_condition: f64,
}

impl MatrixRun {
    pub fn delta(&self) -> f64 {
        self.certified.solution.delta()
    }
}

/// Solve on the spectrum, certify, and build `v*` (the real construction
/// in real mode).
pub fn run_matrix(decomp: &SpectralDecomposition, table: &EvaluationTable, opts: &PipelineOptions) -> Result<MatrixRun> {
    let certified = certify(table, opts)?;
    let gamma = table.gamma();
    let (worst, symmetrized) = match table.mode() {
        FieldMode::Complex => (complex_worst_vector(&certified.certificate, decomp, gamma)?, None),
        FieldMode::Real => {
            let sym = symmetrize_certificate(&certified.certificate, gamma, opts.pair_tol)?;
            (real_worst_vector(&sym, decomp, gamma)?, Some(sym))
        }
    };
    let alpha = certified.solution.alpha_star().as_slice();
    let (vector_value, _) = best_vector_approx(decomp, table, &worst.v_star)?;
    let matrix_norm = matrix_residual_norm(decomp, table, alpha)?;
    let orthogonality = orthogonality(decomp, table, alpha, &worst.v_star)?;
    let symmetrized_condition = symmetrized.as_ref().map_or(0.0, |s| s.condition_residual(table));
    Ok(MatrixRun { certified, symmetrized, worst, vector_value, matrix_norm, orthogonality, symmetrized_condition })
}

/// `max_i |⟨f(A)v − p(A)v, φ_i(A)v⟩|`.
pub fn orthogonality(decomp: &SpectralDecomposition, table: &EvaluationTable, alpha: &[Cx], v: &[Cx]) -> Result<f64> {
    let (f, phi) = decomp.expanded(table)?;
    let w = decomp.q.adjoint_matvec(v);
    let r: Vec<Cx> = (0..decomp.n())
        .map(|j| (f[j] - phi.row(j).iter().zip(alpha).map(|(p, a)| p * a).sum::<Cx>()) * w[j])
        .collect();
    Ok((0..table.k())
        .map(|i| (0..decomp.n()).fold(ZERO, |s, j| s + (phi[(j, i)] * w[j]).conj() * r[j]).norm())
        .fold(0.0, f64::max))
}

/// One named pass/fail line of a verification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
}

/// Checks of the matrix equality: certificate checks, `|attained − δ|`,
/// `|vector value − δ|`, `|‖f(A) − p*(A)‖ − δ|`, orthogonality, unit norm,
/// and realness of `v*` in real mode.
pub fn verdicts(run: &MatrixRun, tol: f64) -> Vec<Verdict> {
    let delta = run.delta();
    let scale = delta.max(1.0);
    let mut out: Vec<Verdict> = run
        .certified
        .report
        .checks
        .iter()
        .filter(|c| c.required)
        .map(|c| Verdict { name: format!("certificate.{}", c.name), passed: c.passed, residual: c.value })
        .collect();
    let mut push = |name: &str, residual: f64, bound: f64| {
        out.push(Verdict { name: name.into(), passed: residual <= bound, residual });
    };
    push("attained", (run.worst.attained - delta).abs(), tol * scale);
    push("vector_value", (run.vector_value - delta).abs(), tol * scale);
    push("matrix_norm", (run.matrix_norm - delta).abs(), tol * scale);
    push("orthogonality", run.orthogonality, 1e-10 * scale);
    push("unit_norm", (run.worst.norm() - 1.0).abs(), 1e-12);
    if let Some(sym) = &run.symmetrized {
        push("real_vector", run.worst.max_imag(), 1e-10);
        let total = sym.omega_tilde.iter().sum::<f64>();
        push("symmetrized_sum", (total - 1.0).abs(), 1e-12);
        push("symmetrized_condition", run.symmetrized_condition, 1e-10 * scale);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{random_unitary, seeded_rng, DenseMatrix};
    use crate::problem::BasisKind;

    fn c(re: f64, im: f64) -> Cx {
        Cx::new(re, im)
    }

    #[test]
    fn rotation_instance() {
        let a = DenseMatrix::from_real_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        let h = 1.0 / 2f64.sqrt();
        let q = DenseMatrix::from_rows(&[vec![c(h, 0.0), c(h, 0.0)], vec![c(0.0, -h), c(0.0, h)]]).unwrap();
        let d = SpectralDecomposition::new(q, vec![c(0.0, 1.0), c(0.0, -1.0)], FieldMode::Real, Some(vec![1, 0])).unwrap();
        assert!((&d.matrix() - &a).frobenius_norm() < 1e-15);
        let t = d.basis_problem(BasisKind::Gmres(1)).unwrap();
        let run = run_matrix(&d, &t, &PipelineOptions::default()).unwrap();
        assert!((run.delta() - 1.0).abs() < 1e-12);
        assert!(verdicts(&run, 1e-8).iter().all(|v| v.passed), "{:?}", verdicts(&run, 1e-8));
        assert!(run.worst.max_imag() == 0.0);
    }

    #[test]
    fn random_complex_instance() {
        let mut rng = seeded_rng(11, 0);
        let q = random_unitary(&mut rng, 8, false);
        let lambdas: Vec<Cx> = (0..8).map(|j| Cx::from_polar(0.3 + 0.08 * j as f64, 0.7 * j as f64)).collect();
        let d = SpectralDecomposition::new(q, lambdas, FieldMode::Complex, None).unwrap();
        let t = d.basis_problem(BasisKind::Gmres(3)).unwrap();
        let run = run_matrix(&d, &t, &PipelineOptions::default()).unwrap();
        let v = verdicts(&run, 1e-8);
        assert!(v.iter().all(|v| v.passed), "{v:?}");
    }

    #[test]
    fn non_convergence_is_reported() {
        let d = SpectralDecomposition::diagonal((1..=6).map(|x| c(x as f64, 0.5 * x as f64)).collect(), FieldMode::Complex)
            .unwrap();
        let t = d.basis_problem(BasisKind::Gmres(2)).unwrap();
        let mut opts = PipelineOptions::default();
        opts.minimax.max_iter = 2;
        opts.minimax.polish = false;
        assert!(matches!(solve(&t, &opts), Err(Error::Convergence { .. })));
    }
}

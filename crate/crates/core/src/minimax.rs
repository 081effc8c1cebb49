//! Discrete minimax approximation `min_α max_j |f(λ_j) − (Φα)_j|` by Lawson
//! iteration.
//!
//! Each step solves a weighted least-squares problem and multiplies the
//! weights by the residual moduli. The weighted least-squares error is a
//! lower bound on the optimum for any convex weights, and the maximum
//! residual is an upper bound, so every iterate carries a certified gap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{weighted_least_squares, Cx};
use crate::problem::{Coefficients, EvaluationTable};

/// Window (in iterations) over which the gap must shrink by
/// [`STAGNATION_FACTOR`] before the accelerated update kicks in.
const STAGNATION_WINDOW: usize = 50;
const STAGNATION_FACTOR: f64 = 0.999;
/// Number of iterations run with the squared-residual update.
const ACCELERATED_STEPS: usize = 10;
const ACCELERATED_EXPONENT: i32 = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimaxOptions {
    pub gap_tol: f64,
    pub max_iter: usize,
    pub weight_floor: f64,
    /// Starting weights; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_weights: Option<Vec<f64>>,
    /// Enables the squared-residual update on stagnation.
    pub accelerate: bool,
    /// Refine the Lawson result by Newton's method on the optimality
    /// system of the near-active points.
    pub polish: bool,
}

impl Default for MinimaxOptions {
    fn default() -> Self {
        MinimaxOptions {
            gap_tol: 1e-10,
            max_iter: 100_000,
            weight_floor: 1e-300,
            initial_weights: None,
            accelerate: true,
            polish: true,
        }
    }
}

/// Result of [`solve_minimax`].
#[derive(Clone, Debug, PartialEq)]
pub struct MinimaxSolution {
    alpha_star: Coefficients,
    residuals: Vec<Cx>,
    delta: f64,
    lower_bound: f64,
    lawson_weights: Vec<f64>,
    /// Convex weights whose weighted least-squares error is `lower_bound`.
    dual_weights: Vec<f64>,
    iterations: usize,
    converged: bool,
    polished: bool,
    /// Weighted least-squares error of every iteration.
    history: Vec<f64>,
    /// Iterations that used the accelerated update.
    accelerated: Vec<bool>,
}

impl MinimaxSolution {
    /// Solution record for given coefficients; residuals and `delta` are
    /// recomputed from the table.
    pub fn from_coefficients(
        table: &EvaluationTable,
        alpha: Coefficients,
        lower_bound: f64,
        lawson_weights: Vec<f64>,
    ) -> Result<Self> {
        if alpha.len() != table.k() {
            return Err(Error::dim(format!(
                "{} coefficients for {} basis functions",
                alpha.len(),
                table.k()
            )));
        }
        if lawson_weights.len() != table.n() {
            return Err(Error::dim("one weight per point required"));
        }
        let residuals = table.residuals(alpha.as_slice());
        let delta = sup_norm(&residuals);
        Ok(MinimaxSolution {
            alpha_star: alpha,
            residuals,
            delta,
            lower_bound: lower_bound.min(delta),
            dual_weights: lawson_weights.clone(),
            lawson_weights,
            iterations: 0,
            converged: false,
            polished: false,
            history: Vec::new(),
            accelerated: Vec::new(),
        })
    }

    /// The same record with new coefficients (the lower bound and weights
    /// are kept; the convergence flag is recomputed against `gap_tol`).
    pub fn with_alpha(&self, table: &EvaluationTable, alpha: Coefficients, gap_tol: f64) -> Result<Self> {
        let mut s = Self::from_coefficients(table, alpha, self.lower_bound, self.lawson_weights.clone())?;
        s.iterations = self.iterations;
        s.dual_weights = self.dual_weights.clone();
        s.polished = self.polished;
        s.history = self.history.clone();
        s.accelerated = self.accelerated.clone();
        s.converged = self.converged && s.gap() <= gap_tol * s.delta.max(1.0);
        Ok(s)
    }

    pub fn alpha_star(&self) -> &Coefficients {
        &self.alpha_star
    }

    /// `‖f − p*‖_Γ`.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `f(λ_j) − p*(λ_j)`.
    pub fn residuals(&self) -> &[Cx] {
        &self.residuals
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    pub fn gap(&self) -> f64 {
        self.delta - self.lower_bound
    }

    pub fn lawson_weights(&self) -> &[f64] {
        &self.lawson_weights
    }

    /// Weights certifying [`lower_bound`](Self::lower_bound); the polished
    /// optimality weights when polishing succeeded, else the Lawson weights.
    pub fn dual_weights(&self) -> &[f64] {
        &self.dual_weights
    }

    pub fn polished(&self) -> bool {
        self.polished
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn accelerated_steps(&self) -> &[bool] {
        &self.accelerated
    }
}

fn sup_norm(r: &[Cx]) -> f64 {
    r.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn weighted_error(omega: &[f64], r: &[Cx]) -> f64 {
    omega.iter().zip(r).map(|(w, z)| w * z.norm_sqr()).sum::<f64>().sqrt()
}

/// `min_α (Σ ω_j |f(λ_j) − (Φα)_j|²)^{1/2}` for convex weights `ω`.
///
/// By Cauchy-Schwarz this never exceeds the minimax optimum.
pub fn dual_lower_bound(table: &EvaluationTable, omega: &[f64]) -> Result<f64> {
    check_convex_weights(omega, table.n())?;
    let alpha = weighted_least_squares(table.phi(), table.f(), omega)?;
    Ok(weighted_error(omega, &table.residuals(&alpha)))
}

fn check_convex_weights(omega: &[f64], n: usize) -> Result<()> {
    if omega.len() != n {
        return Err(Error::dim(format!("{} weights for {n} points", omega.len())));
    }
    if omega.iter().any(|w| w.is_nan() || *w < 0.0) {
        return Err(Error::invalid("weights must be nonnegative"));
    }
    let sum: f64 = omega.iter().sum();
    if (sum - 1.0).abs() > 1e-10 {
        return Err(Error::invalid(format!("weights sum to {sum}, not 1")));
    }
    Ok(())
}

/// Lawson iteration for the discrete minimax problem.
///
/// Stops once `δ_upper − δ_lower ≤ gap_tol · max(1, δ_upper)`, where the
/// upper bound is the smallest maximum residual seen and the lower bound the
/// largest weighted least-squares error. Without convergence the best
/// iterate is returned with `converged() == false`.
pub fn solve_minimax(table: &EvaluationTable, opts: &MinimaxOptions) -> Result<MinimaxSolution> {
    let n = table.n();
    if n == 0 || table.k() == 0 {
        return Err(Error::invalid("empty table"));
    }
    let mut omega = match &opts.initial_weights {
        Some(w) => {
            check_convex_weights(w, n)?;
            w.clone()
        }
        None => vec![1.0 / n as f64; n],
    };

    let mut best_alpha = Vec::new();
    let mut best_upper = f64::INFINITY;
    let mut best_lower: f64 = 0.0;
    let mut history = Vec::new();
    let mut accelerated = Vec::new();
    let mut gaps: Vec<f64> = Vec::new();
    let mut boost_left = 0usize;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let alpha = weighted_least_squares(table.phi(), table.f(), &omega)?;
        let r = table.residuals(&alpha);
        let lower = weighted_error(&omega, &r);
        let upper = sup_norm(&r);
        history.push(lower);
        if upper < best_upper {
            best_upper = upper;
            best_alpha = alpha;
        }
        best_lower = best_lower.max(lower);
        let gap = (best_upper - best_lower).max(0.0);
        gaps.push(gap);
        if gap <= opts.gap_tol * best_upper.max(1.0) {
            converged = true;
            accelerated.push(false);
            break;
        }

        let exponent = if boost_left > 0 {
            boost_left -= 1;
            ACCELERATED_EXPONENT
        } else {
            if opts.accelerate && gaps.len() > STAGNATION_WINDOW {
                let then = gaps[gaps.len() - 1 - STAGNATION_WINDOW];
                if gap > STAGNATION_FACTOR * then {
                    boost_left = ACCELERATED_STEPS - 1;
                    gaps.clear();
                }
            }
            if boost_left > 0 { ACCELERATED_EXPONENT } else { 1 }
        };
        accelerated.push(exponent != 1);

        let mut total = 0.0;
        for (w, z) in omega.iter_mut().zip(&r) {
            *w *= z.norm().powi(exponent);
            total += *w;
        }
        if total > 0.0 && total.is_finite() {
            for w in omega.iter_mut() {
                *w /= total;
                if *w < opts.weight_floor {
                    *w = 0.0;
                }
            }
        } else {
            // all weight sits on interpolated points; restart from |r|
            let s: f64 = r.iter().map(|z| z.norm()).sum();
            for (w, z) in omega.iter_mut().zip(&r) {
                *w = z.norm() / s;
            }
        }
    }

    let mut sol = MinimaxSolution::from_coefficients(table, Coefficients(best_alpha), best_lower, omega)?;
    sol.iterations = iterations;
    sol.converged = converged;
    sol.history = history;
    sol.accelerated = accelerated;
    if opts.polish && sol.delta > 0.0 {
        if let Some((alpha, weights)) = polish(table, &sol) {
            let r = table.residuals(&alpha);
            let upper = sup_norm(&r);
            let lower = dual_lower_bound(table, &weights)?.min(upper);
            if upper - lower <= sol.gap() && upper <= sol.delta + opts.gap_tol * sol.delta.max(1.0) {
                sol.alpha_star = Coefficients(alpha);
                sol.residuals = r;
                sol.delta = upper;
                sol.lower_bound = lower.max(sol.lower_bound.min(upper));
                sol.dual_weights = weights;
                sol.polished = true;
                sol.converged = sol.gap() <= opts.gap_tol * upper.max(1.0);
            }
        }
    }
    Ok(sol)
}

const POLISH_MAX_STEPS: usize = 30;

/// Newton's method on the optimality system restricted to the points whose
/// residual is close to the maximum:
///
/// ```text
/// |r_j(α)|² = t                      j ∈ S
/// Σ_{j∈S} ω_j r_j(α) conj(Φ_{j,i}) = 0   i = 1..k
/// Σ_{j∈S} ω_j = 1
/// ```
///
/// Unknowns are `Re α, Im α, t, ω_S`. Steps are minimum-norm least-squares
/// solutions, which covers supports larger than the generic `2k+1`. If the
/// defect stalls, the least weighted point leaves `S` and Newton restarts.
/// Returns the refined coefficients and full-length weights, or `None` if no
/// support reduced the defect.
fn polish(table: &EvaluationTable, sol: &MinimaxSolution) -> Option<(Vec<Cx>, Vec<f64>)> {
    let delta = sol.delta;
    let gap = sol.gap().max(0.0);
    // near-active band
    let band = (1e-6_f64).max(1e3 * gap / delta).min(1e-2);
    let mut support: Vec<usize> = (0..table.n())
        .filter(|&j| sol.residuals[j].norm() >= delta * (1.0 - band))
        .collect();
    let mut fallback = None;
    while !support.is_empty() {
        let (alpha, omega, defect, improved) = polish_on(table, sol, &support)?;
        if defect <= POLISH_DEFECT_TOL {
            return Some(assemble(table, &support, alpha, &omega));
        }
        if improved && fallback.is_none() {
            fallback = Some(assemble(table, &support, alpha, &omega));
        }
        // drop the least weighted point and retry
        let drop = (0..omega.len()).min_by(|&a, &b| omega[a].total_cmp(&omega[b]))?;
        support.remove(drop);
    }
    fallback
}

const POLISH_DEFECT_TOL: f64 = 1e-12;

fn assemble(table: &EvaluationTable, support: &[usize], alpha: Vec<Cx>, omega: &[f64]) -> (Vec<Cx>, Vec<f64>) {
    let mut full = vec![0.0; table.n()];
    let total: f64 = omega.iter().sum();
    for (&j, w) in support.iter().zip(omega) {
        full[j] = w.max(0.0) / total;
    }
    (alpha, full)
}

/// One Newton run on a fixed support: final iterate, its defect and whether
/// any step reduced the defect.
fn polish_on(
    table: &EvaluationTable,
    sol: &MinimaxSolution,
    support: &[usize],
) -> Option<(Vec<Cx>, Vec<f64>, f64, bool)> {
    let k = table.k();
    let delta = sol.delta;
    let l = support.len();
    let phi = table.phi();
    let f = table.f();

    let mut alpha = sol.alpha_star.0.clone();
    let mut t = delta * delta;
    let lw: f64 = support.iter().map(|&j| sol.lawson_weights[j]).sum();
    let mut omega: Vec<f64> = if lw > 0.0 {
        support.iter().map(|&j| sol.lawson_weights[j] / lw).collect()
    } else {
        vec![1.0 / l as f64; l]
    };

    let scale = delta * delta;
    let eval = |alpha: &[Cx], t: f64, omega: &[f64]| -> Vec<f64> {
        let mut e = Vec::with_capacity(l + 2 * k + 1);
        let r: Vec<Cx> = support
            .iter()
            .map(|&j| f[j] - phi.row(j).iter().zip(alpha).map(|(a, b)| a * b).sum::<Cx>())
            .collect();
        for rj in &r {
            e.push((rj.norm_sqr() - t) / scale);
        }
        for i in 0..k {
            let g: Cx = support
                .iter()
                .zip(&r)
                .zip(omega)
                .map(|((&j, rj), w)| w * rj * phi[(j, i)].conj())
                .sum();
            e.push(g.re / delta);
            e.push(g.im / delta);
        }
        e.push(omega.iter().sum::<f64>() - 1.0);
        e
    };
    let defect = |e: &[f64]| e.iter().map(|x| x * x).sum::<f64>().sqrt();

    let mut e = eval(&alpha, t, &omega);
    let mut best = defect(&e);
    let start = best;
    for _ in 0..POLISH_MAX_STEPS {
        if best <= 1e-15 {
            break;
        }
        let nvar = 2 * k + 1 + l;
        let mut jac = crate::numerics::DenseMatrix::zeros(e.len(), nvar);
        let r: Vec<Cx> = support
            .iter()
            .map(|&j| f[j] - phi.row(j).iter().zip(&alpha).map(|(a, b)| a * b).sum::<Cx>())
            .collect();
        let real = |x: f64| Cx::new(x, 0.0);
        let iu = Cx::new(0.0, 1.0);
        for (row, (&j, rj)) in support.iter().zip(&r).enumerate() {
            for i in 0..k {
                let d_re = -phi[(j, i)];
                let d_im = -iu * phi[(j, i)];
                jac[(row, i)] = real(2.0 * (rj.conj() * d_re).re / scale);
                jac[(row, k + i)] = real(2.0 * (rj.conj() * d_im).re / scale);
            }
            jac[(row, 2 * k)] = real(-1.0 / scale);
        }
        for i in 0..k {
            let (row_re, row_im) = (l + 2 * i, l + 2 * i + 1);
            for m in 0..k {
                let mut g_re = Cx::new(0.0, 0.0);
                let mut g_im = Cx::new(0.0, 0.0);
                for (&j, w) in support.iter().zip(&omega) {
                    let cphi = phi[(j, i)].conj();
                    g_re += *w * (-phi[(j, m)]) * cphi;
                    g_im += *w * (-iu * phi[(j, m)]) * cphi;
                }
                jac[(row_re, m)] = real(g_re.re / delta);
                jac[(row_im, m)] = real(g_re.im / delta);
                jac[(row_re, k + m)] = real(g_im.re / delta);
                jac[(row_im, k + m)] = real(g_im.im / delta);
            }
            for (col, (&j, rj)) in support.iter().zip(&r).enumerate() {
                let g = rj * phi[(j, i)].conj();
                jac[(row_re, 2 * k + 1 + col)] = real(g.re / delta);
                jac[(row_im, 2 * k + 1 + col)] = real(g.im / delta);
            }
        }
        for col in 0..l {
            jac[(l + 2 * k, 2 * k + 1 + col)] = real(1.0);
        }
        let rhs: Vec<Cx> = e.iter().map(|&x| real(-x)).collect();
        let step = crate::numerics::least_squares(&jac, &rhs).ok()?;

        // damped update keeping ω nonnegative
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let a2: Vec<Cx> = (0..k)
                .map(|i| alpha[i] + lambda * Cx::new(step[i].re, step[k + i].re))
                .collect();
            let t2 = t + lambda * step[2 * k].re;
            let w2: Vec<f64> = (0..l).map(|c| omega[c] + lambda * step[2 * k + 1 + c].re).collect();
            if w2.iter().all(|&w| w >= 0.0) {
                let e2 = eval(&a2, t2, &w2);
                let d2 = defect(&e2);
                if d2 < best {
                    alpha = a2;
                    t = t2;
                    omega = w2;
                    e = e2;
                    best = d2;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Some((alpha, omega, best, best < start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{DenseMatrix, ONE, ZERO};
    use crate::problem::{build_basis_problem, BasisKind, FieldMode, PointSet};

    fn c(re: f64, im: f64) -> Cx {
        Cx::new(re, im)
    }

    fn table(points: Vec<Cx>, kind: BasisKind) -> EvaluationTable {
        build_basis_problem(PointSet::distinct(points, 1e-12).unwrap(), kind, FieldMode::Complex).unwrap()
    }

    fn roots_of_unity() -> EvaluationTable {
        let pts = vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        let phi = DenseMatrix::from_columns(std::slice::from_ref(&pts)).unwrap();
        table(pts, BasisKind::Custom { f: vec![ONE; 4], phi })
    }

    /// Golden-section search of `max(|1 − a|, |1 − 3a|)` over real `a`.
    fn golden_section_gmres1() -> (f64, f64) {
        let g = |a: f64| (1.0 - a).abs().max((1.0 - 3.0 * a).abs());
        let (mut lo, mut hi) = (-2.0f64, 2.0f64);
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        while hi - lo > 1e-14 {
            let x1 = hi - phi * (hi - lo);
            let x2 = lo + phi * (hi - lo);
            if g(x1) < g(x2) {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        let a = 0.5 * (lo + hi);
        (a, g(a))
    }

    /// Grid search with refinement of `max_j |z_j^2 − a − b z_j|` on {−1,0,1}.
    fn grid_chebyshev2() -> ((f64, f64), f64) {
        let g = |a: f64, b: f64| {
            [-1.0f64, 0.0, 1.0].iter().map(|&z| (z * z - a - b * z).abs()).fold(0.0, f64::max)
        };
        let (mut ca, mut cb, mut h) = (0.0, 0.0, 1.0);
        let mut best = g(ca, cb);
        for _ in 0..60 {
            let (mut ba, mut bb) = (ca, cb);
            for i in -10..=10 {
                for j in -10..=10 {
                    let (a, b) = (ca + h * i as f64 / 10.0, cb + h * j as f64 / 10.0);
                    let v = g(a, b);
                    if v < best {
                        best = v;
                        ba = a;
                        bb = b;
                    }
                }
            }
            ca = ba;
            cb = bb;
            h *= 0.5;
        }
        ((ca, cb), best)
    }

    #[test]
    fn oracle_values() {
        let (a, d) = golden_section_gmres1();
        assert!((a - 0.5).abs() < 1e-12 && (d - 0.5).abs() < 1e-12);
        let ((a, b), d) = grid_chebyshev2();
        assert!((a - 0.5).abs() < 1e-9 && b.abs() < 1e-9 && (d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gmres1_two_points() {
        let t = table(vec![c(1.0, 0.0), c(3.0, 0.0)], BasisKind::Gmres(1));
        let s = solve_minimax(&t, &MinimaxOptions::default()).unwrap();
        assert!(s.converged());
        assert!((s.delta() - 0.5).abs() < 1e-9);
        assert!((s.alpha_star().0[0] - c(0.5, 0.0)).norm() < 1e-9);
        assert!(s.lower_bound() <= s.delta());
    }

    #[test]
    fn roots_of_unity_symmetry() {
        let s = solve_minimax(&roots_of_unity(), &MinimaxOptions::default()).unwrap();
        assert!(s.converged());
        assert!((s.delta() - 1.0).abs() < 1e-12);
        assert!(s.alpha_star().0[0].norm() < 1e-12);
    }

    #[test]
    fn chebyshev2_three_points() {
        let t = table(vec![c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], BasisKind::Chebyshev(2));
        let s = solve_minimax(&t, &MinimaxOptions::default()).unwrap();
        assert!(s.converged());
        assert!((s.delta() - 0.5).abs() < 1e-9);
        let a = &s.alpha_star().0;
        assert!((a[0] - c(0.5, 0.0)).norm() < 1e-9 && a[1].norm() < 1e-9);
    }

    #[test]
    fn exact_fit_has_zero_delta() {
        let pts = vec![c(1.0, 0.0), c(2.0, 1.0), c(-1.0, 0.5)];
        let phi = DenseMatrix::from_columns(&[vec![ONE; 3], pts.clone()]).unwrap();
        let f = pts.iter().map(|z| 2.0 - 3.0 * z).collect();
        let s = solve_minimax(&table(pts, BasisKind::Custom { f, phi }), &MinimaxOptions::default()).unwrap();
        assert!(s.converged() && s.delta() < 1e-12);
    }

    #[test]
    fn dual_lower_bound_examples() {
        let t = table(vec![c(1.0, 0.0), c(3.0, 0.0)], BasisKind::Gmres(1));
        assert!((dual_lower_bound(&t, &[0.75, 0.25]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(dual_lower_bound(&t, &[1.0, 0.0]).unwrap(), 0.0);
        assert!(dual_lower_bound(&t, &[0.7, 0.7]).is_err());
        assert!((dual_lower_bound(&roots_of_unity(), &[0.25; 4]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_convergence_is_reported() {
        let t = table(vec![c(1.0, 0.0), c(3.0, 0.0), c(4.0, 1.0)], BasisKind::Gmres(1));
        let opts = MinimaxOptions { max_iter: 2, ..Default::default() };
        let s = solve_minimax(&t, &opts).unwrap();
        assert!(!s.converged());
        assert_eq!(s.iterations(), 2);
        assert!(s.lower_bound() <= s.delta());
    }

    #[test]
    fn residuals_match_coefficients() {
        let t = table(vec![c(1.0, 1.0), c(3.0, 0.0), c(-2.0, 0.5)], BasisKind::Gmres(1));
        let s = solve_minimax(&t, &MinimaxOptions::default()).unwrap();
        let r = t.residuals(s.alpha_star().as_slice());
        assert_eq!(r, s.residuals());
        assert_eq!(s.delta(), r.iter().map(|z| z.norm()).fold(0.0, f64::max));
        let _ = ZERO;
    }
}

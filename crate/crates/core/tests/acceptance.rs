//! Acceptance suite: one line per criterion, nonzero exit on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use minmax_core::certificate::{
    caratheodory_prune, extract_active_set, recover_weights, support_bound, verify_certificate,
};
use minmax_core::generate::{
    random_commuting_family, random_complex_normal, random_real_normal, random_spectrum, SpectrumShape,
};
use minmax_core::matrix_bridge::{best_vector_approx, build_commuting_problem, sample_maxmin};
use minmax_core::minimax::{dual_lower_bound, solve_minimax};
use minmax_core::numerics::{least_squares, seeded_rng, spectral_norm};
use minmax_core::pipeline::{run_matrix, solve, MatrixRun};
use minmax_core::problem::{build_basis_problem, BasisKind};
use minmax_core::worstcase::{complex_worst_vector, realize_polynomial, symmetrize_certificate};
use minmax_core::{
    Certificate, Coefficients, Cx, DenseMatrix, Error, EvaluationTable, FieldMode, MinimaxOptions, PipelineOptions,
    PointSet, SpectralDecomposition,
};
use rand::Rng;

type Outcome = Result<String, String>;

fn c(re: f64, im: f64) -> Cx {
    Cx::new(re, im)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: Error) -> String {
    e.to_string()
}

const ORDERS: [usize; 3] = [8, 16, 32];
const SHAPES: [SpectrumShape; 3] = [SpectrumShape::Disk, SpectrumShape::Circles, SpectrumShape::Segment];

fn basis(i: usize) -> BasisKind {
    let k = 1 + i % 5;
    if i.is_multiple_of(2) {
        BasisKind::Gmres(k)
    } else {
        BasisKind::Chebyshev(k)
    }
}

fn complex_instance(i: usize) -> (SpectralDecomposition, EvaluationTable) {
    let mut rng = seeded_rng(0xC0FFEE, i as u64);
    let n = ORDERS[i % 3];
    let lambdas = random_spectrum(&mut rng, n, SHAPES[(i / 3) % 3]);
    let d = random_complex_normal(&mut rng, lambdas).unwrap();
    let t = d.basis_problem(basis(i)).unwrap();
    (d, t)
}

fn real_instance(i: usize) -> (SpectralDecomposition, EvaluationTable) {
    let mut rng = seeded_rng(0xBEEF, i as u64);
    let n = ORDERS[i % 3];
    let pairs = rng.gen_range(1..=n / 2);
    let d = random_real_normal(&mut rng, n, pairs).unwrap();
    let t = d.basis_problem(basis(i)).unwrap();
    (d, t)
}

/// Independent check of `min_α ‖f(A)v − Σ α_i φ_i(A)v‖` using the explicit
/// matrices `f(A)`, `φ_i(A)`.
fn explicit_vector_value(mats: &[DenseMatrix], v: &[Cx], real: bool) -> f64 {
    let b = mats[0].matvec(v);
    let cols: Vec<Vec<Cx>> = mats[1..].iter().map(|m| m.matvec(v)).collect();
    let n = b.len();
    let (m, rhs) = if real {
        let mut stacked = vec![vec![c(0.0, 0.0); cols.len()]; 2 * n];
        let mut rhs = vec![c(0.0, 0.0); 2 * n];
        for j in 0..n {
            for (i, col) in cols.iter().enumerate() {
                stacked[j][i] = c(col[j].re, 0.0);
                stacked[n + j][i] = c(col[j].im, 0.0);
            }
            rhs[j] = c(b[j].re, 0.0);
            rhs[n + j] = c(b[j].im, 0.0);
        }
        (DenseMatrix::from_rows(&stacked).unwrap(), rhs)
    } else {
        (DenseMatrix::from_columns(&cols).unwrap(), b.clone())
    };
    let alpha = least_squares(&m, &rhs).unwrap();
    let fit = m.matvec(&alpha);
    rhs.iter().zip(&fit).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

fn explicit_matrices(d: &SpectralDecomposition, t: &EvaluationTable) -> Vec<DenseMatrix> {
    let g = t.gamma();
    let expand = |vals: &dyn Fn(usize) -> Cx| -> Vec<Cx> { (0..d.n()).map(|j| vals(g.owner(j))).collect() };
    let mut mats = vec![minmax_core::matrix_bridge::apply_function_table(d, &expand(&|p| t.f()[p])).unwrap()];
    for i in 0..t.k() {
        mats.push(minmax_core::matrix_bridge::apply_function_table(d, &expand(&|p| t.phi()[(p, i)])).unwrap());
    }
    mats
}

fn equality_suite(label: &str, count: usize, make: fn(usize) -> (SpectralDecomposition, EvaluationTable)) -> Outcome {
    let opts = PipelineOptions::default();
    let (mut worst_err, mut worst_time, mut worst_imag, mut worst_oracle) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for i in 0..count {
        let (d, t) = make(i);
        let start = Instant::now();
        let run: MatrixRun = run_matrix(&d, &t, &opts).map_err(|e| format!("{label} instance {i}: {e}"))?;
        let elapsed = start.elapsed().as_secs_f64();
        let delta = run.delta();
        let scale = delta.max(1.0);
        let err = (run.vector_value - delta).abs() / scale;
        let oracle = explicit_vector_value(&explicit_matrices(&d, &t), &run.worst.v_star, t.mode() == FieldMode::Real);
        let oracle_err = (oracle - delta).abs() / scale;
        worst_err = worst_err.max(err);
        worst_oracle = worst_oracle.max(oracle_err);
        worst_time = worst_time.max(elapsed);
        ensure(err <= 1e-8 && oracle_err <= 1e-8, || {
            format!("{label} instance {i}: |value − δ| = {:.3e}, explicit {:.3e} (δ = {delta})", err * scale, oracle_err * scale)
        })?;
        ensure(elapsed <= 2.0, || format!("{label} instance {i} took {elapsed:.2} s"))?;
        if t.mode() == FieldMode::Real {
            worst_imag = worst_imag.max(run.worst.max_imag());
            ensure(run.worst.max_imag() <= 1e-10, || {
                format!("{label} instance {i}: max |Im v*| = {:.3e}", run.worst.max_imag())
            })?;
        }
    }
    let imag = if label == "real" { format!(", max |Im v*| {worst_imag:.2e}") } else { String::new() };
    Ok(format!(
        "{count} instances, max rel |value − δ| {worst_err:.2e} (explicit {worst_oracle:.2e}){imag}, max time {worst_time:.3} s"
    ))
}

fn complex_equality() -> Outcome {
    equality_suite("complex", 50, complex_instance)
}

fn real_equality() -> Outcome {
    equality_suite("real", 30, real_instance)
}

fn weight_recovery() -> Outcome {
    let opts = PipelineOptions::default();
    let (mut worst_cond, mut worst_sum, mut max_ell_ratio) = (0.0_f64, 0.0_f64, 0.0_f64);
    for i in 0..50 {
        let (_, t) = complex_instance(i);
        let sol = solve(&t, &opts).map_err(err)?;
        let scale = sol.delta().max(1.0);
        let active = extract_active_set(&sol, opts.active_tol);
        let cert = recover_weights(&sol, &t, &active, opts.cond_tol).map_err(|e| format!("instance {i}: {e}"))?;
        let check = |cert: &Certificate, what: &str| -> Result<(f64, f64), String> {
            let sum_err = (cert.omega.iter().sum::<f64>() - 1.0).abs();
            ensure(cert.condition_residual <= 1e-8 * scale, || {
                format!("instance {i} ({what}): condition residual {:.3e}", cert.condition_residual)
            })?;
            ensure(cert.omega.iter().all(|&w| w > 0.0), || format!("instance {i} ({what}): nonpositive weight"))?;
            ensure(sum_err <= 1e-12, || format!("instance {i} ({what}): |Σω − 1| = {sum_err:.3e}"))?;
            let report = verify_certificate(cert, &sol, &t, 1e-8);
            ensure(report.passed, || format!("instance {i} ({what}): verification failed {:?}", report.checks))?;
            Ok((cert.condition_residual / scale, sum_err))
        };
        let (a, b) = check(&cert, "recovered")?;
        let pruned = caratheodory_prune(&cert, &t).certificate;
        let (pa, pb) = check(&pruned, "pruned")?;
        let bound = 2 * t.k() + 1;
        ensure(pruned.ell <= bound, || format!("instance {i}: pruned ℓ = {} > {bound}", pruned.ell))?;
        assert_eq!(support_bound(&t), bound);
        worst_cond = worst_cond.max(a).max(pa);
        worst_sum = worst_sum.max(b).max(pb);
        max_ell_ratio = max_ell_ratio.max(pruned.ell as f64 / bound as f64);
    }
    Ok(format!(
        "50 instances, max rel condition residual {worst_cond:.2e}, max |Σω − 1| {worst_sum:.2e}, max pruned ℓ/(2k+1) {max_ell_ratio:.2}"
    ))
}

fn anchors() -> Outcome {
    let opts = PipelineOptions::default();
    let tol = 1e-9;
    let close = |a: f64, b: f64| (a - b).abs() <= tol;

    // Two-point case: δ = 1/2, ω = (3/4, 1/4), v* = (√3/2, 1/2).
    let d = SpectralDecomposition::diagonal(vec![c(1.0, 0.0), c(3.0, 0.0)], FieldMode::Complex).unwrap();
    let t = d.basis_problem(BasisKind::Gmres(1)).unwrap();
    let run = run_matrix(&d, &t, &opts).map_err(err)?;
    let cert = &run.certified.certificate;
    ensure(close(run.delta(), 0.5), || format!("gmres {{1,3}}: δ = {}", run.delta()))?;
    ensure(cert.support == vec![0, 1] && close(cert.omega[0], 0.75) && close(cert.omega[1], 0.25), || {
        format!("gmres {{1,3}}: ω = {:?}", cert.omega)
    })?;
    let v = &run.worst.v_star;
    ensure((v[0] - c(3f64.sqrt() / 2.0, 0.0)).norm() <= tol && (v[1] - c(0.5, 0.0)).norm() <= tol, || {
        format!("gmres {{1,3}}: v* = {v:?}")
    })?;

    // Three points, Chebyshev degree 2: δ = 1/2, ω = (1/4, 1/2, 1/4).
    let g = PointSet::distinct(vec![c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], 1e-12).unwrap();
    let t = build_basis_problem(g, BasisKind::Chebyshev(2), FieldMode::Real).unwrap();
    let cert = minmax_core::pipeline::certify(&t, &opts).map_err(err)?;
    let w = cert.certificate.full_weights(3);
    ensure(close(cert.solution.delta(), 0.5), || format!("chebyshev: δ = {}", cert.solution.delta()))?;
    ensure(close(w[0], 0.25) && close(w[1], 0.5) && close(w[2], 0.25), || format!("chebyshev: ω = {w:?}"))?;

    // Fourth roots of unity: δ = 1 and uniform weights.
    let pts = vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
    let t = build_basis_problem(PointSet::distinct(pts, 1e-12).unwrap(), BasisKind::Gmres(1), FieldMode::Complex).unwrap();
    let cert = minmax_core::pipeline::certify(&t, &opts).map_err(err)?;
    let w = cert.certificate.full_weights(4);
    ensure(close(cert.solution.delta(), 1.0), || format!("roots: δ = {}", cert.solution.delta()))?;
    ensure(w.iter().all(|&x| close(x, 0.25)), || format!("roots: ω = {w:?}"))?;
    Ok("gmres {1,3}, chebyshev {-1,0,1}, fourth roots of unity all within 1e-9".into())
}

fn duality() -> Outcome {
    let opts = PipelineOptions::default();
    let (mut worst_gap, mut worst_drop, mut flagged) = (0.0_f64, 0.0_f64, 0);
    let mut tables: Vec<EvaluationTable> = (0..50).map(|i| complex_instance(i).1).collect();
    tables.extend((0..30).map(|i| real_instance(i).1));
    for (i, t) in tables.iter().enumerate() {
        let sol = solve_minimax(t, &MinimaxOptions::default()).map_err(err)?;
        let delta = sol.delta();
        let scale = delta.max(1.0);
        let lb = dual_lower_bound(t, sol.lawson_weights()).map_err(err)?;
        ensure(lb <= delta + 1e-12 * scale && delta - lb <= 1e-10 * scale, || {
            format!("instance {i}: lower bound {lb} vs δ {delta}")
        })?;
        worst_gap = worst_gap.max((delta - lb) / scale);
        let drop = sol.history().windows(2).map(|w| w[0] - w[1]).fold(0.0_f64, f64::max);
        ensure(drop <= 1e-12 * scale, || format!("instance {i}: Lawson history decreases by {drop:.3e}"))?;
        worst_drop = worst_drop.max(drop);

        let sol = solve(t, &opts).map_err(err)?;
        let bumped = Coefficients(sol.alpha_star().0.iter().map(|a| a + c(1e-3, 0.0)).collect());
        let perturbed = sol.with_alpha(t, bumped, opts.minimax.gap_tol).map_err(err)?;
        let active = extract_active_set(&perturbed, opts.active_tol);
        match recover_weights(&perturbed, t, &active, opts.cond_tol) {
            Err(Error::NotOptimal { .. }) => flagged += 1,
            other => return Err(format!("instance {i}: perturbed optimum not flagged ({other:?})")),
        }
    }
    Ok(format!(
        "{} instances, max rel gap {worst_gap:.2e}, max history decrease {worst_drop:.2e}, perturbed flagged {flagged}/{}",
        tables.len(),
        tables.len()
    ))
}

fn sampling() -> Outcome {
    let opts = PipelineOptions::default();
    let mut instances: Vec<(SpectralDecomposition, EvaluationTable)> = (0..6).map(complex_instance).collect();
    instances.extend((0..4).map(real_instance));
    let (mut worst_excess, mut worst_include, mut worst_ratio) = (f64::NEG_INFINITY, 0.0_f64, f64::INFINITY);
    for (i, (d, t)) in instances.iter().enumerate() {
        let run = run_matrix(d, t, &opts).map_err(err)?;
        let delta = run.delta();
        let scale = delta.max(1.0);
        let (sampled, v) = sample_maxmin(d, t, 1000, 17 + i as u64, None).map_err(err)?;
        ensure(sampled <= delta + 1e-8 * scale, || format!("instance {i}: sampled {sampled} exceeds δ {delta}"))?;
        let (check, _) = best_vector_approx(d, t, &v).map_err(err)?;
        ensure((check - sampled).abs() <= 1e-12 * scale, || format!("instance {i}: argmax inconsistent"))?;
        let (with_star, _) = sample_maxmin(d, t, 1000, 17 + i as u64, Some(&run.worst.v_star)).map_err(err)?;
        ensure((with_star - delta).abs() <= 1e-8 * scale, || {
            format!("instance {i}: including v* gives {with_star}, δ = {delta}")
        })?;
        worst_excess = worst_excess.max((sampled - delta) / scale);
        worst_include = worst_include.max((with_star - delta).abs() / scale);
        if delta > 0.0 {
            worst_ratio = worst_ratio.min(sampled / delta);
        }
    }
    Ok(format!(
        "{} instances × 1000 trials, max (sampled − δ)/δ̂ {worst_excess:.2e}, with v* {worst_include:.2e}, min sampled/δ {worst_ratio:.3}",
        instances.len()
    ))
}

fn commuting() -> Outcome {
    let opts = PipelineOptions::default();
    let mut worst = 0.0_f64;
    for i in 0..10 {
        let mut rng = seeded_rng(0xFA11, i);
        let n = rng.gen_range(2..=16);
        let k = rng.gen_range(1..=4);
        let family = random_commuting_family(&mut rng, n, k).map_err(err)?;
        let (gamma, table, decomp) = build_commuting_problem(&family, FieldMode::Complex).map_err(err)?;
        let certified = minmax_core::pipeline::certify(&table, &opts).map_err(err)?;
        let delta = certified.solution.delta();
        let scale = delta.max(1.0);
        let alpha = certified.solution.alpha_star().as_slice();
        let mats = family.matrices();
        let mut combo = mats[0].clone();
        for (a, m) in alpha.iter().zip(&mats[1..]) {
            combo.add_scaled(-a, m);
        }
        let norm = spectral_norm(&combo, 1e-14).map_err(err)?;
        ensure((norm - delta).abs() <= 1e-8 * scale, || format!("family {i}: ‖A_0 − Σα_iA_i‖ = {norm}, δ = {delta}"))?;
        let w = complex_worst_vector(&certified.certificate, &decomp, &gamma).map_err(err)?;
        let (bva, _) = best_vector_approx(&decomp, &table, &w.v_star).map_err(err)?;
        let explicit = explicit_vector_value(&mats, &w.v_star, false);
        ensure((bva - delta).abs() <= 1e-8 * scale && (explicit - delta).abs() <= 1e-8 * scale, || {
            format!("family {i}: v* attains {bva} (explicit {explicit}), δ = {delta}")
        })?;
        worst = worst.max((norm - delta).abs() / scale).max((explicit - delta).abs() / scale);
    }
    Ok(format!("10 families, max rel deviation {worst:.2e}"))
}

fn realization_and_symmetrization() -> Outcome {
    let opts = PipelineOptions::default();
    // realization: random complex coefficients and solver optima
    let mut worst_increase = f64::NEG_INFINITY;
    for i in 0..30 {
        let (_, t) = real_instance(i);
        let mut rng = seeded_rng(0x5EED, i as u64);
        let sol = solve_minimax(&t, &MinimaxOptions::default()).map_err(err)?;
        let mut candidates = vec![sol.alpha_star().clone()];
        for _ in 0..5 {
            candidates.push(Coefficients(
                sol.alpha_star().0.iter().map(|a| a + c(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5))).collect(),
            ));
        }
        for alpha in candidates {
            let before = t.sup_error(alpha.as_slice());
            let real = realize_polynomial(&alpha, &t).map_err(err)?;
            let after = t.sup_error(real.as_slice());
            ensure(real.max_abs_imag() == 0.0, || format!("instance {i}: realized α not real"))?;
            ensure(after <= before + 1e-12 * before.max(1.0), || {
                format!("instance {i}: realization raised sup error {before} → {after}")
            })?;
            worst_increase = worst_increase.max(after - before);
        }
    }

    // symmetrization: the three merge cases, then random real instances
    let mut cases = [0usize; 3];
    let mut worst_cond = 0.0_f64;
    let mut tables: Vec<EvaluationTable> = (0..30).map(|i| real_instance(i).1).collect();
    let conj_pair = PointSet::distinct(vec![c(0.0, 1.0), c(0.0, -1.0)], 1e-12).unwrap();
    tables.push(build_basis_problem(conj_pair, BasisKind::Gmres(1), FieldMode::Real).unwrap());
    for (i, t) in tables.iter().enumerate() {
        let certified = minmax_core::pipeline::certify(t, &opts).map_err(err)?;
        let scale = certified.solution.delta().max(1.0);
        let mut certs = vec![certified.certificate.clone()];
        certs.push(caratheodory_prune(&certified.certificate, t).certificate);
        for cert in certs {
            let sym = symmetrize_certificate(&cert, t.gamma(), opts.pair_tol).map_err(err)?;
            let pts = t.gamma().points();
            for &p in &cert.support {
                let partner = sym.indices[sym.pairing[sym.indices.iter().position(|&q| q == p).unwrap()]];
                if partner == p {
                    cases[0] += 1;
                } else if cert.support.contains(&partner) {
                    cases[2] += 1;
                } else {
                    cases[1] += 1;
                }
            }
            let sum_err = (sym.omega_tilde.iter().sum::<f64>() - 1.0).abs();
            ensure(sum_err <= 1e-12, || format!("table {i}: symmetrized weights sum off by {sum_err:.3e}"))?;
            for (a, &b) in sym.pairing.iter().enumerate() {
                ensure(sym.omega_tilde[a] == sym.omega_tilde[b] && (sym.theta[b] - sym.theta[a].conj()).norm() <= 1e-10, || {
                    format!("table {i}: conjugate points carry different weights")
                })?;
                ensure(sym.omega_tilde[a] > 0.0, || format!("table {i}: zero symmetrized weight"))?;
                let _ = pts;
            }
            let cond = sym.condition_residual(t);
            ensure(cond <= 1e-10 * scale, || format!("table {i}: symmetrized condition {cond:.3e}"))?;
            worst_cond = worst_cond.max(cond / scale);
        }
    }
    ensure(cases.iter().all(|&n| n > 0), || format!("merge cases not all exercised: {cases:?}"))?;
    Ok(format!(
        "max sup-error change {worst_increase:.2e}; symmetrized condition max {worst_cond:.2e}; merge cases real/lone/paired = {cases:?}"
    ))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("complex worst-case vector attains the matrix optimum", complex_equality),
        ("real worst-case vector is real and attains the optimum", real_equality),
        ("weight recovery and support pruning", weight_recovery),
        ("hand-solved anchor instances", anchors),
        ("duality gap, Lawson monotonicity, infeasibility detection", duality),
        ("random sampling never beats the optimum", sampling),
        ("commuting families", commuting),
        ("realization and conjugate symmetrization", realization_and_symmetrization),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  [{}] {name}: {detail} ({secs:.2} s)", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL  [{}] {name}: {detail} ({secs:.2} s)", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}

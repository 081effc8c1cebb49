//! Normal matrices as spectral decompositions, matrix functions, and the
//! commuting-family form of the problem.
//!
//! For `A = Q Λ Q^H` every quantity is computed in eigen-coordinates
//! `w = Q^H v`, where `g(A)` acts as the diagonal `g(λ_j)`.

use serde::{Deserialize, Serialize};

use crate::certificate::Check;
use crate::error::{Error, Result};
use crate::minimax::{solve_minimax, MinimaxOptions};
use crate::numerics::{
    least_squares, norm2, normalize, random_unit_vector_with, seeded_rng, spectral_norm, Cx, DenseMatrix, ZERO,
};
use crate::problem::{
    build_basis_problem, default_tolerance, from_pair, to_pair, BasisKind, BuilderKind, Coefficients, EvaluationTable,
    FieldMode, Pair, PointSet,
};

/// Tolerance for pairing eigenvalues and eigenvectors in real mode.
pub const PAIRING_TOL: f64 = 1e-10;
/// Relative tolerance for commutation and simultaneous diagonalization.
pub const COMMUTING_TOL: f64 = 1e-8;
/// Upper limit on ascent steps in [`sample_maxmin`].
pub const POLISH_STEPS: usize = 100;

/// `A = Q diag(λ) Q^H`.
///
/// In real mode `pairing` is an involution with `λ_{π(j)} = conj(λ_j)` and
/// `q_{π(j)} = conj(q_j)`, which makes `A` real.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDecomposition {
    pub q: DenseMatrix,
    pub lambdas: Vec<Cx>,
    pub mode: FieldMode,
    pub pairing: Option<Vec<usize>>,
}

impl SpectralDecomposition {
    pub fn new(q: DenseMatrix, lambdas: Vec<Cx>, mode: FieldMode, pairing: Option<Vec<usize>>) -> Result<Self> {
        let n = lambdas.len();
        if q.rows() != n || q.cols() != n {
            return Err(Error::dim(format!("Q is {}x{}, expected {n}x{n}", q.rows(), q.cols())));
        }
        if let Some(p) = &pairing {
            if p.len() != n || p.iter().any(|&i| i >= n) {
                return Err(Error::invalid("pairing must map 0..n into itself"));
            }
        }
        if !q.is_finite() || lambdas.iter().any(|z| !z.is_finite()) {
            return Err(Error::invalid("non-finite entries"));
        }
        Ok(SpectralDecomposition { q, lambdas, mode, pairing })
    }

    /// `Q = I`; in real mode the pairing is inferred.
    pub fn diagonal(lambdas: Vec<Cx>, mode: FieldMode) -> Result<Self> {
        let q = DenseMatrix::identity(lambdas.len());
        let mut d = Self::new(q, lambdas, mode, None)?;
        if mode == FieldMode::Real {
            d.pairing = d.infer_pairing(PAIRING_TOL);
        }
        Ok(d)
    }

    /// Factor a Hermitian matrix. Real symmetric input with `mode = Real`
    /// yields a real `Q` and the identity pairing.
    pub fn from_hermitian(h: &DenseMatrix, mode: FieldMode) -> Result<Self> {
        let (q, vals) = crate::numerics::hermitian_eig(h, 1e-14)?;
        let lambdas = vals.into_iter().map(|x| Cx::new(x, 0.0)).collect::<Vec<_>>();
        let pairing = (mode == FieldMode::Real).then(|| (0..lambdas.len()).collect());
        Self::new(q, lambdas, mode, pairing)
    }

    pub fn n(&self) -> usize {
        self.lambdas.len()
    }

    /// `Q Λ Q^H`.
    pub fn matrix(&self) -> DenseMatrix {
        apply_diag(&self.q, &self.lambdas)
    }

    /// Distinct eigenvalues with the default clustering tolerance.
    pub fn point_set(&self) -> PointSet {
        PointSet::from_spectrum(&self.lambdas, default_tolerance(&self.lambdas))
    }

    /// Scalar problem for a built-in basis on this spectrum.
    pub fn basis_problem(&self, kind: BasisKind) -> Result<EvaluationTable> {
        build_basis_problem(self.point_set(), kind, self.mode)
    }

    /// Greedy matching of each column with a conjugate partner.
    pub fn infer_pairing(&self, tol: f64) -> Option<Vec<usize>> {
        let n = self.n();
        let scale = 1.0 + self.lambdas.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut pairing = vec![usize::MAX; n];
        for j in 0..n {
            if pairing[j] != usize::MAX {
                continue;
            }
            let qj = self.q.column(j);
            let partner = (j..n).find(|&s| {
                pairing[s] == usize::MAX
                    && (self.lambdas[s] - self.lambdas[j].conj()).norm() <= tol * scale
                    && conj_distance(&qj, &self.q.column(s)) <= tol
            })?;
            pairing[j] = partner;
            pairing[partner] = j;
        }
        Some(pairing)
    }

    /// Largest violation of the real-mode pairing conditions, or `None` if
    /// the pairing is absent or not an involution.
    pub fn pairing_defect(&self) -> Option<f64> {
        let p = self.pairing.as_ref()?;
        if (0..self.n()).any(|j| p[p[j]] != j) {
            return None;
        }
        let scale = 1.0 + self.lambdas.iter().map(|z| z.norm()).fold(0.0, f64::max);
        Some((0..self.n()).fold(0.0_f64, |m, j| {
            let dl = (self.lambdas[p[j]] - self.lambdas[j].conj()).norm() / scale;
            let dq = conj_distance(&self.q.column(j), &self.q.column(p[j]));
            m.max(dl).max(dq)
        }))
    }

    /// Table values at every eigenvalue index; `table` must be built on
    /// this spectrum.
    pub(crate) fn expanded(&self, table: &EvaluationTable) -> Result<(Vec<Cx>, DenseMatrix)> {
        let gamma = table.gamma();
        let n = self.n();
        if gamma.spectrum_len() != n {
            return Err(Error::dim(format!(
                "table covers {} eigenvalues, decomposition has {n}",
                gamma.spectrum_len()
            )));
        }
        let tol = default_tolerance(&self.lambdas).max(PAIRING_TOL);
        for (j, &lam) in self.lambdas.iter().enumerate() {
            if (gamma.points()[gamma.owner(j)] - lam).norm() > 10.0 * tol {
                return Err(Error::invalid(format!("eigenvalue {j} does not match its point in the table")));
            }
        }
        let f = (0..n).map(|j| table.f()[gamma.owner(j)]).collect();
        let mut phi = DenseMatrix::zeros(n, table.k());
        for j in 0..n {
            for i in 0..table.k() {
                phi[(j, i)] = table.phi()[(gamma.owner(j), i)];
            }
        }
        Ok((f, phi))
    }
}

fn conj_distance(a: &[Cx], b: &[Cx]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x.conj() - y).norm_sqr()).sum::<f64>().sqrt()
}

fn apply_diag(q: &DenseMatrix, g: &[Cx]) -> DenseMatrix {
    let n = g.len();
    let mut qg = q.clone();
    for i in 0..n {
        for j in 0..n {
            qg[(i, j)] *= g[j];
        }
    }
    &qg * &q.adjoint()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl DecompositionReport {
    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

/// Check unitarity, and when `a` is given, reconstruction and normality;
/// in real mode also the conjugate pairing and realness of `QΛQ^H`.
pub fn validate_decomposition(decomp: &SpectralDecomposition, a: Option<&DenseMatrix>, tol: f64) -> DecompositionReport {
    let n = decomp.n() as f64;
    let mut checks = Vec::new();
    let mut push = |name: &str, passed: bool, value: f64| {
        checks.push(Check { name: name.into(), passed, value, required: true });
    };

    let defect = decomp.q.unitarity_defect();
    push("unitarity", defect <= tol * n.max(1.0), defect);

    let rebuilt = decomp.matrix();
    if let Some(a) = a {
        let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
        let rec = if a.rows() == decomp.n() && a.cols() == decomp.n() {
            (a - &rebuilt).frobenius_norm()
        } else {
            f64::INFINITY
        };
        push("reconstruction", rec <= tol * scale, rec);
        let normality = if a.is_square() {
            let ah = a.adjoint();
            (&(a * &ah) - &(&ah * a)).frobenius_norm()
        } else {
            f64::INFINITY
        };
        push("normality", normality <= tol * scale * scale, normality);
    }

    if decomp.mode == FieldMode::Real {
        let d = decomp.pairing_defect().unwrap_or(f64::INFINITY);
        push("pairing", d <= tol, d);
        let imag = rebuilt.max_abs_imag();
        push("real_matrix", imag <= tol, imag);
    }

    let passed = checks.iter().all(|c| c.passed);
    DecompositionReport { passed, checks }
}

/// `g(A) = Q diag(g) Q^H`.
pub fn apply_function_table(decomp: &SpectralDecomposition, g_values: &[Cx]) -> Result<DenseMatrix> {
    if g_values.len() != decomp.n() {
        return Err(Error::dim(format!("{} values for order {}", g_values.len(), decomp.n())));
    }
    Ok(apply_diag(&decomp.q, g_values))
}

/// `f(A) − Σ α_i φ_i(A)`.
pub fn residual_matrix(decomp: &SpectralDecomposition, table: &EvaluationTable, alpha: &[Cx]) -> Result<DenseMatrix> {
    let (f, phi) = decomp.expanded(table)?;
    if alpha.len() != table.k() {
        return Err(Error::dim("coefficient count differs from basis size"));
    }
    let g: Vec<Cx> = (0..decomp.n())
        .map(|j| f[j] - phi.row(j).iter().zip(alpha).map(|(p, a)| p * a).sum::<Cx>())
        .collect();
    apply_function_table(decomp, &g)
}

/// `min_α ‖f(A)v − Σ α_i φ_i(A) v‖` for unit `v` (normalized internally).
///
/// Real mode restricts `α` to real values.
pub fn best_vector_approx(
    decomp: &SpectralDecomposition,
    table: &EvaluationTable,
    v: &[Cx],
) -> Result<(f64, Coefficients)> {
    let (f, phi) = decomp.expanded(table)?;
    if v.len() != decomp.n() {
        return Err(Error::dim(format!("vector of length {} for order {}", v.len(), decomp.n())));
    }
    let mut w = decomp.q.adjoint_matvec(v);
    if normalize(&mut w) == 0.0 {
        return Err(Error::invalid("zero vector"));
    }
    Ok(eigen_coordinate_fit(&f, &phi, &w, decomp.mode))
}

fn eigen_coordinate_fit(f: &[Cx], phi: &DenseMatrix, w: &[Cx], mode: FieldMode) -> (f64, Coefficients) {
    let (n, k) = (phi.rows(), phi.cols());
    let b: Vec<Cx> = (0..n).map(|j| f[j] * w[j]).collect();
    let mut m = DenseMatrix::zeros(n, k);
    for j in 0..n {
        for i in 0..k {
            m[(j, i)] = phi[(j, i)] * w[j];
        }
    }
    let alpha = match mode {
        FieldMode::Complex => least_squares(&m, &b).unwrap_or_else(|_| vec![ZERO; k]),
        FieldMode::Real => {
            let mut stacked = DenseMatrix::zeros(2 * n, k);
            let mut rhs = vec![ZERO; 2 * n];
            for j in 0..n {
                for i in 0..k {
                    stacked[(j, i)] = Cx::new(m[(j, i)].re, 0.0);
                    stacked[(n + j, i)] = Cx::new(m[(j, i)].im, 0.0);
                }
                rhs[j] = Cx::new(b[j].re, 0.0);
                rhs[n + j] = Cx::new(b[j].im, 0.0);
            }
            least_squares(&stacked, &rhs)
                .map(|a| a.into_iter().map(|z| Cx::new(z.re, 0.0)).collect())
                .unwrap_or_else(|_| vec![ZERO; k])
        }
    };
    let r: Vec<Cx> = (0..n)
        .map(|j| b[j] - m.row(j).iter().zip(&alpha).map(|(x, a)| x * a).sum::<Cx>())
        .collect();
    (norm2(&r), Coefficients(alpha))
}

/// `min_α ‖f(A) − Σ α_i φ_i(A)‖₂`, which for normal `A` is the scalar
/// minimax value on the spectrum.
pub fn minmax_matrix_value(
    decomp: &SpectralDecomposition,
    table: &EvaluationTable,
    opts: &MinimaxOptions,
) -> Result<f64> {
    decomp.expanded(table)?;
    let sol = solve_minimax(table, opts)?;
    if !sol.converged() {
        return Err(Error::Convergence { iterations: sol.iterations(), achieved: sol.gap() });
    }
    Ok(sol.delta())
}

/// Spectral norm of `f(A) − Σ α_i φ_i(A)` formed explicitly.
pub fn matrix_residual_norm(decomp: &SpectralDecomposition, table: &EvaluationTable, alpha: &[Cx]) -> Result<f64> {
    spectral_norm(&residual_matrix(decomp, table, alpha)?, 1e-14)
}

/// Largest value of [`best_vector_approx`] over `trials` random unit
/// vectors and `include`, followed by projected-gradient ascent on the
/// squared value from the best one.
///
/// Trial `t` draws from `seeded_rng(seed, t)`, so results depend only on
/// `(seed, trials)`.
pub fn sample_maxmin(
    decomp: &SpectralDecomposition,
    table: &EvaluationTable,
    trials: usize,
    seed: u64,
    include: Option<&[Cx]>,
) -> Result<(f64, Vec<Cx>)> {
    let (f, phi) = decomp.expanded(table)?;
    let n = decomp.n();
    let real_only = decomp.mode == FieldMode::Real;
    let eval = |v: &[Cx]| -> (f64, Vec<Cx>, Coefficients) {
        let mut w = decomp.q.adjoint_matvec(v);
        normalize(&mut w);
        let (val, alpha) = eigen_coordinate_fit(&f, &phi, &w, decomp.mode);
        (val, w, alpha)
    };

    let mut best: Option<(f64, Vec<Cx>)> = None;
    let mut consider = |v: Vec<Cx>| {
        let (val, _, _) = eval(&v);
        if best.as_ref().is_none_or(|(b, _)| val > *b) {
            best = Some((val, v));
        }
    };
    if let Some(v) = include {
        if v.len() != n {
            return Err(Error::dim("included vector has wrong length"));
        }
        let mut v = v.to_vec();
        if normalize(&mut v) == 0.0 {
            return Err(Error::invalid("zero vector"));
        }
        consider(v);
    }
    for t in 0..trials {
        let mut rng = seeded_rng(seed, t as u64);
        consider(random_unit_vector_with(&mut rng, n, real_only));
    }
    let (mut value, mut v) = best.ok_or_else(|| Error::invalid("no trials"))?;

    // Ascent in eigen-coordinates; the gradient of the squared value is
    // |g_j|² w_j with g the residual function at the current minimizer.
    let (_, mut w, mut alpha) = eval(&v);
    for _ in 0..POLISH_STEPS {
        let g2: Vec<f64> = (0..n)
            .map(|j| (f[j] - phi.row(j).iter().zip(alpha.as_slice()).map(|(p, a)| p * a).sum::<Cx>()).norm_sqr())
            .collect();
        let gmax = g2.iter().copied().fold(0.0, f64::max);
        if gmax == 0.0 {
            break;
        }
        let mean: f64 = (0..n).map(|j| g2[j] * w[j].norm_sqr()).sum();
        let dir: Vec<Cx> = (0..n).map(|j| w[j] * (g2[j] - mean)).collect();
        if norm2(&dir) <= 1e-15 * gmax {
            break;
        }
        let mut step = 1.0 / gmax;
        let mut improved = false;
        for _ in 0..30 {
            let mut cand: Vec<Cx> = (0..n).map(|j| w[j] + dir[j] * step).collect();
            normalize(&mut cand);
            let mut cv = decomp.q.matvec(&cand);
            if real_only {
                cv.iter_mut().for_each(|z| z.im = 0.0);
            }
            let (val, cw, ca) = eval(&cv);
            if val > value {
                value = val;
                v = cv;
                w = cw;
                alpha = ca;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    normalize(&mut v);
    Ok((value, v))
}

// ---------------------------------------------------------------------------
// Commuting families

/// Matrices `A_0..A_k` with `U^H A_i U = diag(λ^{(i)})`.
#[derive(Clone, Debug, PartialEq)]
pub struct CommutingFamily {
    pub u: DenseMatrix,
    pub diagonals: Vec<Vec<Cx>>,
    pub matrices: Option<Vec<DenseMatrix>>,
}

impl CommutingFamily {
    pub fn new(u: DenseMatrix, diagonals: Vec<Vec<Cx>>, matrices: Option<Vec<DenseMatrix>>) -> Result<Self> {
        let n = u.rows();
        if !u.is_square() {
            return Err(Error::dim("U must be square"));
        }
        if diagonals.len() < 2 {
            return Err(Error::invalid("need A_0 and at least one A_i"));
        }
        if diagonals.iter().any(|d| d.len() != n) {
            return Err(Error::dim(format!("every diagonal must have length {n}")));
        }
        if let Some(ms) = &matrices {
            if ms.len() != diagonals.len() || ms.iter().any(|m| m.rows() != n || m.cols() != n) {
                return Err(Error::dim("one n x n matrix per diagonal required"));
            }
        }
        Ok(CommutingFamily { u, diagonals, matrices })
    }

    /// Family `A_i = U diag(λ^{(i)}) U^H` with the matrices formed.
    pub fn from_diagonals(u: DenseMatrix, diagonals: Vec<Vec<Cx>>) -> Result<Self> {
        let ms = diagonals.iter().map(|d| apply_diag(&u, d)).collect();
        Self::new(u, diagonals, Some(ms))
    }

    pub fn n(&self) -> usize {
        self.u.rows()
    }

    /// The explicit matrices, formed from `U` and the diagonals if absent.
    pub fn matrices(&self) -> Vec<DenseMatrix> {
        match &self.matrices {
            Some(m) => m.clone(),
            None => self.diagonals.iter().map(|d| apply_diag(&self.u, d)).collect(),
        }
    }

    /// Unitarity of `U`; with explicit matrices also pairwise commutation
    /// and the diagonalization residual.
    pub fn validate(&self) -> Result<()> {
        let n = self.n() as f64;
        let defect = self.u.unitarity_defect();
        if defect > 1e-10 * n.max(1.0) {
            return Err(Error::invalid(format!("U is not unitary (defect {defect:e})")));
        }
        let Some(ms) = &self.matrices else {
            return Ok(());
        };
        for i in 0..ms.len() {
            for j in i + 1..ms.len() {
                let c = (&(&ms[i] * &ms[j]) - &(&ms[j] * &ms[i])).frobenius_norm();
                let bound = COMMUTING_TOL * ms[i].frobenius_norm() * ms[j].frobenius_norm();
                if c > bound {
                    return Err(Error::invalid(format!("A_{i} and A_{j} do not commute (defect {c:e})")));
                }
            }
        }
        let uh = self.u.adjoint();
        for (i, (m, d)) in ms.iter().zip(&self.diagonals).enumerate() {
            let res = (&(&(&uh * m) * &self.u) - &DenseMatrix::from_diag(d)).frobenius_norm();
            if res > COMMUTING_TOL * m.frobenius_norm() {
                return Err(Error::invalid(format!("U does not diagonalize A_{i} (residual {res:e})")));
            }
        }
        Ok(())
    }
}

/// Scalar problem of a commuting family: eigenvalue index `j` gets label
/// `1, 2, …` (indices with identical diagonal tuples share a label),
/// `f = λ^{(0)}`, `φ_i = λ^{(i)}`, and `A = U diag(labels) U^H`.
///
/// `mode = Real` requires real `U` and diagonals.
pub fn build_commuting_problem(
    family: &CommutingFamily,
    mode: FieldMode,
) -> Result<(PointSet, EvaluationTable, SpectralDecomposition)> {
    family.validate()?;
    let n = family.n();
    let scale = family.diagonals.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    let tol = 1e-12 * (1.0 + scale);
    if mode == FieldMode::Real
        && (family.u.max_abs_imag() > tol || family.diagonals.iter().flatten().any(|z| z.im.abs() > tol))
    {
        return Err(Error::Symmetry("real mode needs a real family".into()));
    }

    let mut members: Vec<Vec<usize>> = Vec::new();
    for j in 0..n {
        let same = |&s: &usize| family.diagonals.iter().all(|d| (d[s] - d[j]).norm() <= tol);
        match members.iter_mut().find(|m| same(&m[0])) {
            Some(m) => m.push(j),
            None => members.push(vec![j]),
        }
    }
    let labels: Vec<Cx> = (1..=members.len()).map(|l| Cx::new(l as f64, 0.0)).collect();
    let reps: Vec<usize> = members.iter().map(|m| m[0]).collect();
    let gamma = PointSet::with_members(labels, members)?;

    let f: Vec<Cx> = reps.iter().map(|&j| family.diagonals[0][j]).collect();
    let k = family.diagonals.len() - 1;
    let mut phi = DenseMatrix::zeros(reps.len(), k);
    for (row, &j) in reps.iter().enumerate() {
        for i in 0..k {
            phi[(row, i)] = family.diagonals[i + 1][j];
        }
    }
    let table = build_basis_problem(gamma.clone(), BasisKind::Custom { f, phi }, mode)?;

    let lambdas: Vec<Cx> = (0..n).map(|j| gamma.points()[gamma.owner(j)]).collect();
    let pairing = (mode == FieldMode::Real).then(|| (0..n).collect());
    let decomp = SpectralDecomposition::new(family.u.clone(), lambdas, mode, pairing)?;
    Ok((gamma, table, decomp))
}

// ---------------------------------------------------------------------------
// JSON

fn matrix_to_pairs(m: &DenseMatrix) -> Vec<Vec<Pair>> {
    m.to_rows().into_iter().map(|r| r.into_iter().map(to_pair).collect()).collect()
}

fn matrix_from_pairs(rows: &[Vec<Pair>]) -> Result<DenseMatrix> {
    let rows: Vec<Vec<Cx>> = rows.iter().map(|r| r.iter().map(from_pair).collect()).collect();
    DenseMatrix::from_rows(&rows)
}

/// On-disk spectral decomposition. `pairing` is zero-based. `kind`/`k`
/// optionally name the basis to approximate with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixSpec {
    pub n: usize,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<Pair>>,
    pub lambdas: Vec<Pair>,
    #[serde(default)]
    pub mode: FieldMode,
    #[serde(default)]
    pub pairing: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<BuilderKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

impl MatrixSpec {
    pub fn to_decomposition(&self) -> Result<SpectralDecomposition> {
        let q = matrix_from_pairs(&self.q)?;
        if self.lambdas.len() != self.n {
            return Err(Error::dim(format!("{} eigenvalues for n = {}", self.lambdas.len(), self.n)));
        }
        let lambdas = self.lambdas.iter().map(from_pair).collect();
        SpectralDecomposition::new(q, lambdas, self.mode, self.pairing.clone())
    }

    /// Basis named by `kind`/`k`, if both are present.
    pub fn basis(&self) -> Option<BasisKind> {
        match (self.kind?, self.k?) {
            (BuilderKind::Gmres, k) => Some(BasisKind::Gmres(k)),
            (BuilderKind::Chebyshev, k) => Some(BasisKind::Chebyshev(k)),
        }
    }

    pub fn from_decomposition(d: &SpectralDecomposition) -> Self {
        MatrixSpec {
            n: d.n(),
            q: matrix_to_pairs(&d.q),
            lambdas: d.lambdas.iter().copied().map(to_pair).collect(),
            mode: d.mode,
            pairing: d.pairing.clone(),
            kind: None,
            k: None,
        }
    }
}

/// On-disk commuting family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutingSpec {
    #[serde(rename = "U")]
    pub u: Vec<Vec<Pair>>,
    pub diagonals: Vec<Vec<Pair>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrices: Option<Vec<Vec<Vec<Pair>>>>,
}

impl CommutingSpec {
    pub fn to_family(&self) -> Result<CommutingFamily> {
        let u = matrix_from_pairs(&self.u)?;
        let diagonals = self.diagonals.iter().map(|d| d.iter().map(from_pair).collect()).collect();
        let matrices = match &self.matrices {
            Some(ms) => Some(ms.iter().map(|m| matrix_from_pairs(m)).collect::<Result<Vec<_>>>()?),
            None => None,
        };
        CommutingFamily::new(u, diagonals, matrices)
    }

    pub fn from_family(f: &CommutingFamily) -> Self {
        CommutingSpec {
            u: matrix_to_pairs(&f.u),
            diagonals: f.diagonals.iter().map(|d| d.iter().copied().map(to_pair).collect()).collect(),
            matrices: f.matrices.as_ref().map(|ms| ms.iter().map(matrix_to_pairs).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{random_unitary, ONE};

    fn c(re: f64, im: f64) -> Cx {
        Cx::new(re, im)
    }

    fn reals(xs: &[f64]) -> Vec<Cx> {
        xs.iter().map(|&x| c(x, 0.0)).collect()
    }

    fn gmres13(q: DenseMatrix) -> (SpectralDecomposition, EvaluationTable) {
        let d = SpectralDecomposition::new(q, reals(&[1.0, 3.0]), FieldMode::Complex, None).unwrap();
        let t = d.basis_problem(BasisKind::Gmres(1)).unwrap();
        (d, t)
    }

    #[test]
    fn validation_reports() {
        let d = SpectralDecomposition::diagonal(vec![c(1.0, 2.0), c(-3.0, 0.5)], FieldMode::Complex).unwrap();
        assert!(validate_decomposition(&d, Some(&d.matrix()), 1e-10).passed);

        let mut q = DenseMatrix::identity(2);
        q[(1, 1)] = c(2.0, 0.0);
        let bad = SpectralDecomposition::new(q, reals(&[1.0, 2.0]), FieldMode::Complex, None).unwrap();
        assert_eq!(validate_decomposition(&bad, None, 1e-10).failures(), vec!["unitarity"]);

        let unpaired = SpectralDecomposition::diagonal(vec![c(0.0, 1.0), c(2.0, 0.0)], FieldMode::Real).unwrap();
        assert!(unpaired.pairing.is_none());
        assert!(validate_decomposition(&unpaired, None, 1e-10).failures().contains(&"pairing"));
    }

    #[test]
    fn rotation_pairing() {
        let s = 1.0 / 2f64.sqrt();
        let q = DenseMatrix::from_rows(&[vec![c(s, 0.0), c(s, 0.0)], vec![c(0.0, -s), c(0.0, s)]]).unwrap();
        let d = SpectralDecomposition::new(q, vec![c(0.0, 1.0), c(0.0, -1.0)], FieldMode::Real, None).unwrap();
        assert_eq!(d.infer_pairing(1e-10), Some(vec![1, 0]));
        let a = d.matrix();
        let expected = DenseMatrix::from_real_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        assert!((&a - &expected).frobenius_norm() < 1e-15);
    }

    #[test]
    fn function_tables() {
        let d = SpectralDecomposition::diagonal(reals(&[1.0, 2.0]), FieldMode::Complex).unwrap();
        assert_eq!(apply_function_table(&d, &reals(&[5.0, 7.0])).unwrap(), DenseMatrix::from_diag(&reals(&[5.0, 7.0])));

        let a = DenseMatrix::from_real_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let d = SpectralDecomposition::from_hermitian(&a, FieldMode::Real).unwrap();
        let one = apply_function_table(&d, &[ONE, ONE]).unwrap();
        assert!((&one - &DenseMatrix::identity(2)).frobenius_norm() < 1e-14);
        let sq: Vec<Cx> = d.lambdas.iter().map(|z| z * z).collect();
        let a2 = apply_function_table(&d, &sq).unwrap();
        assert!((&a2 - &(&a * &a)).frobenius_norm() < 1e-13);
        assert!(apply_function_table(&d, &[ONE]).is_err());
    }

    #[test]
    fn vector_approximations() {
        let (d, t) = gmres13(DenseMatrix::identity(2));
        let (val, _) = best_vector_approx(&d, &t, &[c(3f64.sqrt() / 2.0, 0.0), c(0.5, 0.0)]).unwrap();
        assert!((val - 0.5).abs() < 1e-14);

        let s = 1.0 / 2f64.sqrt();
        let (val, alpha) = best_vector_approx(&d, &t, &[c(s, 0.0), c(s, 0.0)]).unwrap();
        assert!((val - 0.2f64.sqrt()).abs() < 1e-14);
        assert!((alpha.0[0] - c(0.4, 0.0)).norm() < 1e-14);

        let (val, _) = best_vector_approx(&d, &t, &[ONE, ZERO]).unwrap();
        assert!(val < 1e-15);
    }

    #[test]
    fn matrix_value_is_unitarily_invariant() {
        let mut rng = seeded_rng(3, 0);
        let (d, t) = gmres13(random_unitary(&mut rng, 2, false));
        let delta = minmax_matrix_value(&d, &t, &MinimaxOptions::default()).unwrap();
        assert!((delta - 0.5).abs() < 1e-12);
        let norm = matrix_residual_norm(&d, &t, &[c(0.5, 0.0)]).unwrap();
        assert!((norm - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_bounded_and_deterministic() {
        let (d, t) = gmres13(DenseMatrix::identity(2));
        let (a, va) = sample_maxmin(&d, &t, 50, 7, None).unwrap();
        let (b, vb) = sample_maxmin(&d, &t, 50, 7, None).unwrap();
        assert_eq!((a, va), (b, vb));
        assert!(a <= 0.5 + 1e-8 && a > 0.49);

        let one = SpectralDecomposition::diagonal(reals(&[2.0]), FieldMode::Complex).unwrap();
        let t1 = one.basis_problem(BasisKind::Chebyshev(1)).unwrap();
        let delta = minmax_matrix_value(&one, &t1, &MinimaxOptions::default()).unwrap();
        let (v, _) = sample_maxmin(&one, &t1, 5, 1, None).unwrap();
        assert!((v - delta).abs() < 1e-14);
    }

    #[test]
    fn commuting_problems() {
        let x = reals(&[1.0, 2.0, 3.0]);
        let sq: Vec<Cx> = x.iter().map(|z| z * z).collect();
        let fam = CommutingFamily::from_diagonals(DenseMatrix::identity(3), vec![vec![ONE; 3], x.clone(), sq]).unwrap();
        let (_, table, _) = build_commuting_problem(&fam, FieldMode::Complex).unwrap();
        let direct = build_basis_problem(PointSet::distinct(x, 1e-12).unwrap(), BasisKind::Gmres(2), FieldMode::Complex)
            .unwrap();
        assert_eq!(table.f(), direct.f());
        assert_eq!(table.phi(), direct.phi());

        let mut rng = seeded_rng(1, 0);
        let u = random_unitary(&mut rng, 3, false);
        let d = vec![c(1.0, 1.0), c(-2.0, 0.0), c(1.0, 1.0)];
        let fam = CommutingFamily::from_diagonals(u, vec![d.clone(), d]).unwrap();
        let (gamma, table, decomp) = build_commuting_problem(&fam, FieldMode::Complex).unwrap();
        assert_eq!(gamma.multiplicity_map(), &[vec![0, 2], vec![1]]);
        let sol = solve_minimax(&table, &MinimaxOptions::default()).unwrap();
        assert!(sol.delta() < 1e-12 && (sol.alpha_star().0[0] - ONE).norm() < 1e-12);
        assert_eq!(decomp.lambdas, reals(&[1.0, 2.0, 1.0]));

        let a = DenseMatrix::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let b = a.transpose();
        let bad = CommutingFamily::new(DenseMatrix::identity(2), vec![reals(&[0.0, 0.0]); 2], Some(vec![a, b])).unwrap();
        assert!(build_commuting_problem(&bad, FieldMode::Complex).is_err());
    }

    #[test]
    fn json_round_trips() {
        let s = 1.0 / 2f64.sqrt();
        let q = DenseMatrix::from_rows(&[vec![c(s, 0.0), c(s, 0.0)], vec![c(0.0, -s), c(0.0, s)]]).unwrap();
        let d = SpectralDecomposition::new(q, vec![c(0.0, 1.0), c(0.0, -1.0)], FieldMode::Real, Some(vec![1, 0])).unwrap();
        let json = serde_json::to_string(&MatrixSpec::from_decomposition(&d)).unwrap();
        assert!(json.contains("\"Q\"") && json.contains("\"pairing\":[1,0]") && json.contains("\"mode\":\"real\""));
        let back: MatrixSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_decomposition().unwrap(), d);

        let fam = CommutingFamily::from_diagonals(DenseMatrix::identity(2), vec![reals(&[1.0, 2.0]); 2]).unwrap();
        let json = serde_json::to_string(&CommutingSpec::from_family(&fam)).unwrap();
        let back: CommutingSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_family().unwrap(), fam);
    }
}

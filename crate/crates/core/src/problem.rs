//! The scalar approximation problem: a finite point set and tabulated
//! values of `f` and the basis functions `φ_1, …, φ_k` on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Cx, DenseMatrix, ONE, ZERO};

/// Whether coefficients (and, for matrices, vectors) range over the reals or
/// the complex numbers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FieldMode {
    Real,
    #[default]
    Complex,
}

/// Default clustering tolerance for a spectrum: `1e-10 (1 + max |λ|)`.
pub fn default_tolerance(values: &[Cx]) -> f64 {
    1e-10 * (1.0 + values.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Distinct points of a spectrum together with the eigenvalue indices each
/// point stands for.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    points: Vec<Cx>,
    members: Vec<Vec<usize>>,
    owner: Vec<usize>,
}

impl PointSet {
    /// Merge eigenvalues closer than `dedupe_tol`.
    ///
    /// Clusters are formed by a greedy sweep in lexicographic `(re, im)`
    /// order: each value joins the first representative within tolerance or
    /// becomes a representative itself. Points are then listed in order of
    /// their smallest eigenvalue index.
    pub fn from_spectrum(eigenvalues: &[Cx], dedupe_tol: f64) -> Self {
        let mut order: Vec<usize> = (0..eigenvalues.len()).collect();
        order.sort_by(|&a, &b| {
            let (x, y) = (eigenvalues[a], eigenvalues[b]);
            x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)).then(a.cmp(&b))
        });

        let mut reps: Vec<(Cx, Vec<usize>)> = Vec::new();
        for idx in order {
            let z = eigenvalues[idx];
            match reps.iter_mut().find(|(r, _)| (*r - z).norm() <= dedupe_tol) {
                Some((_, m)) => m.push(idx),
                None => reps.push((z, vec![idx])),
            }
        }
        for (_, m) in reps.iter_mut() {
            m.sort_unstable();
        }
        reps.sort_by_key(|(_, m)| m[0]);

        let mut owner = vec![0; eigenvalues.len()];
        for (p, (_, m)) in reps.iter().enumerate() {
            for &i in m {
                owner[i] = p;
            }
        }
        let (points, members) = reps.into_iter().unzip();
        PointSet { points, members, owner }
    }

    /// Point set whose points are given pairwise distinct, one eigenvalue
    /// index per point.
    pub fn distinct(points: Vec<Cx>, tol: f64) -> Result<Self> {
        let set = Self::from_spectrum(&points, tol);
        if set.len() != points.len() {
            return Err(Error::invalid("points are not pairwise distinct"));
        }
        Ok(set)
    }

    /// Point set with an explicit multiplicity map; `members` must
    /// partition `0..n`.
    pub fn with_members(points: Vec<Cx>, members: Vec<Vec<usize>>) -> Result<Self> {
        if points.len() != members.len() {
            return Err(Error::dim("one member list per point required"));
        }
        let total: usize = members.iter().map(Vec::len).sum();
        let mut owner = vec![usize::MAX; total];
        for (p, m) in members.iter().enumerate() {
            if m.is_empty() {
                return Err(Error::invalid("point without eigenvalue indices"));
            }
            for &i in m {
                if i >= total || owner[i] != usize::MAX {
                    return Err(Error::invalid("multiplicity map is not a partition"));
                }
                owner[i] = p;
            }
        }
        Ok(PointSet { points, members, owner })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Cx] {
        &self.points
    }

    /// Eigenvalue indices represented by point `p`, ascending.
    pub fn members(&self, p: usize) -> &[usize] {
        &self.members[p]
    }

    pub fn multiplicity_map(&self) -> &[Vec<usize>] {
        &self.members
    }

    /// The point that eigenvalue index `i` was merged into.
    pub fn owner(&self, i: usize) -> usize {
        self.owner[i]
    }

    /// Number of original eigenvalue indices.
    pub fn spectrum_len(&self) -> usize {
        self.owner.len()
    }

    /// For every point, the index of the point nearest its conjugate, or
    /// `None` if some conjugate is farther than `tol`.
    pub fn conjugate_pairing(&self, tol: f64) -> Option<Vec<usize>> {
        self.points
            .iter()
            .map(|z| {
                let target = z.conj();
                let (best, dist) = self
                    .points
                    .iter()
                    .enumerate()
                    .map(|(i, w)| (i, (w - target).norm()))
                    .min_by(|a, b| a.1.total_cmp(&b.1))?;
                (dist <= tol).then_some(best)
            })
            .collect()
    }
}

/// Coefficients `α` of `p = Σ α_i φ_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coefficients(pub Vec<Cx>);

impl Coefficients {
    pub fn zeros(k: usize) -> Self {
        Coefficients(vec![ZERO; k])
    }

    pub fn as_slice(&self) -> &[Cx] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.0.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }
}

/// Which problem family to tabulate.
#[derive(Clone, Debug, PartialEq)]
pub enum BasisKind {
    /// `f ≡ 1`, `φ_i(z) = z^i`, `i = 1..k`.
    Gmres(usize),
    /// `f(z) = z^k`, `φ_i(z) = z^{i−1}`, `i = 1..k`.
    Chebyshev(usize),
    /// Explicit values: `f` has one entry per point, `phi` is `n x k`.
    Custom { f: Vec<Cx>, phi: DenseMatrix },
}

/// Values of `f` and `φ_1..φ_k` on the points of `gamma`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationTable {
    gamma: PointSet,
    f: Vec<Cx>,
    phi: DenseMatrix,
    mode: FieldMode,
}

impl EvaluationTable {
    /// Validates dimensions and finiteness; in real mode also the
    /// conjugate-symmetry condition at the default pairing tolerance.
    pub fn new(gamma: PointSet, f: Vec<Cx>, phi: DenseMatrix, mode: FieldMode) -> Result<Self> {
        let n = gamma.len();
        if n == 0 {
            return Err(Error::invalid("empty point set"));
        }
        if f.len() != n || phi.rows() != n {
            return Err(Error::dim(format!(
                "{n} points but F has {} and Phi has {} rows",
                f.len(),
                phi.rows()
            )));
        }
        if phi.cols() == 0 {
            return Err(Error::invalid("at least one basis function is required"));
        }
        if !phi.is_finite() || f.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("table has non-finite entries"));
        }
        let table = EvaluationTable { gamma, f, phi, mode };
        if mode == FieldMode::Real {
            let tol = default_tolerance(table.gamma.points());
            let report = validate_conjugate_symmetry(&table, tol);
            if !report.passed {
                return Err(Error::Symmetry(report.summary()));
            }
        }
        Ok(table)
    }

    pub fn gamma(&self) -> &PointSet {
        &self.gamma
    }

    pub fn f(&self) -> &[Cx] {
        &self.f
    }

    pub fn phi(&self) -> &DenseMatrix {
        &self.phi
    }

    pub fn mode(&self) -> FieldMode {
        self.mode
    }

    pub fn with_mode(&self, mode: FieldMode) -> Result<Self> {
        Self::new(self.gamma.clone(), self.f.clone(), self.phi.clone(), mode)
    }

    /// Number of points.
    pub fn n(&self) -> usize {
        self.f.len()
    }

    /// Number of basis functions.
    pub fn k(&self) -> usize {
        self.phi.cols()
    }

    /// `p(λ_j)` for every point.
    pub fn eval(&self, alpha: &[Cx]) -> Vec<Cx> {
        self.phi.matvec(alpha)
    }

    /// `f(λ_j) − p(λ_j)` for every point.
    pub fn residuals(&self, alpha: &[Cx]) -> Vec<Cx> {
        self.eval(alpha).iter().zip(&self.f).map(|(p, f)| f - p).collect()
    }

    /// `‖f − p‖_Γ`.
    pub fn sup_error(&self, alpha: &[Cx]) -> f64 {
        self.residuals(alpha).iter().map(|r| r.norm()).fold(0.0, f64::max)
    }

    /// Reorder the points (and table rows) by `perm`, where `perm[new] = old`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        if perm.len() != n {
            return Err(Error::dim("permutation length"));
        }
        let points = perm.iter().map(|&p| self.gamma.points[p]).collect();
        let members = perm.iter().map(|&p| self.gamma.members[p].clone()).collect();
        let gamma = PointSet::with_members(points, members)?;
        let f = perm.iter().map(|&p| self.f[p]).collect();
        let rows: Vec<Vec<Cx>> = perm.iter().map(|&p| self.phi.row(p).to_vec()).collect();
        Self::new(gamma, f, DenseMatrix::from_rows(&rows)?, self.mode)
    }

    /// Multiply `f` and every basis function by `c`.
    pub fn scaled(&self, c: Cx) -> Result<Self> {
        let f = self.f.iter().map(|z| z * c).collect();
        Self::new(self.gamma.clone(), f, self.phi.scale(c), self.mode)
    }
}

/// Tabulate `kind` on `gamma`.
pub fn build_basis_problem(gamma: PointSet, kind: BasisKind, mode: FieldMode) -> Result<EvaluationTable> {
    let n = gamma.len();
    let (f, phi) = match kind {
        BasisKind::Gmres(k) => {
            if k == 0 {
                return Err(Error::invalid("k must be at least 1"));
            }
            let powers = monomials(gamma.points(), k + 1);
            let mut phi = DenseMatrix::zeros(n, k);
            for j in 0..n {
                for i in 0..k {
                    phi[(j, i)] = powers[j][i + 1];
                }
            }
            (vec![ONE; n], phi)
        }
        BasisKind::Chebyshev(k) => {
            if k == 0 {
                return Err(Error::invalid("k must be at least 1"));
            }
            let powers = monomials(gamma.points(), k + 1);
            let mut phi = DenseMatrix::zeros(n, k);
            for j in 0..n {
                for i in 0..k {
                    phi[(j, i)] = powers[j][i];
                }
            }
            (powers.iter().map(|p| p[k]).collect(), phi)
        }
        BasisKind::Custom { f, phi } => (f, phi),
    };
    EvaluationTable::new(gamma, f, phi, mode)
}

/// `z^0 .. z^{count-1}` for each point by repeated multiplication.
fn monomials(points: &[Cx], count: usize) -> Vec<Vec<Cx>> {
    points
        .iter()
        .map(|&z| {
            let mut row = Vec::with_capacity(count);
            let mut acc = ONE;
            for _ in 0..count {
                row.push(acc);
                acc *= z;
            }
            row
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum SymmetryViolation {
    /// No point of Γ lies within tolerance of the conjugate of this point.
    MissingConjugate { point: usize },
    /// `conj f(λ) ≠ f(conj λ)`.
    Function { point: usize, mismatch: f64 },
    /// `conj φ_i(λ) ≠ φ_i(conj λ)`.
    Basis { point: usize, basis: usize, mismatch: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryReport {
    pub passed: bool,
    pub violations: Vec<SymmetryViolation>,
}

impl SymmetryReport {
    pub fn summary(&self) -> String {
        match self.violations.first() {
            None => "ok".to_string(),
            Some(v) => format!("{} violation(s), first: {v:?}", self.violations.len()),
        }
    }
}

/// Check that Γ is closed under conjugation and that the tabulated functions
/// commute with conjugation, i.e. `conj g(λ) = g(conj λ)` for `f` and every
/// `φ_i`. Value mismatches are measured relative to `max(1, |g(λ)|)`.
pub fn validate_conjugate_symmetry(table: &EvaluationTable, pair_tol: f64) -> SymmetryReport {
    let pts = table.gamma.points();
    let mut violations = Vec::new();
    for (j, z) in pts.iter().enumerate() {
        let target = z.conj();
        let partner = pts
            .iter()
            .enumerate()
            .map(|(i, w)| (i, (w - target).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .filter(|&(_, d)| d <= pair_tol)
            .map(|(i, _)| i);
        let Some(s) = partner else {
            violations.push(SymmetryViolation::MissingConjugate { point: j });
            continue;
        };
        let mismatch = |a: Cx, b: Cx| (a.conj() - b).norm() / a.norm().max(1.0);
        let m = mismatch(table.f[j], table.f[s]);
        if m > pair_tol {
            violations.push(SymmetryViolation::Function { point: j, mismatch: m });
        }
        for i in 0..table.k() {
            let m = mismatch(table.phi[(j, i)], table.phi[(s, i)]);
            if m > pair_tol {
                violations.push(SymmetryViolation::Basis { point: j, basis: i, mismatch: m });
            }
        }
    }
    SymmetryReport { passed: violations.is_empty(), violations }
}

// ---------------------------------------------------------------------------
// JSON schema

/// Complex number as `[re, im]`.
pub type Pair = [f64; 2];

pub fn to_pair(z: Cx) -> Pair {
    [z.re, z.im]
}

pub fn from_pair(p: &Pair) -> Cx {
    Cx::new(p[0], p[1])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuilderKind {
    Gmres,
    Chebyshev,
}

/// On-disk problem description.
///
/// Either `F`/`Phi` or `kind`/`k` must be present. `alpha` optionally
/// carries candidate coefficients (used to test a given polynomial for
/// optimality).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub points: Vec<Pair>,
    #[serde(rename = "F", default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<Pair>>,
    #[serde(rename = "Phi", default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<Vec<Pair>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<BuilderKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default)]
    pub mode: FieldMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<Pair>>,
}

impl ProblemSpec {
    pub fn to_table(&self) -> Result<EvaluationTable> {
        let pts: Vec<Cx> = self.points.iter().map(from_pair).collect();
        if pts.is_empty() {
            return Err(Error::invalid("no points"));
        }
        let tol = default_tolerance(&pts);
        let kind = match (&self.kind, &self.f, &self.phi) {
            (Some(kind), None, None) => {
                let k = self.k.ok_or_else(|| Error::invalid("`kind` requires `k`"))?;
                match kind {
                    BuilderKind::Gmres => BasisKind::Gmres(k),
                    BuilderKind::Chebyshev => BasisKind::Chebyshev(k),
                }
            }
            (None, Some(f), Some(phi)) => {
                let rows: Vec<Vec<Cx>> =
                    phi.iter().map(|r| r.iter().map(from_pair).collect()).collect();
                BasisKind::Custom {
                    f: f.iter().map(from_pair).collect(),
                    phi: DenseMatrix::from_rows(&rows)?,
                }
            }
            _ => return Err(Error::invalid("give either `kind` and `k`, or `F` and `Phi`")),
        };
        let gamma = match kind {
            BasisKind::Custom { .. } => PointSet::distinct(pts, tol)?,
            _ => PointSet::from_spectrum(&pts, tol),
        };
        build_basis_problem(gamma, kind, self.mode)
    }

    pub fn alpha(&self) -> Option<Coefficients> {
        self.alpha.as_ref().map(|a| Coefficients(a.iter().map(from_pair).collect()))
    }

    pub fn from_table(table: &EvaluationTable) -> Self {
        ProblemSpec {
            points: table.gamma.points().iter().copied().map(to_pair).collect(),
            f: Some(table.f.iter().copied().map(to_pair).collect()),
            phi: Some(
                (0..table.n())
                    .map(|j| table.phi.row(j).iter().copied().map(to_pair).collect())
                    .collect(),
            ),
            kind: None,
            k: None,
            mode: table.mode,
            alpha: None,
        }
    }
}

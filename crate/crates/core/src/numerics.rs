//! Dense complex linear algebra used by the rest of the crate.
//!
//! Everything here is small and dense: matrices are row-major `Cx` arrays and
//! the sizes of interest are a few hundred at most. The Hermitian eigensolver
//! is cyclic Jacobi, least squares goes through Householder QR with column
//! pivoting, and random vectors use Box-Muller on top of PCG64.

use std::f64::consts::PI;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use crate::error::{Error, Result};

pub type Cx = Complex64;

pub const ZERO: Cx = Cx::new(0.0, 0.0);
pub const ONE: Cx = Cx::new(1.0, 0.0);

/// Relative threshold on the pivoted QR diagonal below which columns are
/// treated as linearly dependent.
pub const RANK_TOL: f64 = 1e-12;

/// Matrices of at most this order get their spectral norm from the
/// eigenvalues of `M^H M`; larger ones use power iteration.
const EIG_NORM_MAX_ORDER: usize = 128;
const JACOBI_MAX_SWEEPS: usize = 80;
const POWER_MAX_ITER: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Cx>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_diag(values: &[Cx]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Cx>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<Cx>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::dim("ragged rows"));
        }
        Self::from_row_major(rows.len(), cols, rows.concat())
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<Cx>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Cx::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn from_columns(cols: &[Vec<Cx>]) -> Result<Self> {
        let rows = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|c| c.len() != rows) {
            return Err(Error::dim("ragged columns"));
        }
        let mut m = Self::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for (i, &v) in c.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Cx] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Cx] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Cx> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[Cx]) {
        for (i, &v) in values.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(j, i)] = self[(i, j)];
            }
        }
        m
    }

    pub fn conj(&self) -> Self {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: Cx) -> Self {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn add_scaled(&mut self, s: Cx, other: &DenseMatrix) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn matvec(&self, x: &[Cx]) -> Vec<Cx> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// `self^H x` without forming the adjoint.
    pub fn adjoint_matvec(&self, x: &[Cx]) -> Vec<Cx> {
        debug_assert_eq!(x.len(), self.rows);
        let mut y = vec![ZERO; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (yj, a) in y.iter_mut().zip(self.row(i)) {
                *yj += a.conj() * xi;
            }
        }
        y
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::dim(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                if a == ZERO {
                    continue;
                }
                let orow = other.row(l);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.data.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `‖self^H self − I‖_F`.
    pub fn unitarity_defect(&self) -> f64 {
        let g = self.adjoint() * self;
        (&g - &DenseMatrix::identity(self.cols)).frobenius_norm()
    }

    pub fn to_rows(&self) -> Vec<Vec<Cx>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = Cx;
    fn index(&self, (i, j): (usize, usize)) -> &Cx {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Cx {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul<&DenseMatrix> for &DenseMatrix {
    type Output = DenseMatrix;
    fn mul(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.matmul(rhs).expect("matrix product dimensions")
    }
}

impl Mul<&DenseMatrix> for DenseMatrix {
    type Output = DenseMatrix;
    fn mul(self, rhs: &DenseMatrix) -> DenseMatrix {
        &self * rhs
    }
}

impl Sub<&DenseMatrix> for &DenseMatrix {
    type Output = DenseMatrix;
    fn sub(self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        }
    }
}

impl Add<&DenseMatrix> for &DenseMatrix {
    type Output = DenseMatrix;
    fn add(self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        }
    }
}

pub fn norm2(x: &[Cx]) -> f64 {
    // scaled by the largest entry
    let scale = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * x.iter().map(|z| (z / scale).norm_sqr()).sum::<f64>().sqrt()
}

/// Euclidean inner product `x^H y`.
pub fn dot(x: &[Cx], y: &[Cx]) -> Cx {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn normalize(x: &mut [Cx]) -> f64 {
    let nrm = norm2(x);
    if nrm > 0.0 {
        for z in x.iter_mut() {
            *z /= nrm;
        }
    }
    nrm
}

pub fn max_abs_imag(x: &[Cx]) -> f64 {
    x.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Hermitian eigensolver

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns `(Q, lambdas)` with `H = Q diag(lambdas) Q^H`, eigenvalues in
/// ascending order and the columns of `Q` permuted to match.
pub fn hermitian_eig(h: &DenseMatrix, tol: f64) -> Result<(DenseMatrix, Vec<f64>)> {
    if !h.is_square() {
        return Err(Error::dim(format!("{}x{} matrix is not square", h.rows, h.cols)));
    }
    if !h.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let n = h.rows;
    let fro = h.frobenius_norm();
    let skew = (h - &h.adjoint()).frobenius_norm();
    if skew > tol * fro {
        return Err(Error::invalid(format!(
            "matrix is not Hermitian: ‖H − H^H‖_F = {skew:e}"
        )));
    }

    // work on the exactly Hermitian part
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = Cx::new(h[(i, i)].re, 0.0);
        for j in i + 1..n {
            let v = 0.5 * (h[(i, j)] + h[(j, i)].conj());
            a[(i, j)] = v;
            a[(j, i)] = v.conj();
        }
    }
    let mut q = DenseMatrix::identity(n);

    let off_norm = |a: &DenseMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                s += 2.0 * a[(i, j)].norm_sqr();
            }
        }
        s.sqrt()
    };

    let target = f64::EPSILON * fro;
    let mut sweeps = 0;
    loop {
        let off = off_norm(&a);
        if off <= target || fro == 0.0 {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::Convergence { iterations: sweeps, achieved: off });
        }
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for r in p + 1..n {
                let apr = a[(p, r)];
                let mag = apr.norm();
                let app = a[(p, p)].re;
                let arr = a[(r, r)].re;
                if mag == 0.0 || mag <= 0.25 * f64::EPSILON * (app.abs() * arr.abs()).sqrt() {
                    a[(p, r)] = ZERO;
                    a[(r, p)] = ZERO;
                    continue;
                }
                rotated = true;
                // phase so that the (p, r) entry becomes real and positive
                // column r scaled by d, row r by conj(d)
                let d = (apr / mag).conj();
                for k in 0..n {
                    a[(k, r)] *= d;
                }
                for k in 0..n {
                    a[(r, k)] *= d.conj();
                }
                for k in 0..n {
                    q[(k, r)] *= d;
                }
                // real symmetric 2x2 rotation annihilating the now-real entry
                let tau = (arr - app) / (2.0 * mag);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akr = a[(k, r)];
                    a[(k, p)] = akp * c - akr * s;
                    a[(k, r)] = akp * s + akr * c;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let ark = a[(r, k)];
                    a[(p, k)] = apk * c - ark * s;
                    a[(r, k)] = apk * s + ark * c;
                }
                a[(p, r)] = ZERO;
                a[(r, p)] = ZERO;
                a[(p, p)].im = 0.0;
                a[(r, r)].im = 0.0;
                for k in 0..n {
                    let qkp = q[(k, p)];
                    let qkr = q[(k, r)];
                    q[(k, p)] = qkp * c - qkr * s;
                    q[(k, r)] = qkp * s + qkr * c;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let lambdas = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut sorted = DenseMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            sorted[(k, new)] = q[(k, old)];
        }
    }
    Ok((sorted, lambdas))
}

// ---------------------------------------------------------------------------
// Householder QR and least squares

/// Householder QR factorization `A P = Q R`, optionally with column pivoting.
#[derive(Clone, Debug)]
pub struct HouseholderQr {
    rows: usize,
    cols: usize,
    /// Upper-trapezoidal factor, `rows x cols` (only the upper part is used).
    r: DenseMatrix,
    /// Reflector `k` acts on entries `k..rows`; stored unnormalized with its
    /// squared norm. A zero reflector is the identity.
    reflectors: Vec<(Vec<Cx>, f64)>,
    /// `perm[j]` is the original column index in position `j`.
    perm: Vec<usize>,
}

impl HouseholderQr {
    pub fn new(a: &DenseMatrix, pivoting: bool) -> Self {
        let (m, n) = (a.rows, a.cols);
        let mut r = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let steps = m.min(n);
        let mut reflectors = Vec::with_capacity(steps);
        let mut colnorms: Vec<f64> = (0..n)
            .map(|j| (0..m).map(|i| r[(i, j)].norm_sqr()).sum())
            .collect();

        for k in 0..steps {
            if pivoting {
                let (best, _) = colnorms[k..]
                    .iter()
                    .enumerate()
                    .fold((0, -1.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
                let best = best + k;
                if best != k {
                    for i in 0..m {
                        let tmp = r[(i, k)];
                        r[(i, k)] = r[(i, best)];
                        r[(i, best)] = tmp;
                    }
                    perm.swap(k, best);
                    colnorms.swap(k, best);
                }
            }

            let x: Vec<Cx> = (k..m).map(|i| r[(i, k)]).collect();
            let xnorm = norm2(&x);
            if xnorm == 0.0 {
                reflectors.push((Vec::new(), 0.0));
                continue;
            }
            let phase = if x[0] == ZERO { ONE } else { x[0] / x[0].norm() };
            let alpha = -phase * xnorm;
            let mut v = x;
            v[0] -= alpha;
            let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            for j in k..n {
                let s: Cx = (k..m).map(|i| v[i - k].conj() * r[(i, j)]).sum();
                let f = s * (2.0 / vnorm2);
                for i in k..m {
                    r[(i, j)] -= f * v[i - k];
                }
            }
            // exact zeros below the diagonal
            r[(k, k)] = alpha;
            for i in k + 1..m {
                r[(i, k)] = ZERO;
            }
            reflectors.push((v, vnorm2));
            if pivoting {
                // recompute trailing column norms; sizes here are tiny
                for j in k + 1..n {
                    colnorms[j] = (k + 1..m).map(|i| r[(i, j)].norm_sqr()).sum();
                }
            }
        }
        HouseholderQr { rows: m, cols: n, r, reflectors, perm }
    }

    pub fn r(&self) -> &DenseMatrix {
        &self.r
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Numerical rank: diagonal entries of R above `tol * |R_00|`.
    pub fn rank(&self, tol: f64) -> usize {
        let steps = self.rows.min(self.cols);
        if steps == 0 {
            return 0;
        }
        let lead = self.r[(0, 0)].norm();
        if lead == 0.0 {
            return 0;
        }
        (0..steps).take_while(|&i| self.r[(i, i)].norm() > tol * lead).count()
    }

    /// `Q^H b` in place.
    pub fn apply_qh(&self, b: &mut [Cx]) {
        for (k, (v, vn2)) in self.reflectors.iter().enumerate() {
            if *vn2 == 0.0 {
                continue;
            }
            let s: Cx = v.iter().zip(&b[k..]).map(|(a, b)| a.conj() * b).sum();
            let f = s * (2.0 / vn2);
            for (bi, vi) in b[k..].iter_mut().zip(v) {
                *bi -= f * vi;
            }
        }
    }

    /// `Q y` in place.
    pub fn apply_q(&self, y: &mut [Cx]) {
        for (k, (v, vn2)) in self.reflectors.iter().enumerate().rev() {
            if *vn2 == 0.0 {
                continue;
            }
            let s: Cx = v.iter().zip(&y[k..]).map(|(a, b)| a.conj() * b).sum();
            let f = s * (2.0 / vn2);
            for (yi, vi) in y[k..].iter_mut().zip(v) {
                *yi -= f * vi;
            }
        }
    }

    /// The explicit `rows x rows` unitary factor.
    pub fn q(&self) -> DenseMatrix {
        let m = self.rows;
        let mut q = DenseMatrix::zeros(m, m);
        for j in 0..m {
            let mut e = vec![ZERO; m];
            e[j] = ONE;
            self.apply_q(&mut e);
            q.set_column(j, &e);
        }
        q
    }
}

/// Minimum-norm least-squares solution of `A x ≈ b`.
///
/// Column-pivoted QR determines the numerical rank; when `A` is rank
/// deficient the trapezoidal factor is reduced by a second QR of its adjoint
/// (complete orthogonal decomposition) so the returned `x` has minimum norm
/// among all minimizers.
pub fn least_squares(a: &DenseMatrix, b: &[Cx]) -> Result<Vec<Cx>> {
    if b.len() != a.rows {
        return Err(Error::dim(format!(
            "right-hand side has {} entries, matrix has {} rows",
            b.len(),
            a.rows
        )));
    }
    let k = a.cols;
    let qr = HouseholderQr::new(a, true);
    let rank = qr.rank(RANK_TOL);
    let mut c = b.to_vec();
    qr.apply_qh(&mut c);

    let mut y = vec![ZERO; k];
    if rank == k {
        back_substitute(qr.r(), &c[..k], &mut y);
    } else if rank > 0 {
        // T = R[0..rank, 0..k]; T^H = Z S with S upper triangular rank x rank
        let mut th = DenseMatrix::zeros(k, rank);
        for i in 0..rank {
            for j in i..k {
                th[(j, i)] = qr.r()[(i, j)].conj();
            }
        }
        let z = HouseholderQr::new(&th, false);
        let s = z.r();
        // S^H u = c[0..rank] by forward substitution
        let mut u = vec![ZERO; k];
        for i in 0..rank {
            let mut acc = c[i];
            for j in 0..i {
                acc -= s[(j, i)].conj() * u[j];
            }
            u[i] = acc / s[(i, i)].conj();
        }
        z.apply_q(&mut u);
        y = u;
    }

    let mut x = vec![ZERO; k];
    for (pos, &orig) in qr.permutation().iter().enumerate() {
        x[orig] = y[pos];
    }
    Ok(x)
}

fn back_substitute(r: &DenseMatrix, c: &[Cx], y: &mut [Cx]) {
    let k = y.len();
    for i in (0..k).rev() {
        let mut acc = c[i];
        for j in i + 1..k {
            acc -= r[(i, j)] * y[j];
        }
        y[i] = acc / r[(i, i)];
    }
}

/// Minimizer of `Σ_j ω_j |F_j − (Φα)_j|²` with minimum norm.
pub fn weighted_least_squares(phi: &DenseMatrix, f: &[Cx], omega: &[f64]) -> Result<Vec<Cx>> {
    let n = phi.rows;
    if f.len() != n || omega.len() != n {
        return Err(Error::dim(format!(
            "table has {n} rows but F has {} and ω has {} entries",
            f.len(),
            omega.len()
        )));
    }
    if omega.iter().any(|&w| w.is_nan() || w < 0.0) {
        return Err(Error::invalid("weights must be nonnegative"));
    }
    if omega.iter().all(|&w| w == 0.0) {
        return Err(Error::invalid("weights are all zero"));
    }
    let mut scaled = phi.clone();
    let mut rhs = f.to_vec();
    for (j, &w) in omega.iter().enumerate() {
        let s = w.sqrt();
        for i in 0..phi.cols {
            scaled[(j, i)] *= s;
        }
        rhs[j] *= s;
    }
    least_squares(&scaled, &rhs)
}

/// Nonnegative least squares `min ‖A x − b‖` subject to `x ≥ 0` by the
/// Lawson-Hanson active-set method. `A` must be real (imaginary parts are
/// ignored). Returns the solution and the residual norm.
pub fn nnls(a: &DenseMatrix, b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let (m, n) = (a.rows, a.cols);
    if b.len() != m {
        return Err(Error::dim(format!("right-hand side has {} entries, matrix has {m} rows", b.len())));
    }
    let entry = |i: usize, j: usize| a[(i, j)].re;
    let anorm = a.as_slice().iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    let tol = 10.0 * f64::EPSILON * anorm * (m.max(n) as f64);
    let residual = |x: &[f64]| -> Vec<f64> {
        (0..m).map(|i| b[i] - (0..n).map(|j| entry(i, j) * x[j]).sum::<f64>()).collect()
    };
    let gradient = |r: &[f64]| -> Vec<f64> {
        (0..n).map(|j| (0..m).map(|i| entry(i, j) * r[i]).sum()).collect()
    };
    let solve_passive = |passive: &[bool]| -> Result<Vec<f64>> {
        let cols: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let mut sub = DenseMatrix::zeros(m, cols.len());
        for (c, &j) in cols.iter().enumerate() {
            for i in 0..m {
                sub[(i, c)] = Cx::new(entry(i, j), 0.0);
            }
        }
        let rhs: Vec<Cx> = b.iter().map(|&v| Cx::new(v, 0.0)).collect();
        let zc = least_squares(&sub, &rhs)?;
        let mut z = vec![0.0; n];
        for (c, &j) in cols.iter().enumerate() {
            z[j] = zc[c].re;
        }
        Ok(z)
    };

    let mut x = vec![0.0; n];
    let mut passive = vec![false; n];
    let max_outer = 3 * n + 10;
    for _ in 0..max_outer {
        let w = gradient(&residual(&x));
        let cand = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(t) = cand else { break };
        passive[t] = true;
        let mut entered = true;
        loop {
            let z = solve_passive(&passive)?;
            if (0..n).filter(|&j| passive[j]).all(|j| z[j] > 0.0) {
                x = z;
                break;
            }
            if entered && z[t] <= 0.0 {
                // the new column cannot enter; numerical tie
                passive[t] = false;
                break;
            }
            entered = false;
            let mut step = 1.0f64;
            for j in 0..n {
                if passive[j] && z[j] <= 0.0 {
                    step = step.min(x[j] / (x[j] - z[j]));
                }
            }
            for j in 0..n {
                x[j] += step * (z[j] - x[j]);
                if passive[j] && x[j] <= tol {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
        }
    }
    let r = residual(&x);
    Ok((x, r.iter().map(|v| v * v).sum::<f64>().sqrt()))
}

// ---------------------------------------------------------------------------
// Spectral norm

/// Largest singular value of `m`.
pub fn spectral_norm(m: &DenseMatrix, tol: f64) -> Result<f64> {
    if !m.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    if m.rows == 0 || m.cols == 0 {
        return Ok(0.0);
    }
    let scale = m.as_slice().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let ms = m.scale(Cx::new(1.0 / scale, 0.0));
    let order = m.rows.min(m.cols);
    if order <= EIG_NORM_MAX_ORDER {
        let gram = if m.cols <= m.rows { ms.adjoint() * &ms } else { &ms * &ms.adjoint() };
        let (_, lambdas) = hermitian_eig(&gram, 1e-8)?;
        let top = lambdas.last().copied().unwrap_or(0.0).max(0.0);
        return Ok(scale * top.sqrt());
    }
    power_spectral_norm(&ms, tol).map(|s| s * scale)
}

fn power_spectral_norm(m: &DenseMatrix, tol: f64) -> Result<f64> {
    let mut rng = Pcg64::seed_from_u64(0x5eed);
    let mut x = random_unit_vector_with(&mut rng, m.cols, false);
    let mut prev = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let y = m.matvec(&x);
        let mut z = m.adjoint_matvec(&y);
        let rq = dot(&x, &z).re.max(0.0);
        let sigma = rq.sqrt();
        if normalize(&mut z) == 0.0 {
            return Ok(0.0);
        }
        x = z;
        if (sigma - prev).abs() <= tol * sigma {
            return Ok(sigma);
        }
        prev = sigma;
    }
    Err(Error::Convergence { iterations: POWER_MAX_ITER, achieved: prev })
}

// ---------------------------------------------------------------------------
// Random sampling

/// Generator for substream `stream` of `seed`.
pub fn seeded_rng(seed: u64, stream: u64) -> Pcg64 {
    Pcg64::new(
        (u128::from(seed) << 64) | u128::from(seed ^ 0x9e37_79b9_7f4a_7c15),
        u128::from(stream),
    )
}

/// Standard normal pair by Box-Muller.
fn box_muller<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    // u1 in (0, 1] keeps the logarithm finite
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    let rad = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (2.0 * PI * u2).sin_cos();
    (rad * c, rad * s)
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, n: usize, real_only: bool) -> Vec<Cx> {
    if real_only {
        let mut out = Vec::with_capacity(n + 1);
        while out.len() < n {
            let (a, b) = box_muller(rng);
            out.push(Cx::new(a, 0.0));
            out.push(Cx::new(b, 0.0));
        }
        out.truncate(n);
        out
    } else {
        (0..n)
            .map(|_| {
                let (a, b) = box_muller(rng);
                Cx::new(a, b)
            })
            .collect()
    }
}

pub fn random_unit_vector_with<R: Rng + ?Sized>(rng: &mut R, n: usize, real_only: bool) -> Vec<Cx> {
    loop {
        let mut v = gaussian_vector(rng, n, real_only);
        if normalize(&mut v) > 0.0 {
            return v;
        }
    }
}

/// Gaussian vector normalized to unit length; deterministic in `seed`.
pub fn random_unit_vector(n: usize, seed: u64, real_only: bool) -> Result<Vec<Cx>> {
    if n == 0 {
        return Err(Error::invalid("vector length must be positive"));
    }
    let mut rng = seeded_rng(seed, 0);
    Ok(random_unit_vector_with(&mut rng, n, real_only))
}

/// Haar-distributed unitary (or orthogonal when `real_only`) matrix from
/// the QR factorization of a Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize, real_only: bool) -> DenseMatrix {
    let mut g = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let col = gaussian_vector(rng, n, real_only);
        g.set_column(j, &col);
    }
    let qr = HouseholderQr::new(&g, false);
    let mut q = qr.q();
    // fix column phases so the distribution is Haar
    for j in 0..n {
        let d = qr.r()[(j, j)];
        let ph = if d == ZERO { ONE } else { d / d.norm() };
        for i in 0..n {
            q[(i, j)] *= ph;
        }
    }
    q
}

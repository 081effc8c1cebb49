//! Unit vectors attaining the minimax value.
//!
//! With certificate weights `ω` on the extremal points and `A = QΛQ^H`,
//! the vector `v* = Qξ` with `|ξ_j|² = ω_j` satisfies
//! `min_α ‖f(A)v* − Σ α_i φ_i(A)v*‖ = δ`. For real problems the polynomial
//! is first made real and the certificate closed under conjugation, which
//! makes `v*` real.

use serde::{Deserialize, Serialize};

use crate::certificate::Certificate;
use crate::error::{Error, Result};
use crate::matrix_bridge::SpectralDecomposition;
use crate::numerics::{max_abs_imag, norm2, Cx, ZERO};
use crate::problem::{default_tolerance, validate_conjugate_symmetry, Coefficients, EvaluationTable, PointSet};

/// Default tolerance for matching a point with its conjugate.
pub const DEFAULT_PAIR_TOL: f64 = 1e-10;

/// Certificate closed under conjugation, with weights equal on conjugate
/// points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetrizedCertificate {
    pub theta: Vec<Cx>,
    pub omega_tilde: Vec<f64>,
    /// `theta[pairing[i]] = conj(theta[i])`.
    pub pairing: Vec<usize>,
    /// Index of each `theta[i]` in Γ.
    pub indices: Vec<usize>,
    /// `f − p*` at each `theta[i]`.
    #[serde(skip)]
    pub residuals: Vec<Cx>,
}

impl SymmetrizedCertificate {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// `max_t |Σ_i ω̃_i r(θ_i) conj(Φ_{θ_i, t})|`.
    pub fn condition_residual(&self, table: &EvaluationTable) -> f64 {
        crate::certificate::moments(table, &self.indices, &self.omega_tilde, &self.residuals)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseVector {
    #[serde(rename = "v")]
    pub v_star: Vec<Cx>,
    #[serde(skip)]
    pub xi: Vec<Cx>,
    pub attained: f64,
}

impl WorstCaseVector {
    /// Largest imaginary part of `v*`.
    pub fn max_imag(&self) -> f64 {
        max_abs_imag(&self.v_star)
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.v_star)
    }
}

fn check_spectrum(decomp: &SpectralDecomposition, gamma: &PointSet) -> Result<()> {
    let n = decomp.n();
    if gamma.spectrum_len() != n {
        return Err(Error::dim(format!(
            "point set covers {} eigenvalues, decomposition has {n}",
            gamma.spectrum_len()
        )));
    }
    let tol = 10.0 * default_tolerance(&decomp.lambdas).max(DEFAULT_PAIR_TOL);
    for (j, &lam) in decomp.lambdas.iter().enumerate() {
        if (gamma.points()[gamma.owner(j)] - lam).norm() > tol {
            return Err(Error::invalid(format!("eigenvalue {j} does not match its point")));
        }
    }
    Ok(())
}

fn finish(decomp: &SpectralDecomposition, xi: Vec<Cx>, gamma: &PointSet, residual_at: impl Fn(usize) -> Cx) -> WorstCaseVector {
    let attained = xi
        .iter()
        .enumerate()
        .map(|(j, x)| x.norm_sqr() * residual_at(gamma.owner(j)).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let v_star = decomp.q.matvec(&xi);
    WorstCaseVector { v_star, xi, attained }
}

/// `v* = Qξ` with `ξ = √ω_j` at the first eigenvalue index of each support
/// point and zero elsewhere.
pub fn complex_worst_vector(
    cert: &Certificate,
    decomp: &SpectralDecomposition,
    gamma: &PointSet,
) -> Result<WorstCaseVector> {
    check_spectrum(decomp, gamma)?;
    if cert.support.iter().any(|&p| p >= gamma.len()) || cert.support_residuals.len() != cert.support.len() {
        return Err(Error::dim("certificate does not fit the point set"));
    }
    let mut xi = vec![ZERO; decomp.n()];
    let mut res = vec![ZERO; gamma.len()];
    for ((&p, &w), &r) in cert.support.iter().zip(&cert.omega).zip(&cert.support_residuals) {
        xi[gamma.members(p)[0]] = Cx::new(w.sqrt(), 0.0);
        res[p] = r;
    }
    Ok(finish(decomp, xi, gamma, |p| res[p]))
}

/// Real parts of `α`. On a conjugate-symmetric table this never increases
/// the sup error.
pub fn realize_polynomial(alpha: &Coefficients, table: &EvaluationTable) -> Result<Coefficients> {
    if alpha.len() != table.k() {
        return Err(Error::dim("coefficient count differs from basis size"));
    }
    let report = validate_conjugate_symmetry(table, DEFAULT_PAIR_TOL);
    if !report.passed {
        return Err(Error::Symmetry(report.summary()));
    }
    Ok(Coefficients(alpha.0.iter().map(|z| Cx::new(z.re, 0.0)).collect()))
}

/// Close the support under conjugation.
///
/// A real point keeps its weight; a non-real point gives half its weight
/// to itself and half to its conjugate, so a conjugate pair in the support
/// ends up with `ω_j/2 + ω_s/2` on both points. Residuals at added points
/// are the conjugates of their partners' (valid for real `p*`).
pub fn symmetrize_certificate(cert: &Certificate, gamma: &PointSet, pair_tol: f64) -> Result<SymmetrizedCertificate> {
    if cert.support.iter().any(|&p| p >= gamma.len()) || cert.support_residuals.len() != cert.support.len() {
        return Err(Error::dim("certificate does not fit the point set"));
    }
    let pts = gamma.points();
    let partner_of = |p: usize| -> Result<usize> {
        let target = pts[p].conj();
        (0..pts.len())
            .map(|s| (s, (pts[s] - target).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .filter(|&(_, d)| d <= pair_tol)
            .map(|(s, _)| s)
            .ok_or_else(|| Error::Symmetry(format!("conjugate of point {p} ({}) is not in the point set", pts[p])))
    };

    let mut indices: Vec<usize> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut residuals: Vec<Option<Cx>> = Vec::new();
    let slot = |p: usize, indices: &mut Vec<usize>, weights: &mut Vec<f64>, residuals: &mut Vec<Option<Cx>>| {
        indices.iter().position(|&q| q == p).unwrap_or_else(|| {
            indices.push(p);
            weights.push(0.0);
            residuals.push(None);
            indices.len() - 1
        })
    };

    for ((&p, &w), &r) in cert.support.iter().zip(&cert.omega).zip(&cert.support_residuals) {
        let s = partner_of(p)?;
        let i = slot(p, &mut indices, &mut weights, &mut residuals);
        residuals[i] = Some(r);
        if s == p {
            weights[i] += w;
        } else {
            weights[i] += w / 2.0;
            let t = slot(s, &mut indices, &mut weights, &mut residuals);
            weights[t] += w / 2.0;
            residuals[t].get_or_insert(r.conj());
        }
    }

    let pairing = indices
        .iter()
        .map(|&p| {
            let s = partner_of(p)?;
            indices.iter().position(|&q| q == s).ok_or_else(|| Error::Symmetry("pairing not closed".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SymmetrizedCertificate {
        theta: indices.iter().map(|&p| pts[p]).collect(),
        omega_tilde: weights,
        pairing,
        residuals: residuals.into_iter().map(|r| r.unwrap_or(ZERO)).collect(),
        indices,
    })
}

/// Real worst-case vector from a symmetrized certificate.
///
/// For a non-real point with first eigenvalue index `j`, both `ξ_j` and
/// `ξ_{π(j)}` get `√ω̃`; a real point whose eigenvector is paired with a
/// different column splits its weight between the two. `Qξ` is then real.
pub fn real_worst_vector(
    symcert: &SymmetrizedCertificate,
    decomp: &SpectralDecomposition,
    gamma: &PointSet,
) -> Result<WorstCaseVector> {
    check_spectrum(decomp, gamma)?;
    let pi = decomp
        .pairing
        .as_ref()
        .ok_or_else(|| Error::Symmetry("decomposition carries no conjugate pairing".into()))?;
    match decomp.pairing_defect() {
        Some(d) if d <= 1e-8 => {}
        _ => return Err(Error::Symmetry("decomposition pairing is inconsistent".into())),
    }

    let n = decomp.n();
    let mut xi = vec![ZERO; n];
    let mut res = vec![ZERO; gamma.len()];
    let mut done = vec![false; symcert.len()];
    for i in 0..symcert.len() {
        if done[i] {
            continue;
        }
        let s = symcert.pairing[i];
        let (p, w) = (symcert.indices[i], symcert.omega_tilde[i]);
        res[p] = symcert.residuals[i];
        res[symcert.indices[s]] = symcert.residuals[s];
        let j = gamma.members(p)[0];
        let partner = pi[j];
        if gamma.owner(partner) != symcert.indices[s] {
            return Err(Error::Symmetry(format!("eigenvector {j} is not paired with an eigenvector of the conjugate point")));
        }
        if s == i && partner != j {
            let half = Cx::new((w / 2.0).sqrt(), 0.0);
            xi[j] = half;
            xi[partner] = half;
        } else {
            xi[j] = Cx::new(w.sqrt(), 0.0);
            xi[partner] = Cx::new(symcert.omega_tilde[s].sqrt(), 0.0);
        }
        done[i] = true;
        done[s] = true;
    }
    Ok(finish(decomp, xi, gamma, |p| res[p]))
}

//! Random test instances: normal matrices with prescribed spectra and
//! commuting families.

use rand::Rng;

use crate::error::Result;
use crate::matrix_bridge::{CommutingFamily, SpectralDecomposition};
use crate::numerics::{random_unitary, Cx, DenseMatrix};
use crate::problem::FieldMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectrumShape {
    /// Uniform in the unit disk.
    Disk,
    /// On one to three concentric circles.
    Circles,
    /// On a random segment through the disk.
    Segment,
}

pub fn random_spectrum<R: Rng + ?Sized>(rng: &mut R, n: usize, shape: SpectrumShape) -> Vec<Cx> {
    match shape {
        SpectrumShape::Disk => (0..n)
            .map(|_| Cx::from_polar(rng.gen::<f64>().sqrt(), rng.gen_range(0.0..std::f64::consts::TAU)))
            .collect(),
        SpectrumShape::Circles => {
            let radii: Vec<f64> = (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(0.2..1.0)).collect();
            (0..n)
                .map(|_| {
                    let r = radii[rng.gen_range(0..radii.len())];
                    Cx::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU))
                })
                .collect()
        }
        SpectrumShape::Segment => {
            let a = Cx::from_polar(rng.gen_range(0.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU));
            let b = Cx::from_polar(rng.gen_range(0.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU));
            (0..n).map(|_| a + (b - a) * rng.gen::<f64>()).collect()
        }
    }
}

/// `A = QΛQ^H` with Haar-distributed unitary `Q`.
pub fn random_complex_normal<R: Rng + ?Sized>(rng: &mut R, lambdas: Vec<Cx>) -> Result<SpectralDecomposition> {
    let q = random_unitary(rng, lambdas.len(), false);
    SpectralDecomposition::new(q, lambdas, FieldMode::Complex, None)
}

/// Real normal matrix `O diag(B_1, …, B_m, x_1, …) O^T` with rotation-scaling
/// blocks `B = [[a, −b], [b, a]]` and real eigenvalues `x`, `O` Haar
/// orthogonal. `pairs` is the number of blocks; spectrum in the unit disk.
pub fn random_real_normal<R: Rng + ?Sized>(rng: &mut R, n: usize, pairs: usize) -> Result<SpectralDecomposition> {
    assert!(2 * pairs <= n, "too many conjugate pairs for order {n}");
    let o = random_unitary(rng, n, true);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut lambdas = Vec::with_capacity(n);
    let mut block = DenseMatrix::zeros(n, n);
    let mut pairing: Vec<usize> = (0..n).collect();
    for m in 0..pairs {
        let z = Cx::from_polar(rng.gen::<f64>().sqrt(), rng.gen_range(0.05..std::f64::consts::PI - 0.05));
        let (j, s) = (2 * m, 2 * m + 1);
        lambdas.push(z);
        lambdas.push(z.conj());
        block[(j, j)] = Cx::new(h, 0.0);
        block[(s, j)] = Cx::new(0.0, -h);
        block[(j, s)] = Cx::new(h, 0.0);
        block[(s, s)] = Cx::new(0.0, h);
        pairing[j] = s;
        pairing[s] = j;
    }
    for j in 2 * pairs..n {
        lambdas.push(Cx::new(rng.gen_range(-1.0..1.0), 0.0));
        block[(j, j)] = Cx::new(1.0, 0.0);
    }
    let q = &o * &block;
    SpectralDecomposition::new(q, lambdas, FieldMode::Real, Some(pairing))
}

/// `k + 1` commuting normal matrices of order `n` sharing a Haar unitary
/// eigenbasis, with the matrices formed explicitly.
pub fn random_commuting_family<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Result<CommutingFamily> {
    let u = random_unitary(rng, n, false);
    let diagonals = (0..=k)
        .map(|_| (0..n).map(|_| Cx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
        .collect();
    CommutingFamily::from_diagonals(u, diagonals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix_bridge::validate_decomposition;
    use crate::numerics::seeded_rng;

    #[test]
    fn real_instances_are_real_and_normal() {
        let mut rng = seeded_rng(5, 0);
        let d = random_real_normal(&mut rng, 9, 3).unwrap();
        let a = d.matrix();
        assert!(a.max_abs_imag() < 1e-14);
        let report = validate_decomposition(&d, Some(&a), 1e-10);
        assert!(report.passed, "{:?}", report.failures());
    }

    #[test]
    fn commuting_family_is_valid() {
        let mut rng = seeded_rng(6, 0);
        let f = random_commuting_family(&mut rng, 6, 3).unwrap();
        f.validate().unwrap();
    }
}

//! Benchmark fixtures: seeded random instances shared by the benches.

use minmax_core::generate::{random_complex_normal, random_real_normal, random_spectrum, SpectrumShape};
use minmax_core::numerics::seeded_rng;
use minmax_core::problem::BasisKind;
use minmax_core::{EvaluationTable, SpectralDecomposition};

/// Complex normal matrix of order `n` with a disk spectrum and a GMRES(k)
/// table.
pub fn complex_fixture(n: usize, k: usize) -> (SpectralDecomposition, EvaluationTable) {
    let mut rng = seeded_rng(0xBE7C, n as u64);
    let lambdas = random_spectrum(&mut rng, n, SpectrumShape::Disk);
    let d = random_complex_normal(&mut rng, lambdas).expect("valid fixture");
    let t = d.basis_problem(BasisKind::Gmres(k)).expect("valid fixture");
    (d, t)
}

/// Real normal matrix of order `n` with `n / 3` conjugate pairs and a
/// Chebyshev(k) table.
pub fn real_fixture(n: usize, k: usize) -> (SpectralDecomposition, EvaluationTable) {
    let mut rng = seeded_rng(0xBE7D, n as u64);
    let d = random_real_normal(&mut rng, n, n / 3).expect("valid fixture");
    let t = d.basis_problem(BasisKind::Chebyshev(k)).expect("valid fixture");
    (d, t)
}

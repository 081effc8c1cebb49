//! Built-in instances.

use clap::ValueEnum;
use minmax_core::numerics::DenseMatrix;
use minmax_core::problem::BasisKind;
use minmax_core::{Cx, FieldMode, Result, SpectralDecomposition};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Demo {
    /// `diag(1, 3)`, `f ≡ 1`, `φ_1 = z`; δ = 1/2.
    Gmres13,
    /// `diag(−1, 0, 1)`, `f = z²`, `φ = 1, z`; δ = 1/2.
    Chebyshev,
    /// Fourth roots of unity, `f ≡ 1`, `φ_1 = z`; δ = 1.
    Roots,
    /// Real 2×2 rotation by π/2, `f ≡ 1`, `φ_1 = z`; δ = 1.
    Rotation,
}

pub fn instance(demo: Demo) -> Result<(SpectralDecomposition, BasisKind)> {
    let c = Cx::new;
    match demo {
        Demo::Gmres13 => Ok((
            SpectralDecomposition::diagonal(vec![c(1.0, 0.0), c(3.0, 0.0)], FieldMode::Complex)?,
            BasisKind::Gmres(1),
        )),
        Demo::Chebyshev => Ok((
            SpectralDecomposition::diagonal(vec![c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], FieldMode::Real)?,
            BasisKind::Chebyshev(2),
        )),
        Demo::Roots => Ok((
            SpectralDecomposition::diagonal(
                vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)],
                FieldMode::Complex,
            )?,
            BasisKind::Gmres(1),
        )),
        Demo::Rotation => {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let q = DenseMatrix::from_rows(&[vec![c(h, 0.0), c(h, 0.0)], vec![c(0.0, -h), c(0.0, h)]])?;
            let d = SpectralDecomposition::new(q, vec![c(0.0, 1.0), c(0.0, -1.0)], FieldMode::Real, Some(vec![1, 0]))?;
            Ok((d, BasisKind::Gmres(1)))
        }
    }
}

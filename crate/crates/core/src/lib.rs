//! Discrete minimax approximation on the spectrum of normal matrices.
//!
//! Given a normal matrix `A = Q Λ Q^H` (or a family of commuting normal
//! matrices) and functions `f, φ_1, …, φ_k` tabulated on its spectrum, this
//! crate
//!
//! * solves `min_α max_j |f(λ_j) − Σ_i α_i φ_i(λ_j)|` by Lawson iteration
//!   with a certified duality gap ([`minimax`]),
//! * recovers extremal points and positive convex weights that certify
//!   optimality ([`certificate`]),
//! * builds the unit vector `v*` for which the vector problem
//!   `min_α ‖f(A)v − Σ α_i φ_i(A)v‖` attains the matrix optimum
//!   `min_α ‖f(A) − Σ α_i φ_i(A)‖`, in complex arithmetic and, for real
//!   normal matrices, as a real vector ([`worstcase`]),
//! * evaluates all of these quantities on explicit matrices
//!   ([`matrix_bridge`]).

pub mod certificate;
pub mod error;
pub mod generate;
pub mod matrix_bridge;
pub mod minimax;
pub mod numerics;
pub mod pipeline;
pub mod problem;
pub mod worstcase;

pub use certificate::{Certificate, CertificateReport};
pub use error::{Error, Result};
pub use matrix_bridge::{CommutingFamily, SpectralDecomposition};
pub use minimax::{MinimaxOptions, MinimaxSolution};
pub use numerics::{Cx, DenseMatrix};
pub use pipeline::PipelineOptions;
pub use problem::{Coefficients, EvaluationTable, FieldMode, PointSet};
pub use worstcase::{SymmetrizedCertificate, WorstCaseVector};

//! Covariance representations on the sphere, the Gauss space and the line,
//! with numerical oracles for every identity.
//!
//! Modules, bottom up:
//!
//! * [`polynomial`], [`quadrature`], [`montecarlo`]: exact polynomial
//!   algebra, 1D integration rules and seeded chunked sampling;
//! * [`sphere`]: spherical gradient, Hessian, Laplacian and the `D` operator;
//! * [`harmonics`]: harmonic decomposition and the heat semigroup;
//! * [`mixing`]: mixing densities, their total masses and samplers;
//! * [`hoeffding`]: one-dimensional and periodic kernels;
//! * [`verify`], [`concentration`]: checks producing [`verify::VerificationReport`]s;
//! * [`cli`]: the batch front end.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod concentration;
pub mod error;
pub mod harmonics;
pub mod hoeffding;
pub mod mixing;
pub mod montecarlo;
pub mod polynomial;
pub mod quadrature;
pub mod sphere;
pub mod verify;

pub use error::{Error, Result};
pub use polynomial::Polynomial;
pub use sphere::{SpherePoint, TangentTensor};

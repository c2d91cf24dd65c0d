//! Property testing for sums of squares over the Gaussian measure.
//!
//! The crate is organised bottom-up:
//!
//! * [`hermite`] exact univariate Hermite polynomials, Gaussian moments and
//!   product linearization;
//! * [`poly`] sparse multivariate polynomials in the monomial and the
//!   orthonormal Hermite basis;
//! * [`interp`] minimum-norm interpolation through random Gaussian points;
//! * [`sos`] Gram matrices and the convex feasibility search behind the SOS
//!   tester;
//! * [`pseudo`] pseudo-expectation certificates and distance-from-SOS bounds;
//! * [`testers`] the non-negativity and SOS property testers.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the CLI and the experiments
//! use. Certificates are computed exactly over rationals.

pub mod error;
pub mod hermite;
pub mod interp;
pub mod linalg;
pub mod poly;
pub mod pseudo;
pub mod sampling;
pub mod scalar;
pub mod sos;
pub mod testers;

pub use error::{Error, Result};
pub use hermite::MultisetIndex;
pub use scalar::Scalar;

/// Exact rational coefficients for certificate work.
pub type Rational = num_rational::BigRational;

pub type HermitePoly = poly::HermitePoly<f64>;
pub type MonomialPoly = poly::MonomialPoly<f64>;
pub type ExactPoly = poly::MonomialPoly<Rational>;
pub type Matrix = linalg::Matrix<f64>;
pub type SampleSet = sampling::SampleSet<f64>;
pub type InterpolationResult = interp::InterpolationResult<f64>;
pub type GramMatrix = sos::GramMatrix<f64>;
pub type FeasibilityProblem = sos::FeasibilityProblem<f64>;
pub type TesterVerdict = testers::TesterVerdict<f64>;

//! Gaussian random holomorphic sections of tensor powers of a positive line
//! bundle over flat weighted model geometries on ℂ.
//!
//! The crate builds orthonormal bases of the weighted spaces of square
//! integrable holomorphic sections, evaluates their Bergman kernels, samples
//! Gaussian random sections, extracts their zero divisors, and measures the
//! smooth linear statistics of those divisors together with the covariance
//! conditions that govern their asymptotic normality.
//!
//! Modules, bottom up:
//!
//! * [`geometry`]: weights, curvature, weighted distances, test forms.
//! * [`quadrature`]: Gauss–Legendre rules on disks, adaptive polar integration.
//! * [`basis`]: weighted inner products and orthonormal section bases.
//! * [`kernel`]: Bergman kernel, normalized kernel, asymptotic fits.
//! * [`sampling`]: reproducible complex Gaussian streams and random sections.
//! * [`zeros`]: polynomial parts, Aberth–Ehrlich root finding, divisors.
//! * [`clt`]: linear statistics, expectation, covariance conditions and the
//!   normality experiment.

pub mod basis;
pub mod clt;
mod error;
pub mod geometry;
pub mod kernel;
pub mod quadrature;
pub mod sampling;
pub mod zeros;

pub use error::{Error, Result};
pub use num_complex::Complex64;

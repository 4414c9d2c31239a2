//! Spectral (method-of-moments) estimation of hidden Markov models with
//! nonparametric emission densities on [0, 1], plug-in forward-backward
//! inference, and empirical checks of how parameter errors propagate to the
//! filtering and smoothing distributions.
//!
//! Modules, bottom-up:
//! - [`numerics`]: small dense kernels (truncated SVD, real eigenproblems,
//!   simplex projection, stationary laws, Haar rotations).
//! - [`bases`]: histogram and trigonometric projection bases.
//! - [`model`]: ground-truth models, simulation and population moments.
//! - [`spectral`]: empirical moments and the spectral estimator.
//! - [`inference`]: forward filter and backward marginal smoother.
//! - [`eval`]: label alignment, risks, error bounds and rate studies.

pub mod bases;
pub mod error;
pub mod eval;
pub mod inference;
pub mod model;
pub mod numerics;
pub mod spectral;

pub use error::{Error, Result};

//! Expected loglikelihood ratios for positivity-constrained maximum-likelihood
//! state tomography.
//!
//! When the true state `rho0` is rank deficient, the unconstrained estimates
//! straddle the boundary of state space and the Wilks theorem overestimates
//! the loglikelihood ratio. This crate provides the pieces needed to predict
//! and measure it:
//!
//! * [`hermitian`]: dense Hermitian and density matrices, eigendecomposition,
//!   GUE perturbations and random rank-r states.
//! * [`semicircle`]: the Wigner semicircle law and its inverse-CDF order
//!   statistics.
//! * [`projection`]: metric projection onto the state set (eigenvalue
//!   truncation) and onto the tangent cone at `rho0`, plus a Dykstra oracle.
//! * [`theory`]: closed-form predictions for `<lambda>`.
//! * [`isotropic`]: Monte Carlo harness with isotropic Fisher information.
//! * [`heterodyne`]: heterodyne (Husimi-Q) tomography simulator with
//!   maximum-likelihood fits and Fisher information estimates.

pub mod error;
pub mod hermitian;
pub mod heterodyne;
pub mod isotropic;
pub mod projection;
pub mod rng;
pub mod semicircle;
pub mod stats;
pub mod theory;

pub use error::{Error, Result};
pub use hermitian::{DensityMatrix, EigenDecomposition, HermitianMatrix};
pub use num_complex::Complex64;

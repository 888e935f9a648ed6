//! Heterodyne (coherent-state POVM) tomography of a single optical mode.
//!
//! States live in Fock-space truncations `H_d = span{|0>, ..., |d-1>}`; the
//! model `M_d` is the set of density matrices supported there.

mod coherent;
mod fisher;
mod mle;
mod roster;
mod sampling;

pub use coherent::{coherent_overlap, husimi_q};
pub use fisher::{
    average_fisher, fisher_hessian, gell_mann_basis, FisherEstimate, CONDITION_CAP, DEFAULT_REGULARIZER,
};
pub use mle::{
    lambda_empirical, loglikelihood, mle_fit, mle_fit_table, LambdaResult, Loglikelihood, MleFit, MleOptions,
    OverlapTable, Q_FLOOR,
};
pub use roster::{default_roster, roster_state, RosterEntry};
pub use sampling::{
    sample_husimi, sample_husimi_with_stats, DatasetSidecar, HeterodyneDataset, HusimiSampler, SamplingRun,
};

use nalgebra::DMatrix;

use crate::error::Result;
use crate::hermitian::DensityMatrix;
use crate::projection::TangentCone;

/// Per-element error of a fit, `N |(rho_hat - rho0)_jk|^2`, in `rho0`'s
/// eigenbasis (support first). `rho0` is zero-padded to the fit's dimension.
pub fn lambda_jk(rho0: &DensityMatrix, fit: &DensityMatrix, n_samples: usize) -> Result<DMatrix<f64>> {
    let null = rho0.embed(fit.dim())?;
    let cone = TangentCone::new(&null);
    let diff = cone.to_frame(&fit.as_hermitian().sub(null.as_hermitian())?);
    Ok(diff.matrix().map(|z| z.norm_sqr() * n_samples as f64))
}

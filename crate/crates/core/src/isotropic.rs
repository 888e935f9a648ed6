//! Monte Carlo harness for tomography with isotropic Fisher information.
//!
//! Each trial draws an unconstrained estimate `rho0 + delta` with `delta` a
//! GUE perturbation of scale `eps`, projects it onto the tangent cone (or the
//! full state set), and records `lambda = ||rho_hat - rho0||^2 / eps^2`
//! together with its per-element decomposition in `rho0`'s eigenbasis.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hermitian::{random_rank_r_state, sample_perturbed_state, DensityMatrix, Spectrum};
use crate::projection::{project_to_states, TangentCone};
use crate::rng::{Rng, SeedStream};
use crate::stats::mean_stderr;
use crate::theory;

const TAG_STATE: u64 = 1;
const TAG_TRIALS: u64 = 2;
const TAG_DIAGNOSTIC: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionMode {
    /// Closest density matrix (eigenvalue truncation).
    StateSet,
    /// Closest point of the tangent cone at `rho0`.
    #[default]
    Cone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IsotropicConfig {
    pub d: usize,
    pub r: usize,
    pub eps: f64,
    pub trials: usize,
    pub projection: ProjectionMode,
    pub seed: u64,
    pub spectrum: Spectrum,
    /// Remove the trace part of each perturbation.
    pub traceless: bool,
}

impl Default for IsotropicConfig {
    fn default() -> Self {
        Self {
            d: 2,
            r: 1,
            eps: 1e-4,
            trials: 500,
            projection: ProjectionMode::Cone,
            seed: 0,
            spectrum: Spectrum::EqualWeights,
            traceless: true,
        }
    }
}

impl IsotropicConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return invalid("trials must be >= 1");
        }
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return invalid(format!("eps must be positive, got {}", self.eps));
        }
        if self.r == 0 || self.r > self.d {
            return invalid(format!("need 1 <= r <= d, got r={}, d={}", self.r, self.d));
        }
        Ok(())
    }

    /// The true state for this configuration, drawn from its own stream.
    pub fn true_state(&self) -> Result<DensityMatrix> {
        let mut rng = SeedStream::new(self.seed).child(TAG_STATE).rng(0);
        random_rank_r_state(self.d, self.r, self.spectrum, &mut rng)
    }
}

/// Partition of matrix positions (in `rho0`'s eigenbasis, support first) into
/// the "L" (off-diagonal entries touching the support) and the "kite" (all
/// diagonal entries and the kernel block).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LMask {
    d: usize,
    r: usize,
}

impl LMask {
    pub fn new(r: usize, d: usize) -> Self {
        Self { d, r }
    }

    pub fn is_l(&self, j: usize, k: usize) -> bool {
        j != k && (j < self.r || k < self.r)
    }

    /// Diagonal entry on the support.
    pub fn is_support_diagonal(&self, j: usize, k: usize) -> bool {
        j == k && j < self.r
    }

    /// Kite entry inside the kernel block.
    pub fn is_kernel(&self, j: usize, k: usize) -> bool {
        j >= self.r && k >= self.r
    }

    /// Number of L entries, counted as ordered pairs. Equals `2rd - r(r+1)`.
    pub fn l_count(&self) -> usize {
        self.cells().filter(|&(j, k)| self.is_l(j, k)).count()
    }

    fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.d).flat_map(move |j| (0..self.d).map(move |k| (j, k)))
    }

    pub fn to_rows(&self) -> Vec<Vec<bool>> {
        (0..self.d)
            .map(|j| (0..self.d).map(|k| self.is_l(j, k)).collect())
            .collect()
    }
}

/// L/kite mask for `rho0`, in its eigenbasis with the support first.
pub fn l_kite_mask(rho0: &DensityMatrix) -> LMask {
    let mask = LMask::new(rho0.rank(), rho0.dim());
    log::debug!(
        "L mask for r={}, d={}: {} ordered entries (2rd - r(r+1) = {})",
        mask.r,
        mask.d,
        mask.l_count(),
        2 * mask.r * mask.d - mask.r * (mask.r + 1)
    );
    mask
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub lambda: f64,
    /// `|(rho_hat - rho0)_jk|^2 / eps^2` in `rho0`'s eigenbasis.
    pub lambda_jk: DMatrix<f64>,
}

/// One simulated estimate and its loglikelihood ratio.
pub fn run_trial(
    cone: &TangentCone,
    eps: f64,
    projection: ProjectionMode,
    traceless: bool,
    rng: &mut Rng,
) -> Result<TrialOutcome> {
    let rho0 = cone.rho0();
    let h = sample_perturbed_state(rho0, eps, traceless, rng)?;
    let diff_frame = match projection {
        ProjectionMode::Cone => {
            cone.check_regime(&h)?;
            let projected = cone.project_in_frame(&cone.to_frame(&h))?.projected;
            projected.sub(&cone.rho0_in_frame())?
        }
        ProjectionMode::StateSet => {
            let projected = project_to_states(&h)?.projected;
            cone.to_frame(&projected.as_hermitian().sub(rho0.as_hermitian())?)
        }
    };
    let scale = 1.0 / (eps * eps);
    let lambda = diff_frame.norm_sqr() * scale;
    let lambda_jk = diff_frame.matrix().map(|z| z.norm_sqr() * scale);
    Ok(TrialOutcome { lambda, lambda_jk })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotropicSummary {
    pub d: usize,
    pub r: usize,
    pub eps: f64,
    pub trials: usize,
    pub projection: ProjectionMode,
    pub mean_lambda: f64,
    pub stderr_lambda: f64,
    pub mean_lambda_jk: Vec<Vec<f64>>,
    pub stderr_lambda_jk: Vec<Vec<f64>>,
    #[serde(rename = "L_mask")]
    pub l_mask: Vec<Vec<bool>>,
    /// Sum of `mean_lambda_jk` over the L entries.
    pub lambda_l_total: f64,
    /// Sum of `mean_lambda_jk` over the kite entries.
    pub lambda_kite_total: f64,
}

impl IsotropicSummary {
    fn mean_over(&self, pick: impl Fn(usize, usize) -> bool) -> f64 {
        let mut total = 0.0;
        let mut count = 0;
        for (j, row) in self.mean_lambda_jk.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                if pick(j, k) {
                    total += v;
                    count += 1;
                }
            }
        }
        total / count as f64
    }

    /// Average `<lambda_jk>` over the diagonal support entries.
    pub fn support_diagonal_mean(&self) -> f64 {
        let m = LMask::new(self.r, self.d);
        self.mean_over(|j, k| m.is_support_diagonal(j, k))
    }

    /// Average `<lambda_jk>` over the kernel block.
    pub fn kernel_mean(&self) -> f64 {
        let m = LMask::new(self.r, self.d);
        self.mean_over(|j, k| m.is_kernel(j, k))
    }

    /// Every `<lambda_jk>` on the L entries.
    pub fn l_entries(&self) -> Vec<f64> {
        let m = LMask::new(self.r, self.d);
        let mut out = Vec::new();
        for (j, row) in self.mean_lambda_jk.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                if m.is_l(j, k) {
                    out.push(*v);
                }
            }
        }
        out
    }
}

/// Average [`run_trial`] over `config.trials` independent streams.
///
/// Trial `i` always uses stream `i` of the master seed and results are reduced
/// in trial order, so the summary does not depend on the thread count.
pub fn run_experiment(config: &IsotropicConfig) -> Result<IsotropicSummary> {
    config.validate()?;
    let rho0 = config.true_state()?;
    let cone = TangentCone::new(&rho0);
    let trials = SeedStream::new(config.seed).child(TAG_TRIALS);
    let outcomes = (0..config.trials as u64)
        .into_par_iter()
        .map(|i| {
            run_trial(
                &cone,
                config.eps,
                config.projection,
                config.traceless,
                &mut trials.rng(i),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let d = config.d;
    let lambdas: Vec<f64> = outcomes.iter().map(|o| o.lambda).collect();
    let (mean_lambda, stderr_lambda) = mean_stderr(&lambdas);
    let mut mean_jk = vec![vec![0.0; d]; d];
    let mut stderr_jk = vec![vec![0.0; d]; d];
    let mut column = vec![0.0; outcomes.len()];
    for j in 0..d {
        for k in 0..d {
            for (slot, o) in column.iter_mut().zip(&outcomes) {
                *slot = o.lambda_jk[(j, k)];
            }
            let (m, s) = mean_stderr(&column);
            mean_jk[j][k] = m;
            stderr_jk[j][k] = s;
        }
    }
    let mask = l_kite_mask(&rho0);
    let mut lambda_l_total = 0.0;
    let mut lambda_kite_total = 0.0;
    for j in 0..d {
        for k in 0..d {
            if mask.is_l(j, k) {
                lambda_l_total += mean_jk[j][k];
            } else {
                lambda_kite_total += mean_jk[j][k];
            }
        }
    }
    Ok(IsotropicSummary {
        d,
        r: rho0.rank(),
        eps: config.eps,
        trials: config.trials,
        projection: config.projection,
        mean_lambda,
        stderr_lambda,
        mean_lambda_jk: mean_jk,
        stderr_lambda_jk: stderr_jk,
        l_mask: mask.to_rows(),
        lambda_l_total,
        lambda_kite_total,
    })
}

/// One row of a (d, r) sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub d: usize,
    pub r: usize,
    pub trials: usize,
    pub eps: f64,
    pub mean_lambda: f64,
    pub stderr: f64,
    /// Closed-form prediction; absent when `r == d`, where it is undefined.
    pub theory_lambda: Option<f64>,
    pub wilks: f64,
}

/// Seed of the `(d, r)` cell of a sweep; independent of which other cells run.
pub fn sweep_cell_seed(seed: u64, d: usize, r: usize) -> u64 {
    SeedStream::new(seed)
        .child(((d as u64) << 32) | r as u64)
        .key()
}

/// Run [`run_experiment`] for every `(d, r)` with `r <= d`.
pub fn sweep(d_values: &[usize], r_values: &[usize], base: &IsotropicConfig) -> Result<Vec<SweepRow>> {
    if d_values.is_empty() || r_values.is_empty() {
        return invalid("sweep ranges must be non-empty");
    }
    let mut rows = Vec::new();
    for &d in d_values {
        for &r in r_values.iter().filter(|&&r| r >= 1 && r <= d) {
            let config = IsotropicConfig {
                d,
                r,
                seed: sweep_cell_seed(base.seed, d, r),
                ..base.clone()
            };
            let summary = run_experiment(&config)?;
            let theory_lambda = if r < d {
                Some(theory::lambda_expected(r, d)?.lambda_total)
            } else {
                None
            };
            rows.push(SweepRow {
                d,
                r,
                trials: config.trials,
                eps: config.eps,
                mean_lambda: summary.mean_lambda,
                stderr: summary.stderr_lambda,
                theory_lambda,
                wilks: theory::wilks_expected(theory::wilks_dof(d))?,
            });
        }
    }
    Ok(rows)
}

/// Empirical moments of `Delta = sum_{j < r} delta_jj` (in `rho0`'s
/// eigenbasis), the trace-shift term the null theory replaces by its mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaDiagnostic {
    /// Sample mean of `Delta / eps`.
    pub mean: f64,
    pub stderr: f64,
    /// Sample variance of `Delta / eps`; the model value is `r` without the
    /// traceless correction and `r (1 - r/d)` with it.
    pub variance: f64,
    pub samples: usize,
}

pub fn delta_diagnostic(config: &IsotropicConfig, samples: usize) -> Result<DeltaDiagnostic> {
    config.validate()?;
    if samples < 2 {
        return invalid("need at least two samples");
    }
    let rho0 = config.true_state()?;
    let cone = TangentCone::new(&rho0);
    let stream = SeedStream::new(config.seed).child(TAG_DIAGNOSTIC);
    let r = rho0.rank();
    let values = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let h = sample_perturbed_state(&rho0, config.eps, config.traceless, &mut stream.rng(i))?;
            let delta = cone.to_frame(&h.sub(rho0.as_hermitian())?);
            Ok((0..r).map(|j| delta.get(j, j).re).sum::<f64>() / config.eps)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, stderr) = mean_stderr(&values);
    let variance = stderr * stderr * samples as f64;
    Ok(DeltaDiagnostic {
        mean,
        stderr,
        variance,
        samples,
    })
}

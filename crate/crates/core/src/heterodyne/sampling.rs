use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::coherent::{coherent_overlap, expectation};
use crate::error::{invalid, Error, Result};
use crate::hermitian::DensityMatrix;
use crate::rng::Rng;

const GRID_POINTS: usize = 200;
const SAFETY: f64 = 1.05;
const MAX_REBUILDS: usize = 4;

/// Heterodyne outcomes `alpha = x + i p` drawn from one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeterodyneDataset {
    pub samples: Vec<Complex64>,
    pub rho0_label: String,
    pub seed: u64,
}

impl HeterodyneDataset {
    pub fn new(samples: Vec<Complex64>, rho0_label: impl Into<String>, seed: u64) -> Result<Self> {
        if samples.is_empty() {
            return invalid("a dataset needs at least one sample");
        }
        if samples.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return invalid("dataset contains non-finite samples");
        }
        Ok(Self {
            samples,
            rho0_label: rho0_label.into(),
            seed,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    /// The first `n` samples as a dataset of their own.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.samples.len() {
            return invalid(format!("prefix length {n} out of range"));
        }
        Self::new(self.samples[..n].to_vec(), self.rho0_label.clone(), self.seed)
    }

    pub fn sidecar(&self) -> DatasetSidecar {
        DatasetSidecar {
            seed: self.seed,
            rho0_label: self.rho0_label.clone(),
            n_samples: self.n_samples(),
        }
    }
}

/// Metadata stored next to a dataset's sample table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub seed: u64,
    pub rho0_label: String,
    pub n_samples: usize,
}

/// Rejection sampler for `Q_rho` with a circular Gaussian proposal.
#[derive(Debug, Clone)]
pub struct HusimiSampler {
    rho: DensityMatrix,
    /// Proposal second moment `E|alpha|^2`.
    t: f64,
    bound: f64,
}

impl HusimiSampler {
    pub fn new(rho: &DensityMatrix) -> Self {
        Self::with_grid(rho, GRID_POINTS)
    }

    /// Envelope constant from the maximum of `Q / g` on a `points x points`
    /// grid over the square of half-width `2 sqrt(T)`.
    pub fn with_grid(rho: &DensityMatrix, points: usize) -> Self {
        let t = rho.dim() as f64 + 1.0;
        let half = 2.0 * t.sqrt();
        let step = 2.0 * half / (points - 1) as f64;
        let mut max_ratio: f64 = 0.0;
        for i in 0..points {
            for j in 0..points {
                let alpha = Complex64::new(-half + i as f64 * step, -half + j as f64 * step);
                max_ratio = max_ratio.max(q_unchecked(rho, alpha) / proposal_pdf(t, alpha));
            }
        }
        Self {
            rho: rho.clone(),
            t,
            bound: SAFETY * max_ratio,
        }
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Draw `n` samples. Returns the samples and the number of proposals.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Result<(Vec<Complex64>, usize)> {
        let normal = Normal::new(0.0, (0.5 * self.t).sqrt()).expect("positive variance");
        let mut out = Vec::with_capacity(n);
        let mut proposals = 0;
        while out.len() < n {
            let alpha = Complex64::new(normal.sample(rng), normal.sample(rng));
            proposals += 1;
            let ratio = q_unchecked(&self.rho, alpha) / (self.bound * proposal_pdf(self.t, alpha));
            if ratio > 1.0 {
                return Err(Error::EnvelopeTooSmall {
                    ratio,
                    re: alpha.re,
                    im: alpha.im,
                });
            }
            if rng.random::<f64>() < ratio {
                out.push(alpha);
            }
        }
        Ok((out, proposals))
    }
}

fn proposal_pdf(t: f64, alpha: Complex64) -> f64 {
    (-alpha.norm_sqr() / t).exp() / (PI * t)
}

fn q_unchecked(rho: &DensityMatrix, alpha: Complex64) -> f64 {
    expectation(rho, &coherent_overlap(alpha, rho.dim())).max(0.0) / PI
}

/// Outcome of [`sample_husimi_with_stats`].
#[derive(Debug, Clone)]
pub struct SamplingRun {
    pub dataset: HeterodyneDataset,
    pub proposals: usize,
}

impl SamplingRun {
    pub fn acceptance_rate(&self) -> f64 {
        self.dataset.n_samples() as f64 / self.proposals as f64
    }
}

/// `n` i.i.d. draws from `Q_rho`. If the envelope turns out to be too small,
/// it is rebuilt on a finer grid and sampling restarts from the same RNG state.
pub fn sample_husimi_with_stats(
    rho: &DensityMatrix,
    n: usize,
    label: &str,
    seed: u64,
    rng: &mut Rng,
) -> Result<SamplingRun> {
    if n == 0 {
        return invalid("need at least one sample");
    }
    let mut points = GRID_POINTS;
    let mut last = None;
    for _ in 0..MAX_REBUILDS {
        let sampler = HusimiSampler::with_grid(rho, points);
        let mut attempt = rng.clone();
        match sampler.sample(n, &mut attempt) {
            Ok((samples, proposals)) => {
                *rng = attempt;
                return Ok(SamplingRun {
                    dataset: HeterodyneDataset::new(samples, label, seed)?,
                    proposals,
                });
            }
            Err(err @ Error::EnvelopeTooSmall { .. }) => {
                log::warn!("{err}; rebuilding envelope with {} grid points", 2 * points);
                points *= 2;
                last = Some(err);
            }
            Err(err) => return Err(err),
        }
    }
    Err(last.expect("loop ran at least once"))
}

pub fn sample_husimi(
    rho: &DensityMatrix,
    n: usize,
    label: &str,
    seed: u64,
    rng: &mut Rng,
) -> Result<HeterodyneDataset> {
    sample_husimi_with_stats(rho, n, label, seed, rng).map(|run| run.dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;
    use crate::stats::{ks_pvalue, ks_statistic, mean_stderr};

    #[test]
    fn vacuum_radial_law_is_exponential() {
        let vac = DensityMatrix::basis_state(2, 0).unwrap();
        let mut rng = SeedStream::new(1).rng(0);
        let data = sample_husimi(&vac, 10_000, "fock0", 1, &mut rng).unwrap();
        let r2: Vec<f64> = data.samples.iter().map(|a| a.norm_sqr()).collect();
        let d = ks_statistic(&r2, |x| 1.0 - (-x).exp());
        assert!(ks_pvalue(d, r2.len()) > 0.01);
    }

    #[test]
    fn fock_one_mean_photon() {
        let fock1 = DensityMatrix::basis_state(2, 1).unwrap();
        let mut rng = SeedStream::new(2).rng(0);
        let data = sample_husimi(&fock1, 20_000, "fock1", 2, &mut rng).unwrap();
        let r2: Vec<f64> = data.samples.iter().map(|a| a.norm_sqr()).collect();
        let (m, s) = mean_stderr(&r2);
        assert!((m - 2.0).abs() < 3.0 * s, "{m} +- {s}");
    }

    #[test]
    fn deterministic_with_valid_acceptance() {
        let rho = DensityMatrix::maximally_mixed(4);
        let a = sample_husimi_with_stats(&rho, 500, "mixed", 3, &mut SeedStream::new(3).rng(0)).unwrap();
        let b = sample_husimi_with_stats(&rho, 500, "mixed", 3, &mut SeedStream::new(3).rng(0)).unwrap();
        assert_eq!(a.dataset, b.dataset);
        let rate = a.acceptance_rate();
        assert!(rate > 0.0 && rate <= 1.0);
    }

    #[test]
    fn undersized_envelope_is_detected() {
        let rho = DensityMatrix::basis_state(3, 2).unwrap();
        let mut sampler = HusimiSampler::new(&rho);
        sampler.bound *= 1e-3;
        let err = sampler.sample(1000, &mut SeedStream::new(4).rng(0)).unwrap_err();
        assert!(matches!(err, Error::EnvelopeTooSmall { .. }));
    }

    #[test]
    fn dataset_validation() {
        assert!(HeterodyneDataset::new(vec![], "x", 0).is_err());
        assert!(HeterodyneDataset::new(vec![Complex64::new(f64::NAN, 0.0)], "x", 0).is_err());
        let ds = HeterodyneDataset::new(vec![Complex64::new(1.0, 0.0); 3], "x", 0).unwrap();
        assert_eq!(ds.sidecar().n_samples, 3);
        assert_eq!(ds.prefix(2).unwrap().n_samples(), 2);
    }
}

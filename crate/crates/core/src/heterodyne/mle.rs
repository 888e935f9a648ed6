use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::coherent::coherent_overlap;
use super::sampling::HeterodyneDataset;
use crate::error::{invalid, Error, Result};
use crate::hermitian::{DensityMatrix, HermitianMatrix};

/// Smallest `Q` value treated as non-zero by the loglikelihood.
pub const Q_FLOOR: f64 = 1e-300;

/// Coherent-state amplitudes of a dataset in a fixed Fock cutoff, stored
/// row-major: entries `s*d .. (s+1)*d` are `<n|alpha_s>`.
#[derive(Debug, Clone)]
pub struct OverlapTable {
    v: Vec<Complex64>,
    d: usize,
}

impl OverlapTable {
    pub fn new(data: &HeterodyneDataset, d: usize) -> Result<Self> {
        if d == 0 {
            return invalid("model dimension must be >= 1");
        }
        let mut v = Vec::with_capacity(data.n_samples() * d);
        for &alpha in &data.samples {
            v.extend(coherent_overlap(alpha, d).iter());
        }
        Ok(Self { v, d })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n_samples(&self) -> usize {
        self.v.len() / self.d
    }

    pub(crate) fn rows(&self) -> std::slice::ChunksExact<'_, Complex64> {
        self.v.chunks_exact(self.d)
    }

    /// `<alpha_s|rho|alpha_s>` for every sample.
    pub fn probabilities(&self, rho: &DMatrix<Complex64>) -> Vec<f64> {
        let d = self.d;
        let diag: Vec<f64> = (0..d).map(|j| rho[(j, j)].re).collect();
        let upper: Vec<Complex64> = (0..d)
            .flat_map(|j| (j + 1..d).map(move |k| (j, k)))
            .map(|(j, k)| rho[(j, k)] * 2.0)
            .collect();
        self.rows()
            .map(|v| {
                let mut acc = 0.0;
                let mut idx = 0;
                for j in 0..d {
                    acc += diag[j] * v[j].norm_sqr();
                    let cj = v[j].conj();
                    for k in j + 1..d {
                        acc += (cj * upper[idx] * v[k]).re;
                        idx += 1;
                    }
                }
                acc
            })
            .collect()
    }

    /// Sum of `log Q`. `None` when some sample has `Q <= Q_FLOOR`.
    fn loglikelihood_of(&self, p: &[f64]) -> Option<f64> {
        let mut acc = 0.0;
        for &ps in p {
            let q = ps / PI;
            if !(q > Q_FLOOR) {
                return None;
            }
            acc += q.ln();
        }
        Some(acc)
    }

    /// `R = (1/N) sum_s P_s / p_s`.
    fn r_operator(&self, p: &[f64]) -> DMatrix<Complex64> {
        let d = self.d;
        let mut r = DMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
        for (v, &ps) in self.rows().zip(p) {
            let w = 1.0 / ps;
            for j in 0..d {
                let vj = v[j] * w;
                for k in j..d {
                    r[(j, k)] += vj * v[k].conj();
                }
            }
        }
        let n = self.n_samples() as f64;
        for j in 0..d {
            r[(j, j)].im = 0.0;
            for k in j..d {
                r[(j, k)] /= n;
                r[(k, j)] = r[(j, k)].conj();
            }
        }
        r
    }
}

/// Loglikelihood value with an explicit flag for the `-inf` sentinel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loglikelihood {
    pub value: f64,
    /// Some sample had `Q <= Q_FLOOR`; `value` is `-inf`.
    pub degenerate: bool,
}

/// `sum_s log Q_rho(alpha_s)` with `rho` in the Fock cutoff `d_model`.
pub fn loglikelihood(rho: &DensityMatrix, data: &HeterodyneDataset, d_model: usize) -> Result<Loglikelihood> {
    if rho.dim() != d_model {
        return Err(Error::DimensionMismatch {
            expected: d_model,
            actual: rho.dim(),
        });
    }
    let table = OverlapTable::new(data, d_model)?;
    Ok(table_loglikelihood(&table, rho.matrix()))
}

pub(crate) fn table_loglikelihood(table: &OverlapTable, rho: &DMatrix<Complex64>) -> Loglikelihood {
    match table.loglikelihood_of(&table.probabilities(rho)) {
        Some(value) => Loglikelihood {
            value,
            degenerate: false,
        },
        None => Loglikelihood {
            value: f64::NEG_INFINITY,
            degenerate: true,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MleOptions {
    /// Stop once an accepted step gains less than this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Largest dilution; steps start here and are halved on a loss.
    pub max_gamma: f64,
    /// Keep the loglikelihood of every accepted iterate.
    pub record_trace: bool,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 100_000,
            max_gamma: 1.0,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MleFit {
    pub rho: DensityMatrix,
    pub loglikelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Accepted loglikelihoods, starting with the initial point.
    pub trace: Vec<f64>,
}

/// Maximum-likelihood state in the Fock cutoff `d_model`, from `I/d`.
pub fn mle_fit(data: &HeterodyneDataset, d_model: usize, opts: &MleOptions) -> Result<MleFit> {
    if d_model < 2 {
        return invalid("the one-dimensional model is trivial; need d_model >= 2");
    }
    let table = OverlapTable::new(data, d_model)?;
    mle_fit_table(&table, &DensityMatrix::maximally_mixed(d_model), opts)
}

/// Diluted `R rho R` iteration on a precomputed overlap table.
pub fn mle_fit_table(table: &OverlapTable, start: &DensityMatrix, opts: &MleOptions) -> Result<MleFit> {
    let d = table.dim();
    if start.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: start.dim(),
        });
    }
    if !(opts.max_gamma > 0.0) {
        return invalid("max_gamma must be positive");
    }
    let identity = DMatrix::<Complex64>::identity(d, d);
    let mut rho = start.matrix().clone();
    let mut p = table.probabilities(&rho);
    let mut ll = table
        .loglikelihood_of(&p)
        .ok_or_else(|| Error::InvalidArgument("starting point has zero likelihood".into()))?;
    let mut trace = Vec::new();
    if opts.record_trace {
        trace.push(ll);
    }
    let mut gamma = opts.max_gamma;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let r = table.r_operator(&p);
        let mut accepted = false;
        while gamma > 1e-12 {
            let a = &identity + &r * Complex64::new(gamma, 0.0);
            let mut next = &a * &rho * a.adjoint();
            let tr: f64 = (0..d).map(|j| next[(j, j)].re).sum();
            next /= Complex64::new(tr, 0.0);
            next = (&next + next.adjoint()) * Complex64::new(0.5, 0.0);
            let p_next = table.probabilities(&next);
            match table.loglikelihood_of(&p_next) {
                Some(ll_next) if ll_next >= ll => {
                    let gain = ll_next - ll;
                    rho = next;
                    p = p_next;
                    ll = ll_next;
                    accepted = true;
                    if opts.record_trace {
                        trace.push(ll);
                    }
                    if gain < opts.tolerance {
                        converged = true;
                    }
                    break;
                }
                _ => gamma *= 0.5,
            }
        }
        if !accepted {
            // No ascent direction left at machine precision.
            converged = true;
        }
        if converged {
            break;
        }
        gamma = (2.0 * gamma).min(opts.max_gamma);
    }
    if !converged {
        log::warn!("MLE stopped after {iterations} iterations without converging");
    }
    let rho = DensityMatrix::new(HermitianMatrix::new(rho)?)?;
    Ok(MleFit {
        rho,
        loglikelihood: ll,
        iterations,
        converged,
        trace,
    })
}

/// Result of a likelihood-ratio evaluation against a fixed null state.
#[derive(Debug, Clone)]
pub struct LambdaResult {
    pub lambda: f64,
    pub fit: MleFit,
    pub null_loglikelihood: f64,
}

/// `lambda = 2 [loglik(fit) - loglik(rho0)]` for the model with Fock cutoff
/// `d_model`, with `rho0` zero-padded into it.
pub fn lambda_empirical(
    rho0: &DensityMatrix,
    data: &HeterodyneDataset,
    d_model: usize,
    opts: &MleOptions,
) -> Result<LambdaResult> {
    let table = OverlapTable::new(data, d_model)?;
    lambda_with_table(rho0, &table, opts)
}

pub(crate) fn lambda_with_table(rho0: &DensityMatrix, table: &OverlapTable, opts: &MleOptions) -> Result<LambdaResult> {
    let d_model = table.dim();
    if d_model < 2 {
        return invalid("the one-dimensional model is trivial; need d_model >= 2");
    }
    let null = rho0.embed(d_model)?;
    let null_ll = table_loglikelihood(table, null.matrix()).value;
    let fit = mle_fit_table(table, &DensityMatrix::maximally_mixed(d_model), opts)?;
    let lambda = 2.0 * (fit.loglikelihood - null_ll);
    if lambda < -1e-8 {
        log::warn!("negative lambda {lambda:e} at d_model={d_model}; the fit stopped short");
    }
    Ok(LambdaResult {
        lambda,
        fit,
        null_loglikelihood: null_ll,
    })
}

//! Wigner semicircle law and inverse-CDF order statistics.
//!
//! The kernel block of a GUE perturbation has a spectrum that, for large
//! dimension, follows the semicircle of radius `R = 2 eps sqrt(n)`. Replacing a
//! random sorted spectrum by the quantiles `CDF^-1((j - 1/2) / n)` gives a
//! deterministic "typical sample" that the null theory is built on.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::hermitian::{eigh, sample_gue};
use crate::rng::SeedStream;
use crate::stats::mean_stderr;

/// Bisection tolerance on `|cdf(x) - u|`.
const INVERSE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Semicircle {
    radius: f64,
}

impl Semicircle {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return invalid(format!("semicircle radius must be positive, got {radius}"));
        }
        Ok(Self { radius })
    }

    /// Semicircle followed by the spectrum of `eps * GUE(n)`.
    pub fn for_gue(n: usize, eps: f64) -> Result<Self> {
        Self::new(2.0 * eps * (n as f64).sqrt())
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let r = self.radius;
        if x.abs() >= r {
            return 0.0;
        }
        2.0 / (PI * r * r) * (r * r - x * x).sqrt()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let r = self.radius;
        if x <= -r {
            return 0.0;
        }
        if x >= r {
            return 1.0;
        }
        let c = 0.5 + x * (r * r - x * x).sqrt() / (PI * r * r) + (x / r).asin() / PI;
        c.clamp(0.0, 1.0)
    }

    /// Quantile function, by bisection on `[-R, R]`.
    pub fn inverse_cdf(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return invalid(format!("quantile level must lie in [0, 1], got {u}"));
        }
        let r = self.radius;
        if u == 0.0 {
            return Ok(-r);
        }
        if u == 1.0 {
            return Ok(r);
        }
        if u == 0.5 {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (-r, r);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let c = self.cdf(mid);
            if (c - u).abs() <= INVERSE_TOL * 0.5 {
                return Ok(mid);
            }
            if c < u {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * r {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Expected sorted eigenvalues of `eps * GUE(n)` under the semicircle ansatz,
/// largest first.
pub fn order_statistics(n: usize, eps: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return invalid("order statistics need n >= 1");
    }
    let law = Semicircle::for_gue(n, eps)?;
    let mut out: Vec<f64> = (1..=n)
        .rev()
        .map(|j| law.inverse_cdf((j as f64 - 0.5) / n as f64))
        .collect::<Result<_>>()?;
    // Enforce exact antisymmetry; bisection leaves ~1e-16 asymmetry.
    for j in 0..n / 2 {
        let avg = 0.5 * (out[j] - out[n - 1 - j]);
        out[j] = avg;
        out[n - 1 - j] = -avg;
    }
    if n % 2 == 1 {
        out[n / 2] = 0.0;
    }
    Ok(out)
}

/// Mean and standard error of each sorted eigenvalue (largest first) of
/// `eps * GUE(n)` over `draws` samples. Draw `i` uses stream `i`.
pub fn empirical_mean_spectrum(
    n: usize,
    eps: f64,
    draws: usize,
    stream: SeedStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if draws < 2 {
        return invalid("need at least two draws");
    }
    let spectra = (0..draws as u64)
        .into_par_iter()
        .map(|i| Ok(eigh(&sample_gue(n, eps, &mut stream.rng(i))?).values))
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let mut means = Vec::with_capacity(n);
    let mut errs = Vec::with_capacity(n);
    let mut column = vec![0.0; draws];
    for j in 0..n {
        for (slot, s) in column.iter_mut().zip(&spectra) {
            *slot = s[j];
        }
        let (m, e) = mean_stderr(&column);
        means.push(m);
        errs.push(e);
    }
    Ok((means, errs))
}

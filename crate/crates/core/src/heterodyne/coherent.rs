use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hermitian::DensityMatrix;

/// Fock amplitudes `<n|alpha>` for `n = 0..d-1`.
pub fn coherent_overlap(alpha: Complex64, d: usize) -> DVector<Complex64> {
    let mut v = DVector::from_element(d, Complex64::new(0.0, 0.0));
    if d == 0 {
        return v;
    }
    v[0] = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 1..d {
        v[n] = v[n - 1] * alpha / (n as f64).sqrt();
    }
    v
}

/// `<v|rho|v>` for a vector of matching length.
pub(crate) fn expectation(rho: &DensityMatrix, v: &DVector<Complex64>) -> f64 {
    let m = rho.matrix();
    let mut acc = 0.0;
    for j in 0..v.len() {
        let mut row = Complex64::new(0.0, 0.0);
        for k in 0..v.len() {
            row += m[(j, k)] * v[k];
        }
        acc += (v[j].conj() * row).re;
    }
    acc
}

/// Husimi function `Q(alpha) = <alpha|rho|alpha> / pi`.
pub fn husimi_q(rho: &DensityMatrix, alpha: Complex64) -> Result<f64> {
    let v = coherent_overlap(alpha, rho.dim());
    let q = expectation(rho, &v) / PI;
    if q < -1e-14 {
        return Err(Error::NegativeQ(q));
    }
    Ok(q.max(0.0))
}

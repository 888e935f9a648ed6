//! Closed-form predictions for the expected loglikelihood ratio
//! `<lambda(rho0, M_d)>` when `rho0` has rank `r` in dimension `d`.
//!
//! All quantities are dimensionless: `z = q / eps`, and `lambda` is measured
//! in units where the isotropic Fisher information is the identity.
//!
//! The total splits into the "L" part (off-diagonal entries touching the
//! support, each contributing one) and the "kite" part (diagonal plus kernel
//! block), which depends on how far the trace shift `z` pushes the kernel
//! spectrum below zero.

use std::f64::consts::PI;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Mean of a chi-squared variable with `k` degrees of freedom.
pub fn wilks_expected(k: usize) -> Result<f64> {
    if k == 0 {
        return invalid("Wilks degrees of freedom must be >= 1");
    }
    Ok(k as f64)
}

/// Variance of a chi-squared variable with `k` degrees of freedom.
pub fn wilks_variance(k: usize) -> Result<f64> {
    Ok(2.0 * wilks_expected(k)?)
}

/// Degrees of freedom of the unit-trace Hermitian model in dimension `d`.
pub fn wilks_dof(d: usize) -> usize {
    d * d - 1
}

/// Expected contribution of the L entries: `2rd - r(r+1)`, the dimension of
/// the manifold of rank-r states.
pub fn lambda_l(r: usize, d: usize) -> Result<f64> {
    if r == 0 || r > d {
        return invalid(format!("need 1 <= r <= d, got r={r}, d={d}"));
    }
    let (r, d) = (r as f64, d as f64);
    Ok(2.0 * r * d - r * (r + 1.0))
}

fn check_rn(r: usize, n: usize) -> Result<()> {
    if r == 0 || n == 0 {
        return invalid(format!("need r >= 1 and n >= 1, got r={r}, n={n}"));
    }
    Ok(())
}

/// Residual of `r z = (4 / 15 pi) n^(1/4) (2 sqrt(n) - z)^(5/2)`.
fn quintic_residual(r: f64, n: f64, z: f64) -> f64 {
    let gap = (2.0 * n.sqrt() - z).max(0.0);
    r * z - 4.0 / (15.0 * PI) * n.powf(0.25) * gap.powf(2.5)
}

/// Root in `(0, 2 sqrt(n))` of the leading-order trace-shift equation, by
/// bisection. The residual is increasing in `z`, negative at 0 and positive at
/// `2 sqrt(n)`.
pub fn solve_quintic_z(r: usize, n: usize) -> Result<f64> {
    check_rn(r, n)?;
    let (rf, nf) = (r as f64, n as f64);
    let (mut lo, mut hi) = (0.0, 2.0 * nf.sqrt());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if quintic_residual(rf, nf, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Expansion variable `x = (15 pi r / 2n)^(2/5)`.
pub fn expansion_x(r: usize, n: usize) -> f64 {
    (15.0 * PI * r as f64 / (2.0 * n as f64)).powf(0.4)
}

/// Algebraic approximation to the quintic root:
/// `z = 2 sqrt(n) (1 - x/2 + x^2/10 - x^3/200)`.
pub fn z_approx(r: usize, n: usize) -> Result<f64> {
    check_rn(r, n)?;
    let x = expansion_x(r, n);
    Ok(2.0 * (n as f64).sqrt() * (1.0 - x / 2.0 + x * x / 10.0 - x.powi(3) / 200.0))
}

/// Semicircle tail term `n/eps^2 * integral_q^R Pr(k) (k - q)^2 dk` in
/// dimensionless form.
fn kite_tail(n: f64, z: f64) -> f64 {
    let root = (4.0 * n - z * z).max(0.0).sqrt();
    let angle = (z / (2.0 * n.sqrt())).clamp(-1.0, 1.0).asin();
    n * (n + z * z) / PI * (PI / 2.0 - angle) - z * (z * z + 26.0 * n) / (24.0 * PI) * root
}

/// Expected kite contribution
/// `r + r z^2 + n(n+z^2)/pi (pi/2 - asin(z / 2 sqrt n)) - z(z^2+26n)/(24 pi) sqrt(4n - z^2)`.
pub fn lambda_kite(r: usize, n: usize, z: f64) -> Result<f64> {
    check_rn(r, n)?;
    let (rf, nf) = (r as f64, n as f64);
    let edge = 2.0 * nf.sqrt();
    if !(0.0..=edge).contains(&z) {
        return invalid(format!("z must lie in [0, {edge}], got {z}"));
    }
    Ok(rf + rf * z * z + kite_tail(nf, z))
}

/// Full prediction for a rank-`r` true state reconstructed in dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullTheoryPrediction {
    pub r: usize,
    pub d: usize,
    pub n: usize,
    pub x: f64,
    pub z: f64,
    #[serde(rename = "lambda_L")]
    pub lambda_l: f64,
    pub lambda_kite: f64,
    pub lambda_total: f64,
    pub wilks: f64,
}

/// Expected loglikelihood ratio `<lambda(rho0, M_d)>`.
///
/// The total is evaluated directly as
/// `2rd - r^2 + r z^2 + tail(n, z)` rather than by adding the two parts, so
/// the record carries an independent check of the split.
pub fn lambda_expected(r: usize, d: usize) -> Result<NullTheoryPrediction> {
    if r == 0 || r >= d {
        return invalid(format!("need 1 <= r <= d - 1, got r={r}, d={d}"));
    }
    if 2 * r > d {
        warn!("rank {r} exceeds d/2 = {}; the prediction degrades as r approaches d", d as f64 / 2.0);
    }
    let n = d - r;
    let z = z_approx(r, n)?;
    let (rf, df) = (r as f64, d as f64);
    let lambda_total = 2.0 * rf * df - rf * rf + rf * z * z + kite_tail(n as f64, z);
    Ok(NullTheoryPrediction {
        r,
        d,
        n,
        x: expansion_x(r, n),
        z,
        lambda_l: lambda_l(r, d)?,
        lambda_kite: lambda_kite(r, n, z)?,
        lambda_total,
        wilks: wilks_expected(wilks_dof(d))?,
    })
}

/// Large-`d` form at fixed `r`:
/// `rd [6 - 20/7 y^(2/5) + 20/21 y^(4/5)] - 5 r^2` with `y = 15 pi r / 2d`.
pub fn lambda_asymptotic(r: usize, d: usize) -> Result<f64> {
    if r == 0 || d <= r {
        return invalid(format!("need r >= 1 and d > r, got r={r}, d={d}"));
    }
    let (rf, df) = (r as f64, d as f64);
    let y = 15.0 * PI * rf / (2.0 * df);
    Ok(rf * df * (6.0 - 20.0 / 7.0 * y.powf(0.4) + 20.0 / 21.0 * y.powf(0.8)) - 5.0 * rf * rf)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Adaptive Simpson quadrature, used as an oracle for the kite integral.
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        step(f, a, b, fa, fm, fb, whole, tol, 50)
    }

    /// `r + r z^2 + n * integral_z^{2 sqrt n} Pr(k) (k - z)^2 dk` with the
    /// unit-eps semicircle, integrated in the angle variable k = R sin(t).
    fn kite_by_quadrature(r: usize, n: usize, z: f64) -> f64 {
        let nf = n as f64;
        let radius = 2.0 * nf.sqrt();
        let pdf = |k: f64| 2.0 / (PI * radius * radius) * (radius * radius - k * k).max(0.0).sqrt();
        let integrand = |t: f64| {
            let k = radius * t.sin();
            pdf(k) * (k - z).powi(2) * radius * t.cos()
        };
        let t0 = (z / radius).asin();
        let integral = simpson(&integrand, t0, PI / 2.0, 1e-13);
        r as f64 + r as f64 * z * z + nf * integral
    }

    #[test]
    fn wilks_examples() {
        assert_eq!(wilks_expected(wilks_dof(4)).unwrap(), 15.0);
        assert_eq!(wilks_expected(1).unwrap(), 1.0);
        assert_eq!(wilks_expected(wilks_dof(30)).unwrap(), 899.0);
        assert_eq!(wilks_variance(15).unwrap(), 30.0);
        assert!(wilks_expected(0).is_err());
    }

    #[test]
    fn lambda_l_examples() {
        assert_eq!(lambda_l(1, 2).unwrap(), 2.0);
        assert_eq!(lambda_l(2, 8).unwrap(), 26.0);
        for d in 1..10 {
            assert_eq!(lambda_l(d, d).unwrap(), (d * d - d) as f64);
        }
        assert!(lambda_l(3, 2).is_err());
    }

    #[test]
    fn quintic_root_properties() {
        let z = solve_quintic_z(1, 4).unwrap();
        assert!(z > 0.0 && z < 4.0);
        assert!(quintic_residual(1.0, 4.0, z).abs() < 1e-12);

        for n in [10, 100, 10_000, 1_000_000] {
            let z = solve_quintic_z(1, n).unwrap();
            assert!(quintic_residual(1.0, n as f64, z).abs() < 1e-12 * n as f64);
            assert!(z < 2.0 * (n as f64).sqrt());
        }
        let ratio = |n: usize| solve_quintic_z(1, n).unwrap() / (2.0 * (n as f64).sqrt());
        assert!(ratio(10_000) > ratio(100) && ratio(1_000_000) > 0.99);
    }

    #[test]
    fn z_approx_tracks_quintic_root() {
        let (a, b) = (z_approx(1, 99).unwrap(), solve_quintic_z(1, 99).unwrap());
        assert!((a - b).abs() / b < 0.01);

        // Printed series evaluated independently.
        let x = (15.0 * PI / 198.0_f64).powf(0.4);
        let direct = 2.0 * 99f64.sqrt() * (1.0 - 0.5 * x + 0.1 * x * x - 0.005 * x * x * x);
        assert!((a - direct).abs() < 1e-12);

        // The series is accurate while the expansion variable stays moderate.
        for n in 5..=200 {
            for r in 1..=10.min(n / 2) {
                if expansion_x(r, n) <= 1.4 {
                    let (a, b) = (z_approx(r, n).unwrap(), solve_quintic_z(r, n).unwrap());
                    assert!((a - b).abs() / b <= 0.01, "r={r} n={n}");
                }
            }
        }
        let big = 10_000_000;
        assert!(expansion_x(1, big) < 0.01);
        assert!((z_approx(1, big).unwrap() / (2.0 * (big as f64).sqrt()) - 1.0).abs() < 0.01);
    }

    #[test]
    fn kite_endpoints() {
        let (r, n) = (2, 9);
        let edge = 2.0 * (n as f64).sqrt();
        assert!((lambda_kite(r, n, edge).unwrap() - (2.0 + 4.0 * 2.0 * 9.0)).abs() < 1e-9);
        assert!((lambda_kite(r, n, 0.0).unwrap() - (2.0 + 81.0 / 2.0)).abs() < 1e-12);
        assert!(lambda_kite(r, n, edge + 1e-6).is_err());
        assert!(lambda_kite(r, n, -0.1).is_err());
    }

    #[test]
    fn kite_matches_quadrature() {
        let z = z_approx(1, 29).unwrap();
        let closed = lambda_kite(1, 29, z).unwrap();
        let quad = kite_by_quadrature(1, 29, z);
        assert!((closed - quad).abs() / quad < 1e-6, "{closed} vs {quad}");
        for (r, n, z) in [(1, 5, 0.3), (3, 40, 7.0), (2, 100, 0.0), (4, 12, 6.9)] {
            let closed = lambda_kite(r, n, z).unwrap();
            let quad = kite_by_quadrature(r, n, z);
            assert!((closed - quad).abs() / quad < 1e-6, "r={r} n={n} z={z}");
        }
    }

    #[test]
    fn total_is_sum_of_parts() {
        for r in 1..=10 {
            for d in (r + 2)..=30 {
                let p = lambda_expected(r, d).unwrap();
                assert!((p.lambda_total - p.lambda_l - p.lambda_kite).abs() < 1e-10 * p.lambda_total.max(1.0));
                assert!(p.z > 0.0 && p.z < 2.0 * (p.n as f64).sqrt());
            }
        }
        assert!(lambda_expected(3, 3).is_err());
        assert!(lambda_expected(0, 3).is_err());
    }

    #[test]
    fn boundary_suppression_and_monotonicity() {
        let p = lambda_expected(1, 30).unwrap();
        assert!(p.lambda_total < 0.5 * p.wilks);
        for r in 1..=5 {
            let mut prev = 0.0;
            for d in (2 * r + 2)..=40 {
                let p = lambda_expected(r, d).unwrap();
                assert!(p.lambda_total > prev);
                assert!(p.lambda_total <= p.wilks);
                prev = p.lambda_total;
            }
        }
    }

    #[test]
    fn asymptotic_form() {
        let ratio = lambda_asymptotic(1, 500).unwrap() / lambda_expected(1, 500).unwrap().lambda_total;
        assert!((ratio - 1.0).abs() < 0.02);
        let ratio = lambda_asymptotic(1, 30).unwrap() / lambda_expected(1, 30).unwrap().lambda_total;
        assert!((ratio - 1.0).abs() < 0.2);
        let big = lambda_asymptotic(1, 1_000_000).unwrap();
        assert!((big / 6e6 - 1.0).abs() < 0.01);
        assert!(lambda_asymptotic(2, 2).is_err());
    }

    #[test]
    fn json_field_names() {
        let p = lambda_expected(1, 4).unwrap();
        let v = serde_json::to_value(p).unwrap();
        for key in ["r", "d", "n", "x", "z", "lambda_L", "lambda_kite", "lambda_total", "wilks"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["wilks"], 15.0);
    }
}

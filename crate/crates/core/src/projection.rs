//! Hilbert-Schmidt metric projections.
//!
//! [`project_to_states`] maps a unit-trace Hermitian matrix to the closest
//! density matrix by shifting its spectrum down by `q` and truncating negative
//! eigenvalues. [`TangentCone`] does the analogous projection onto the solid
//! tangent cone at a rank-deficient `rho0`: only the kernel block is
//! constrained, the off-diagonal "L" entries pass through untouched.
//! [`oracle_project`] is an independent Dykstra solver used to validate both.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::hermitian::{eigh, rebuild, DensityMatrix, HermitianMatrix};

/// Whether an eigenvalue enters the trace equation as `e - q` or `(e - q)^+`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Free,
    Clip,
}

/// Largest accepted residual of the trace equation.
const Q_RESIDUAL_TOL: f64 = 1e-13;

/// Output of a projection.
#[derive(Debug, Clone)]
pub struct ProjectionResult<M> {
    pub projected: M,
    /// Trace-shift multiplier.
    pub q: f64,
    /// Number of eigenvalues set to zero.
    pub clipped_count: usize,
}

fn shifted_trace(eigs: &[f64], mask: &[Bound], q: f64) -> f64 {
    eigs.iter()
        .zip(mask)
        .map(|(&e, b)| match b {
            Bound::Free => e - q,
            Bound::Clip => (e - q).max(0.0),
        })
        .sum()
}

/// Solve `sum_free (e_j - q) + sum_clip (e_j - q)^+ = 1` for `q`.
///
/// The left side is non-increasing in `q`, positive-sloped wherever some term
/// is active, at least `d` at `min(e) - 1` and at most `0` at `max(e)`, so the
/// root is bracketed. Bisection locates the active set; `q` is then solved
/// exactly on that set.
pub fn solve_q(eigs: &[f64], mask: &[Bound]) -> Result<f64> {
    if eigs.is_empty() || eigs.len() != mask.len() {
        return invalid(format!(
            "solve_q needs matching non-empty inputs, got {} values and {} flags",
            eigs.len(),
            mask.len()
        ));
    }
    if eigs.iter().any(|e| !e.is_finite()) {
        return invalid("solve_q received a non-finite eigenvalue");
    }
    let min = eigs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eigs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo0, hi0) = (min - 1.0, max);
    let (mut lo, mut hi) = (lo0, hi0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if shifted_trace(eigs, mask, mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);

    // Exact solve on the active set found by bisection.
    let (sum, count) = eigs
        .iter()
        .zip(mask)
        .filter(|(&e, b)| **b == Bound::Free || e > mid)
        .fold((0.0, 0usize), |(s, c), (&e, _)| (s + e, c + 1));
    let mut q = mid;
    if count > 0 {
        let exact = (sum - 1.0) / count as f64;
        if (shifted_trace(eigs, mask, exact) - 1.0).abs() <= (shifted_trace(eigs, mask, mid) - 1.0).abs() {
            q = exact;
        }
    }
    let residual = (shifted_trace(eigs, mask, q) - 1.0).abs();
    let scale = eigs.iter().map(|e| e.abs()).sum::<f64>().max(1.0);
    if residual > Q_RESIDUAL_TOL * scale {
        return Err(Error::NoRoot {
            lo: lo0,
            hi: hi0,
            residual,
        });
    }
    Ok(q)
}

/// Closest density matrix to `h` in Hilbert-Schmidt distance.
pub fn project_to_states(h: &HermitianMatrix) -> Result<ProjectionResult<DensityMatrix>> {
    let tr = h.trace();
    if (tr - 1.0).abs() > 0.5 {
        return invalid(format!("input trace {tr} is too far from 1 to project"));
    }
    let eig = eigh(h);
    let mask = vec![Bound::Clip; eig.values.len()];
    let q = solve_q(&eig.values, &mask)?;
    let values: Vec<f64> = eig.values.iter().map(|e| (e - q).max(0.0)).collect();
    let clipped_count = values.iter().filter(|&&v| v == 0.0).count();
    let projected = DensityMatrix::from_spectrum(&eig.vectors, &values)?;
    Ok(ProjectionResult {
        projected,
        q,
        clipped_count,
    })
}

/// The solid tangent cone of the state set at `rho0`.
///
/// Holds `rho0`'s eigenbasis with the support first, so repeated projections
/// for the same true state share one diagonalization.
#[derive(Debug, Clone)]
pub struct TangentCone {
    rho0: DensityMatrix,
    basis: DMatrix<Complex64>,
    rank: usize,
    min_support: f64,
}

impl TangentCone {
    pub fn new(rho0: &DensityMatrix) -> Self {
        let eig = eigh(rho0.as_hermitian());
        let rank = rho0.rank();
        let min_support = eig.values[rank - 1];
        Self {
            rho0: rho0.clone(),
            basis: eig.vectors,
            rank,
            min_support,
        }
    }

    pub fn rho0(&self) -> &DensityMatrix {
        &self.rho0
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.rho0.dim()
    }

    /// Columns are `rho0`'s eigenvectors, support first.
    pub fn basis(&self) -> &DMatrix<Complex64> {
        &self.basis
    }

    /// Express `h` in `rho0`'s eigenbasis.
    pub fn to_frame(&self, h: &HermitianMatrix) -> HermitianMatrix {
        h.in_basis(&self.basis)
    }

    pub fn from_frame(&self, x: &HermitianMatrix) -> HermitianMatrix {
        x.conjugate_by(&self.basis)
    }

    /// `rho0` in its own eigenbasis (diagonal).
    pub fn rho0_in_frame(&self) -> HermitianMatrix {
        self.to_frame(self.rho0.as_hermitian())
    }

    /// Require every eigenvalue of `h - rho0` to be smaller in magnitude than
    /// half of `rho0`'s smallest nonzero eigenvalue.
    pub fn check_regime(&self, h: &HermitianMatrix) -> Result<()> {
        if h.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: h.dim(),
            });
        }
        let diff = h.sub(self.rho0.as_hermitian())?;
        let bound = 0.5 * self.min_support;
        // The Frobenius norm bounds the spectral norm from above.
        if diff.norm_sqr().sqrt() < bound {
            return Ok(());
        }
        let spectral = diff.spectral_norm();
        if spectral < bound {
            Ok(())
        } else {
            Err(Error::OutsideConeRegime(format!(
                "perturbation norm {spectral:e} is not below half the smallest support eigenvalue ({bound:e})"
            )))
        }
    }

    /// Project a matrix already expressed in `rho0`'s eigenbasis; the result
    /// stays in that basis.
    pub fn project_in_frame(&self, h: &HermitianMatrix) -> Result<ProjectionResult<HermitianMatrix>> {
        let d = self.dim();
        let r = self.rank;
        let n = d - r;
        let hm = h.matrix();

        let mut eigs: Vec<f64> = (0..r).map(|j| hm[(j, j)].re).collect();
        let mut mask = vec![Bound::Free; r];
        let kernel = if n > 0 {
            let block = HermitianMatrix::symmetrized(hm.view((r, r), (n, n)).into_owned());
            let eig = eigh(&block);
            eigs.extend_from_slice(&eig.values);
            mask.extend(std::iter::repeat_n(Bound::Clip, n));
            Some(eig)
        } else {
            None
        };
        let q = solve_q(&eigs, &mask)?;

        let mut out = hm.clone();
        for j in 0..r {
            out[(j, j)].re -= q;
        }
        let mut clipped_count = 0;
        if let Some(eig) = kernel {
            let kept: Vec<f64> = eig.values.iter().map(|k| (k - q).max(0.0)).collect();
            clipped_count = kept.iter().filter(|&&v| v == 0.0).count();
            let block = rebuild(&eig.vectors, &kept);
            out.view_mut((r, r), (n, n)).copy_from(block.matrix());
        }
        Ok(ProjectionResult {
            projected: HermitianMatrix::symmetrized(out),
            q,
            clipped_count,
        })
    }

    /// Metric projection of `h` onto the cone (result in the original basis).
    pub fn project(&self, h: &HermitianMatrix) -> Result<ProjectionResult<HermitianMatrix>> {
        self.check_regime(h)?;
        let res = self.project_in_frame(&self.to_frame(h))?;
        Ok(ProjectionResult {
            projected: self.from_frame(&res.projected),
            q: res.q,
            clipped_count: res.clipped_count,
        })
    }
}

/// One-shot projection onto the tangent cone at `rho0`.
pub fn project_to_cone(
    h: &HermitianMatrix,
    rho0: &DensityMatrix,
) -> Result<ProjectionResult<HermitianMatrix>> {
    TangentCone::new(rho0).project(h)
}

/// Largest dimension accepted by [`oracle_project`].
pub const ORACLE_MAX_DIM: usize = 6;
const ORACLE_MAX_ITER: usize = 1_000_000;
const ORACLE_TOL: f64 = 1e-12;

fn psd_part(x: &HermitianMatrix) -> HermitianMatrix {
    let eig = eigh(x);
    let clipped: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
    rebuild(&eig.vectors, &clipped)
}

fn unit_trace_part(x: &HermitianMatrix) -> HermitianMatrix {
    x.shift_diagonal(-(x.trace() - 1.0) / x.dim() as f64)
}

/// Closest density matrix by Dykstra's alternating projections between the
/// PSD cone and the unit-trace hyperplane. Slow but independent of the trace
/// shift equation; meant for validation only.
pub fn oracle_project(h: &HermitianMatrix) -> Result<DensityMatrix> {
    let d = h.dim();
    if d > ORACLE_MAX_DIM {
        return invalid(format!(
            "oracle projection supports dimension <= {ORACLE_MAX_DIM}, got {d}"
        ));
    }
    let mut x = h.clone();
    let mut p = HermitianMatrix::zeros(d);
    let mut c = HermitianMatrix::zeros(d);
    let mut residual = f64::INFINITY;
    for _ in 0..ORACLE_MAX_ITER {
        let y = psd_part(&x.add(&p)?);
        p = x.add(&p)?.sub(&y)?;
        let next = unit_trace_part(&y.add(&c)?);
        c = y.add(&c)?.sub(&next)?;

        let step = next.sub(&x)?.norm_sqr().sqrt();
        let gap = next.sub(&y)?.norm_sqr().sqrt();
        residual = step.max(gap);
        x = next;
        if residual < ORACLE_TOL {
            let y = psd_part(&x);
            return DensityMatrix::new(unit_trace_part(&y));
        }
    }
    Err(Error::NotConverged {
        iterations: ORACLE_MAX_ITER,
        residual,
    })
}

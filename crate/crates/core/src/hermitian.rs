//! Dense Hermitian matrices, density matrices and the random ensembles used by
//! the Monte Carlo harnesses.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::Rng;

/// Largest tolerated `|a_jk - conj(a_kj)|`, relative to the largest entry.
const HERMITIAN_TOL: f64 = 1e-10;
/// Trace and positivity slack for density matrices.
const DENSITY_TOL: f64 = 1e-10;
/// Eigenvalues at or below this fraction of the largest one count as zero.
const RANK_THRESHOLD: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A `d x d` complex Hermitian matrix.
///
/// Construction symmetrizes the input, so `a[(j, k)] == a[(k, j)].conj()`
/// holds exactly afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    m: DMatrix<Complex64>,
}

impl HermitianMatrix {
    /// Validate and wrap a square complex matrix.
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return invalid(format!(
                "Hermitian matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            ));
        }
        let scale = m.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
        let d = m.nrows();
        let mut asymmetry = 0.0_f64;
        for j in 0..d {
            for k in j..d {
                asymmetry = asymmetry.max((m[(j, k)] - m[(k, j)].conj()).norm());
            }
        }
        if !asymmetry.is_finite() || asymmetry > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian { asymmetry });
        }
        Ok(Self::symmetrized(m))
    }

    /// Wrap a matrix already known to be Hermitian up to rounding.
    pub(crate) fn symmetrized(mut m: DMatrix<Complex64>) -> Self {
        let d = m.nrows();
        for j in 0..d {
            m[(j, j)] = Complex64::new(m[(j, j)].re, 0.0);
            for k in (j + 1)..d {
                let avg = (m[(j, k)] + m[(k, j)].conj()) * 0.5;
                m[(j, k)] = avg;
                m[(k, j)] = avg.conj();
            }
        }
        Self { m }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            m: DMatrix::from_element(d, d, ZERO),
        }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            m: DMatrix::identity(d, d),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let v = DVector::from_iterator(diag.len(), diag.iter().map(|&x| Complex64::new(x, 0.0)));
        Self {
            m: DMatrix::from_diagonal(&v),
        }
    }

    /// `|v><v|`.
    pub fn outer(v: &DVector<Complex64>) -> Self {
        Self::symmetrized(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.m
    }

    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        self.m[(j, k)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|j| self.m[(j, j)].re).sum()
    }

    /// Squared Hilbert-Schmidt (Frobenius) norm.
    pub fn norm_sqr(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self::symmetrized(&self.m + &other.m))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self::symmetrized(&self.m - &other.m))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            m: self.m.map(|z| z * s),
        }
    }

    /// `self + shift * I`.
    pub fn shift_diagonal(&self, shift: f64) -> Self {
        let mut m = self.m.clone();
        for j in 0..self.dim() {
            m[(j, j)].re += shift;
        }
        Self { m }
    }

    /// `U self U^dagger`.
    pub fn conjugate_by(&self, u: &DMatrix<Complex64>) -> Self {
        Self::symmetrized(u * &self.m * u.adjoint())
    }

    /// `V^dagger self V`: the matrix expressed in the basis given by the
    /// columns of `V`.
    pub fn in_basis(&self, v: &DMatrix<Complex64>) -> Self {
        Self::symmetrized(v.adjoint() * &self.m * v)
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_norm(&self) -> f64 {
        eigh(self)
            .values
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }
}

fn check_dims(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// Hilbert-Schmidt inner product `Tr(a b)`.
pub fn hs_inner(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    // Tr(ab) = sum_jk a_jk b_kj = sum_jk a_jk conj(b_jk) for Hermitian b.
    Ok(a.m
        .iter()
        .zip(b.m.iter())
        .map(|(x, y)| (x * y.conj()).re)
        .sum())
}

/// Spectral decomposition `V diag(values) V^dagger` with values sorted
/// non-increasing.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    /// Unitary matrix whose columns are the eigenvectors.
    pub vectors: DMatrix<Complex64>,
}

impl EigenDecomposition {
    pub fn reconstruct(&self) -> HermitianMatrix {
        rebuild(&self.vectors, &self.values)
    }
}

/// `V diag(values) V^dagger`.
pub(crate) fn rebuild(v: &DMatrix<Complex64>, values: &[f64]) -> HermitianMatrix {
    let mut scaled = v.clone();
    for (k, &lam) in values.iter().enumerate() {
        scaled.column_mut(k).scale_mut(lam);
    }
    HermitianMatrix::symmetrized(scaled * v.adjoint())
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenpairs are sorted by descending eigenvalue and each eigenvector is
/// rotated so its first non-negligible component is real and positive, which
/// makes the output a deterministic function of the input.
pub fn eigh(h: &HermitianMatrix) -> EigenDecomposition {
    let d = h.dim();
    if d == 1 {
        return EigenDecomposition {
            values: vec![h.m[(0, 0)].re],
            vectors: DMatrix::identity(1, 1),
        };
    }
    let eig = SymmetricEigen::new(h.m.clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::from_element(d, d, ZERO);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let norm = col.norm();
        let pivot = col
            .iter()
            .find(|z| z.norm() > 1e-8 * norm)
            .copied()
            .unwrap_or(Complex64::new(1.0, 0.0));
        let phase = pivot.conj() / pivot.norm();
        for i in 0..d {
            vectors[(i, dst)] = col[i] * phase / norm;
        }
    }
    EigenDecomposition { values, vectors }
}

/// A unit-trace positive semidefinite Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    h: HermitianMatrix,
    rank: usize,
}

impl DensityMatrix {
    pub fn new(h: HermitianMatrix) -> Result<Self> {
        let eig = eigh(&h);
        Self::validated(h, &eig.values)
    }

    fn validated(h: HermitianMatrix, values: &[f64]) -> Result<Self> {
        let tr = h.trace();
        if (tr - 1.0).abs() > DENSITY_TOL {
            return Err(Error::NotDensityMatrix(format!("trace is {tr}")));
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -DENSITY_TOL {
            return Err(Error::NotDensityMatrix(format!(
                "smallest eigenvalue is {min:e}"
            )));
        }
        let rank = numerical_rank(values);
        Ok(Self { h, rank })
    }

    /// Build from an eigenbasis and a spectrum, skipping a second
    /// diagonalization.
    pub fn from_spectrum(vectors: &DMatrix<Complex64>, values: &[f64]) -> Result<Self> {
        Self::validated(rebuild(vectors, values), values)
    }

    pub fn from_diagonal(p: &[f64]) -> Result<Self> {
        Self::validated(HermitianMatrix::from_real_diagonal(p), p)
    }

    /// The pure state `|psi><psi|`, normalizing `psi`.
    pub fn pure(psi: &DVector<Complex64>) -> Result<Self> {
        let norm = psi.norm();
        if !(norm > 0.0) {
            return invalid("pure state vector must be non-zero");
        }
        let h = HermitianMatrix::outer(&(psi / Complex64::new(norm, 0.0)));
        Ok(Self { h, rank: 1 })
    }

    /// The Fock-basis projector `|k><k|` in dimension `d`.
    pub fn basis_state(d: usize, k: usize) -> Result<Self> {
        if k >= d {
            return invalid(format!("basis index {k} out of range for dimension {d}"));
        }
        let mut p = vec![0.0; d];
        p[k] = 1.0;
        Self::from_diagonal(&p)
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            h: HermitianMatrix::identity(d).scale(1.0 / d as f64),
            rank: d,
        }
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn as_hermitian(&self) -> &HermitianMatrix {
        &self.h
    }

    pub fn into_hermitian(self) -> HermitianMatrix {
        self.h
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        self.h.matrix()
    }

    pub fn purity(&self) -> f64 {
        self.h.norm_sqr()
    }

    /// Zero-pad into a larger Hilbert space.
    pub fn embed(&self, d: usize) -> Result<Self> {
        let small = self.dim();
        if d < small {
            return invalid(format!("cannot embed dimension {small} into {d}"));
        }
        let mut m = DMatrix::from_element(d, d, ZERO);
        m.view_mut((0, 0), (small, small)).copy_from(self.h.matrix());
        Ok(Self {
            h: HermitianMatrix { m },
            rank: self.rank,
        })
    }

    /// Keep the leading `d x d` block and renormalize its trace to one.
    pub fn truncate(&self, d: usize) -> Result<Self> {
        if d == 0 {
            return invalid("cannot truncate to dimension 0");
        }
        if d >= self.dim() {
            return self.embed(d);
        }
        let block = self.h.matrix().view((0, 0), (d, d)).into_owned();
        let tr: f64 = (0..d).map(|j| block[(j, j)].re).sum();
        if !(tr > 0.0) {
            return invalid("state has no weight on the truncated subspace");
        }
        Self::new(HermitianMatrix::symmetrized(block / Complex64::new(tr, 0.0)))
    }

    /// `(1 - w) rho + w I/d`.
    pub fn mix_with_identity(&self, w: f64) -> Self {
        let d = self.dim();
        let h = self
            .h
            .scale(1.0 - w)
            .shift_diagonal(w / d as f64);
        Self { h, rank: d }
    }
}

fn numerical_rank(values: &[f64]) -> usize {
    let max = values.iter().copied().fold(0.0_f64, f64::max);
    if max <= 0.0 {
        return 0;
    }
    values.iter().filter(|&&v| v > RANK_THRESHOLD * max).count()
}

fn gaussian(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Draw `scale * G` with `G` from the Gaussian unitary ensemble.
///
/// Diagonal entries have variance `scale^2`; the real and imaginary parts of
/// each off-diagonal entry have variance `scale^2 / 2`. With this convention
/// the spectrum approaches a semicircle of radius `2 * scale * sqrt(n)`.
pub fn sample_gue(n: usize, scale: f64, rng: &mut Rng) -> Result<HermitianMatrix> {
    if n == 0 {
        return invalid("GUE dimension must be positive");
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return invalid(format!("GUE scale must be positive, got {scale}"));
    }
    let off = scale * std::f64::consts::FRAC_1_SQRT_2;
    let mut m = DMatrix::from_element(n, n, ZERO);
    for j in 0..n {
        m[(j, j)] = Complex64::new(scale * gaussian(rng), 0.0);
        for k in (j + 1)..n {
            let z = Complex64::new(off * gaussian(rng), off * gaussian(rng));
            m[(j, k)] = z;
            m[(k, j)] = z.conj();
        }
    }
    Ok(HermitianMatrix { m })
}

/// Simulate an unconstrained estimate `rho0 + delta` with `delta` a GUE
/// perturbation of scale `eps`. With `traceless` the trace part of `delta` is
/// removed so the result has unit trace.
pub fn sample_perturbed_state(
    rho0: &DensityMatrix,
    eps: f64,
    traceless: bool,
    rng: &mut Rng,
) -> Result<HermitianMatrix> {
    let mut delta = sample_gue(rho0.dim(), eps, rng)?;
    if traceless {
        let shift = -delta.trace() / rho0.dim() as f64;
        delta = delta.shift_diagonal(shift);
    }
    rho0.as_hermitian().add(&delta)
}

/// A random trace-one Hermitian matrix: `scale * G` shifted along the
/// identity, with `G` from the GUE. Usually indefinite for `scale >~ 1/d^1.5`.
pub fn sample_trace_one_hermitian(d: usize, scale: f64, rng: &mut Rng) -> Result<HermitianMatrix> {
    let g = sample_gue(d, scale, rng)?;
    Ok(g.shift_diagonal((1.0 - g.trace()) / d as f64))
}

/// How the nonzero eigenvalues of a random state are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Spectrum {
    /// Uniform on the probability simplex (flat Dirichlet).
    UniformSimplex,
    /// All nonzero eigenvalues equal to `1/r`.
    #[default]
    EqualWeights,
}

/// Haar-random unitary: QR of a complex Ginibre matrix with the phases of
/// `R`'s diagonal moved into `Q`.
pub fn haar_unitary(d: usize, rng: &mut Rng) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(d, d, |_, _| {
        Complex64::new(gaussian(rng), gaussian(rng)) * std::f64::consts::FRAC_1_SQRT_2
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..d {
        let rkk = r[(k, k)];
        let phase = if rkk.norm() > 0.0 {
            rkk / rkk.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        q.column_mut(k).iter_mut().for_each(|z| *z *= phase);
    }
    q
}

/// A random state of dimension `d` and rank exactly `r`, rotated by a Haar
/// unitary.
pub fn random_rank_r_state(
    d: usize,
    r: usize,
    spectrum: Spectrum,
    rng: &mut Rng,
) -> Result<DensityMatrix> {
    if r == 0 || r > d {
        return invalid(format!("rank must satisfy 1 <= r <= d, got r={r}, d={d}"));
    }
    let mut p = vec![0.0; d];
    match spectrum {
        Spectrum::EqualWeights => p[..r].iter_mut().for_each(|x| *x = 1.0 / r as f64),
        Spectrum::UniformSimplex => {
            // Exponential spacings normalized to one are flat-Dirichlet.
            // Resample a draw whose smallest weight would count as zero.
            loop {
                let e: Vec<f64> = (0..r).map(|_| Exp1.sample(rng)).collect();
                let total: f64 = e.iter().sum();
                let w: Vec<f64> = e.iter().map(|x| x / total).collect();
                let max = w.iter().copied().fold(0.0, f64::max);
                if w.iter().all(|&x| x > 1e-6 * max) {
                    p[..r].copy_from_slice(&w);
                    break;
                }
            }
        }
    }
    let u = haar_unitary(d, rng);
    let state = DensityMatrix::from_spectrum(&u, &p)?;
    debug_assert_eq!(state.rank(), r);
    Ok(state)
}

/// Random complex unit vector, used for pure-state tests.
pub fn random_pure_state(d: usize, rng: &mut Rng) -> Result<DensityMatrix> {
    let v = DVector::from_fn(d, |_, _| Complex64::new(gaussian(rng), gaussian(rng)));
    DensityMatrix::pure(&v)
}

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::mle::OverlapTable;
use super::sampling::HeterodyneDataset;
use crate::error::{invalid, Error, Result};
use crate::hermitian::{DensityMatrix, HermitianMatrix};

pub const DEFAULT_REGULARIZER: f64 = 1e-6;

/// Reported condition number when the smallest eigenvalue is negligible.
pub const CONDITION_CAP: f64 = 1e14;

/// Orthonormal traceless Hermitian basis (generalized Gell-Mann matrices).
///
/// Order: symmetric `(E_jk + E_kj)/sqrt2` for `j < k` row-major, then the
/// antisymmetric `-i(E_jk - E_kj)/sqrt2` in the same order, then the diagonal
/// `(sum_{l<m} E_ll - m E_mm)/sqrt(m(m+1))` for `m = 1..d-1`.
pub fn gell_mann_basis(d: usize) -> Vec<HermitianMatrix> {
    let zero = Complex64::new(0.0, 0.0);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d * d - 1);
    for (re, im) in [(s, 0.0), (0.0, s)] {
        for j in 0..d {
            for k in j + 1..d {
                let mut m = DMatrix::from_element(d, d, zero);
                m[(j, k)] = Complex64::new(re, -im);
                m[(k, j)] = Complex64::new(re, im);
                out.push(HermitianMatrix::new(m).expect("hermitian by construction"));
            }
        }
    }
    for m in 1..d {
        let norm = 1.0 / ((m * (m + 1)) as f64).sqrt();
        let mut diag = vec![0.0; d];
        diag[..m].iter_mut().for_each(|x| *x = norm);
        diag[m] = -(m as f64) * norm;
        out.push(HermitianMatrix::from_real_diagonal(&diag));
    }
    out
}

/// `<v|B_i|v>` for every Gell-Mann element, in [`gell_mann_basis`] order.
pub(crate) fn basis_expectations(v: &[Complex64], out: &mut Vec<f64>) {
    let d = v.len();
    let sqrt2 = std::f64::consts::SQRT_2;
    out.clear();
    for j in 0..d {
        for k in j + 1..d {
            out.push(sqrt2 * (v[j].conj() * v[k]).re);
        }
    }
    for j in 0..d {
        for k in j + 1..d {
            out.push(sqrt2 * (v[j].conj() * v[k]).im);
        }
    }
    let mut prefix = 0.0;
    for m in 1..d {
        prefix += v[m - 1].norm_sqr();
        out.push((prefix - m as f64 * v[m].norm_sqr()) / ((m * (m + 1)) as f64).sqrt());
    }
}

#[derive(Debug, Clone)]
pub struct FisherEstimate {
    /// Hessian of the negative loglikelihood in the Gell-Mann basis.
    pub matrix: DMatrix<f64>,
    pub condition_number: f64,
    /// The smallest eigenvalue was below `1e-14` of the largest.
    pub capped: bool,
    pub eval_point: DensityMatrix,
    pub n_datasets_averaged: usize,
}

fn condition(matrix: &DMatrix<f64>) -> (f64, bool) {
    let eig = SymmetricEigen::new(matrix.clone()).eigenvalues;
    let max = eig.max();
    let min = eig.min();
    if !(max > 0.0) || min < 1e-14 * max {
        return (CONDITION_CAP, true);
    }
    ((max / min).max(1.0), false)
}

/// Observed Fisher information of `data` at `(1 - reg) rho + reg I/d`.
pub fn fisher_hessian(
    rho_eval: &DensityMatrix,
    data: &HeterodyneDataset,
    d_model: usize,
    regularizer: f64,
) -> Result<FisherEstimate> {
    if rho_eval.dim() != d_model {
        return Err(Error::DimensionMismatch {
            expected: d_model,
            actual: rho_eval.dim(),
        });
    }
    if d_model < 2 {
        return invalid("the Hessian needs d_model >= 2");
    }
    if !(0.0..1.0).contains(&regularizer) {
        return invalid(format!("regularizer must lie in [0, 1), got {regularizer}"));
    }
    let rho = rho_eval.mix_with_identity(regularizer);
    let table = OverlapTable::new(data, d_model)?;
    let p = table.probabilities(rho.matrix());
    let k = d_model * d_model - 1;
    let mut g = Vec::with_capacity(k);
    let mut weighted = DMatrix::zeros(table.n_samples(), k);
    let mut plain = DMatrix::zeros(table.n_samples(), k);
    for (s, (row, &ps)) in table.rows().zip(&p).enumerate() {
        if !(ps > 0.0) {
            return invalid(format!("zero probability at sample {s} after regularization"));
        }
        basis_expectations(row, &mut g);
        for (i, &gi) in g.iter().enumerate() {
            plain[(s, i)] = gi;
            weighted[(s, i)] = gi / (ps * ps);
        }
    }
    let mut matrix = plain.transpose() * weighted;
    matrix = 0.5 * (&matrix + matrix.transpose());
    let (condition_number, capped) = condition(&matrix);
    Ok(FisherEstimate {
        matrix,
        condition_number,
        capped,
        eval_point: rho,
        n_datasets_averaged: 1,
    })
}

/// Arithmetic mean of Hessians, conditioned after averaging.
pub fn average_fisher(estimates: &[FisherEstimate]) -> Result<FisherEstimate> {
    let Some(first) = estimates.first() else {
        return invalid("nothing to average");
    };
    let mut sum = first.matrix.clone() * first.n_datasets_averaged as f64;
    let mut count = first.n_datasets_averaged;
    for e in &estimates[1..] {
        if e.matrix.shape() != sum.shape() {
            return Err(Error::DimensionMismatch {
                expected: sum.nrows(),
                actual: e.matrix.nrows(),
            });
        }
        sum += &e.matrix * e.n_datasets_averaged as f64;
        count += e.n_datasets_averaged;
    }
    let matrix = sum / count as f64;
    let (condition_number, capped) = condition(&matrix);
    Ok(FisherEstimate {
        matrix,
        condition_number,
        capped,
        eval_point: first.eval_point.clone(),
        n_datasets_averaged: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heterodyne::coherent::coherent_overlap;
    use crate::heterodyne::sampling::sample_husimi;
    use crate::hermitian::hs_inner;
    use crate::rng::SeedStream;

    #[test]
    fn basis_is_orthonormal_and_traceless() {
        for d in 2..=5 {
            let b = gell_mann_basis(d);
            assert_eq!(b.len(), d * d - 1);
            for (i, bi) in b.iter().enumerate() {
                assert!(bi.trace().abs() < 1e-15);
                for (j, bj) in b.iter().enumerate() {
                    let ip = hs_inner(bi, bj).unwrap();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((ip - want).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn fast_expectations_match_explicit_products() {
        let d = 4;
        let basis = gell_mann_basis(d);
        let v = coherent_overlap(Complex64::new(0.7, -0.4), d);
        let mut fast = Vec::new();
        basis_expectations(v.as_slice(), &mut fast);
        for (b, f) in basis.iter().zip(&fast) {
            let explicit = (v.adjoint() * b.matrix() * &v)[(0, 0)];
            assert!(explicit.im.abs() < 1e-15);
            assert!((explicit.re - f).abs() < 1e-14);
        }
    }

    #[test]
    fn hessian_is_symmetric_psd_and_conditioned() {
        let vac = DensityMatrix::basis_state(3, 0).unwrap();
        let data = sample_husimi(&vac, 2_000, "fock0", 1, &mut SeedStream::new(1).rng(0)).unwrap();
        let est = fisher_hessian(&vac, &data, 3, DEFAULT_REGULARIZER).unwrap();
        let m = &est.matrix;
        assert!((m - m.transpose()).amax() < 1e-9);
        let eig = SymmetricEigen::new(m.clone()).eigenvalues;
        assert!(eig.min() >= -1e-8 * eig.max());
        assert!(est.condition_number >= 1.0);
        let avg = average_fisher(&[est.clone(), est.clone()]).unwrap();
        assert_eq!(avg.n_datasets_averaged, 2);
        assert!((avg.matrix - &est.matrix).amax() < 1e-9 * est.matrix.amax());
    }

    #[test]
    fn hessian_matches_finite_difference() {
        let rho = DensityMatrix::maximally_mixed(2);
        let data = sample_husimi(&rho, 300, "mixed", 2, &mut SeedStream::new(2).rng(0)).unwrap();
        let est = fisher_hessian(&rho, &data, 2, 0.0).unwrap();
        let basis = gell_mann_basis(2);
        let nll = |x: &HermitianMatrix| -> f64 {
            data.samples
                .iter()
                .map(|&a| {
                    let v = coherent_overlap(a, 2);
                    -(v.adjoint() * x.matrix() * &v)[(0, 0)].re.ln()
                })
                .sum()
        };
        let h = 1e-4;
        for i in 0..3 {
            for j in 0..3 {
                let at = |si: f64, sj: f64| {
                    let x = rho
                        .as_hermitian()
                        .add(&basis[i].scale(si * h))
                        .unwrap()
                        .add(&basis[j].scale(sj * h))
                        .unwrap();
                    nll(&x)
                };
                let fd = (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h * h);
                assert!((fd - est.matrix[(i, j)]).abs() < 1e-3 * est.matrix.amax(), "{i},{j}");
            }
        }
    }
}

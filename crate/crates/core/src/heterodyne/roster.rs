use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::hermitian::DensityMatrix;

/// A named true state for heterodyne experiments.
#[derive(Debug, Clone)]
pub struct RosterEntry {
    pub label: String,
    pub state: DensityMatrix,
}

const LABELS: [&str; 9] = [
    "fock0", "fock1", "fock2", "sup01", "sup012", "thermal2", "thermal3", "thermal4", "thermal5",
];

/// Look up a state by label. Each state is stored in the smallest Fock
/// cutoff that contains it.
///
/// * `fockK`: the number state `|K>`.
/// * `sup01`, `sup012`: equal superpositions of the listed number states.
/// * `thermalD`: `p_n ∝ 2^-n` on `|0>..|D-1>`.
pub fn roster_state(label: &str) -> Result<DensityMatrix> {
    if let Some(k) = label.strip_prefix("fock").and_then(|s| s.parse::<usize>().ok()) {
        return DensityMatrix::basis_state(k + 1, k);
    }
    if let Some(digits) = label.strip_prefix("sup") {
        let levels: Option<Vec<usize>> = digits.chars().map(|c| c.to_digit(10).map(|x| x as usize)).collect();
        if let Some(levels) = levels.filter(|l| l.len() >= 2) {
            let d = levels.iter().max().unwrap() + 1;
            let mut psi = DVector::from_element(d, Complex64::new(0.0, 0.0));
            for &l in &levels {
                psi[l] = Complex64::new(1.0, 0.0);
            }
            return DensityMatrix::pure(&psi);
        }
    }
    if let Some(d) = label.strip_prefix("thermal").and_then(|s| s.parse::<usize>().ok()) {
        if d >= 1 {
            let weights: Vec<f64> = (0..d).map(|n| 0.5f64.powi(n as i32)).collect();
            let total: f64 = weights.iter().sum();
            let p: Vec<f64> = weights.iter().map(|w| w / total).collect();
            return DensityMatrix::from_diagonal(&p);
        }
    }
    invalid(format!("unknown state label '{label}'"))
}

pub fn default_roster() -> Vec<RosterEntry> {
    LABELS
        .iter()
        .map(|&label| RosterEntry {
            label: label.to_string(),
            state: roster_state(label).expect("built-in labels parse"),
        })
        .collect()
}

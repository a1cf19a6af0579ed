use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{LearnerError, Matrix};

/// Per-column z-score parameters. Columns with zero spread pass through
/// untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Column means and population standard deviations.
pub fn standardize_fit(matrix: &Matrix) -> Result<StandardizationParams, LearnerError> {
    if matrix.rows() == 0 {
        return Err(LearnerError::EmptyMatrix);
    }
    let n = matrix.rows() as f64;
    let mut mean = alloc::vec![0.0; matrix.cols()];
    for row in matrix.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = alloc::vec![0.0; matrix.cols()];
    for row in matrix.iter_rows() {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.into_iter().map(|s| libm::sqrt(s / n)).collect();
    Ok(StandardizationParams { mean, std })
}

impl StandardizationParams {
    pub fn is_pass_through(&self, column: usize) -> bool {
        self.std[column] == 0.0
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&v, (&m, &s))| if s == 0.0 { v } else { (v - m) / s })
            .collect()
    }

    pub fn apply_matrix(&self, matrix: &Matrix) -> Matrix {
        matrix.map_rows(|r| self.apply(r))
    }
}

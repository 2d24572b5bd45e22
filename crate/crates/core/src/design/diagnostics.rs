use nalgebra::SymmetricEigen;
use serde::Serialize;

use super::DesignData;

/// Advisory conditioning summary of `(X0 | X)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesignDiagnostics {
    /// Smallest eigenvalue of `(X0 | X)'(X0 | X) / n`.
    pub lambda_min_over_n: f64,
    /// Largest eigenvalue of `(X0 | X)'(X0 | X) / n`.
    pub lambda_max_over_n: f64,
    /// `max_i ||row_i||² / n`.
    pub max_row_leverage_over_n: f64,
}

pub fn design_diagnostics(design: &DesignData) -> DesignDiagnostics {
    let n = design.n() as f64;
    let order: Vec<usize> = (0..design.p()).collect();
    let m = design.model_matrix(&order);
    let gram = m.tr_mul(&m) / n;
    let eigen = SymmetricEigen::new(gram).eigenvalues;
    let lambda_min_over_n = eigen.iter().copied().fold(f64::INFINITY, f64::min);
    let lambda_max_over_n = eigen.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_row = m.row_iter().map(|r| r.norm_squared()).fold(0.0, f64::max);
    DesignDiagnostics { lambda_min_over_n, lambda_max_over_n, max_row_leverage_over_n: max_row / n }
}

//! The 3D pyramid system A x ≤ b whose apex is the only feasible region
//! point reachable by zigzagging projections.

use crate::constraint::{AffineConstraint, Constraint, FeasibilityProblem};
use crate::error::{Error, Result};
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    rows: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl LinearSystem {
    pub fn new(rows: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        if rows.len() != b.len() {
            return Err(Error::Config(format!(
                "{} rows but {} right-hand sides",
                rows.len(),
                b.len()
            )));
        }
        let n = rows.first().map(Vec::len).unwrap_or(0);
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Config(
                "rows must be non-empty and of equal length".into(),
            ));
        }
        Ok(LinearSystem { rows, b })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.rows[0].len()
    }

    /// One affine constraint ⟨a_i, x⟩ − b_i ≤ 0 per row, in row order.
    pub fn to_feasibility_problem(&self) -> Result<FeasibilityProblem> {
        let constraints = self
            .rows
            .iter()
            .zip(&self.b)
            .enumerate()
            .map(|(i, (a, &b))| {
                Ok(Arc::new(AffineConstraint::new(
                    a.clone(),
                    b,
                    format!("row {}", i + 1),
                )?) as Constraint)
            })
            .collect::<Result<Vec<_>>>()?;
        FeasibilityProblem::new(constraints)
    }

    /// Row-wise residuals A x − b.
    pub fn residuals(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.b)
            .map(|(a, b)| crate::vector::dot(a, x) - b)
            .collect()
    }
}

/// Axis intercepts (δ_x1, δ_x2) of the pyramid faces:
/// δ_x1 = tan β · δ_x3 / sin α and δ_x2 = tan β · δ_x3 / cos α.
pub fn linear_deltas(alpha_deg: f64, beta_deg: f64, delta_x3: f64) -> Result<(f64, f64)> {
    let open = |a: f64| a > 0.0 && a < 90.0;
    if !open(alpha_deg) || !open(beta_deg) || !(delta_x3 > 0.0) || !delta_x3.is_finite() {
        return Err(Error::Config(format!(
            "need 0 < alpha, beta < 90 degrees and delta_x3 > 0, got ({alpha_deg}, {beta_deg}, {delta_x3})"
        )));
    }
    let (a, b) = (alpha_deg.to_radians(), beta_deg.to_radians());
    Ok((b.tan() * delta_x3 / a.sin(), b.tan() * delta_x3 / a.cos()))
}

/// The four faces of the pyramid with apex (0, 0, δ_x3):
/// rows (∓1/δ_x1, ∓1/δ_x2, −1/δ_x3) and b = −1.
pub fn build_linear_problem(alpha_deg: f64, beta_deg: f64, delta_x3: f64) -> Result<LinearSystem> {
    let (d1, d2) = linear_deltas(alpha_deg, beta_deg, delta_x3)?;
    let d3 = delta_x3;
    let rows = vec![
        vec![-1.0 / d1, -1.0 / d2, -1.0 / d3],
        vec![1.0 / d1, -1.0 / d2, -1.0 / d3],
        vec![1.0 / d1, 1.0 / d2, -1.0 / d3],
        vec![-1.0 / d1, 1.0 / d2, -1.0 / d3],
    ];
    LinearSystem::new(rows, vec![-1.0; 4])
}

/// Eight-row system with rows (a1, a3, a1, a3, a2, a4, a2, a4).
pub fn extend_linear_problem(sys: &LinearSystem) -> Result<LinearSystem> {
    if sys.rows.len() != 4 {
        return Err(Error::Config(format!(
            "extension needs a 4-row system, got {} rows",
            sys.rows.len()
        )));
    }
    let order = [0, 2, 0, 2, 1, 3, 1, 3];
    LinearSystem::new(
        order.iter().map(|&i| sys.rows[i].clone()).collect(),
        order.iter().map(|&i| sys.b[i]).collect(),
    )
}

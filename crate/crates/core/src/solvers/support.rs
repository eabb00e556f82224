//! Support extraction and debiasing.
//!
//! Relaxed solvers shrink coefficients; the final model keeps only atoms
//! whose modulus clears a relative threshold and re-estimates their
//! coefficients by least squares on the observed rows.

use nalgebra::DVector;

use super::{subset_least_squares, Problem, SolveResult};
use crate::model::AtomicModel;
use crate::{Error, Result};

/// A thresholded support with refit coefficients.
#[derive(Debug, Clone)]
pub struct SupportExtraction {
    /// Refit model (offset-only when the support is empty).
    pub model: AtomicModel,
    /// Full-length refit coefficient vector, zero off the support.
    pub coeffs: DVector<f64>,
    pub residual_sq: f64,
    /// Kept atom indices, ascending.
    pub support: Vec<usize>,
}

/// Keeps atoms with modulus above `threshold_rel` times the largest
/// modulus, then refits the kept coefficients (plus the constant) by least
/// squares.
pub fn extract_support(
    problem: &Problem,
    result: &SolveResult,
    threshold_rel: f64,
) -> Result<SupportExtraction> {
    if !(threshold_rel > 0.0 && threshold_rel < 1.0) {
        return Err(Error::SolverConfig(format!(
            "support threshold must lie in (0, 1), got {threshold_rel}"
        )));
    }
    let dict = problem.dict();
    let support = dict.active_atoms(&result.coeffs, threshold_rel);
    let mut cols = vec![0usize];
    for &j in &support {
        cols.push(1 + 2 * j);
        cols.push(2 + 2 * j);
    }
    let (coeffs, residual_sq) =
        subset_least_squares(problem.output_dictionary(), problem.target(), &cols);
    let model = dict.complex_coeffs(&coeffs, 0.0)?;
    Ok(SupportExtraction {
        model,
        coeffs,
        residual_sq,
        support,
    })
}

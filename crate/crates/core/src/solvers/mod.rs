//! The three identification routes over a fixed dictionary.
//!
//! All solvers share a [`Problem`]: the observed rows of the regression
//! matrix multiplied through the kernel dictionary (so unknowns are the
//! dictionary's real coefficient pairs), the observed noisy outputs, and
//! the relevant bounds (`epsilon` for residual-constrained solvers, `tau`
//! for the ball-constrained one).
//!
//! - [`solve_mip`] — exact cardinality minimization by best-first
//!   branch-and-bound over the atom activity pattern, least-squares
//!   feasibility checks per node.
//! - [`solve_l1`] — atomic-cost relaxation: proximal gradient on the
//!   penalized form with group soft-thresholding, outer bisection on the
//!   penalty weight until the residual lands just inside `epsilon`.
//! - [`solve_fw`] — randomized Frank-Wolfe over the atomic-cost ball of
//!   radius `tau` with exact line search.
//! - [`extract_support`] — thresholds the recovered atoms and refits their
//!   coefficients by least squares (debiasing).

mod fw;
mod l1;
mod mip;
mod support;
#[cfg(test)]
pub(crate) mod testutil;

pub use fw::{solve_fw, FwConfig, StepRule};
pub use l1::{solve_l1, L1Config};
pub use mip::{choose_big_m, solve_mip, MipConfig};
pub use support::{extract_support, SupportExtraction};

use nalgebra::{DMatrix, DVector};

use crate::atoms::Dictionary;
use crate::model::{AtomicModel, RegressionMatrix};
use crate::{Error, Result};

/// Relative modulus threshold separating solver noise from genuine atoms.
pub const ACTIVITY_THRESHOLD_REL: f64 = 1e-6;

/// Identification problem over a dictionary: `target ≈ output_dictionary · w`.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    dict: &'a Dictionary,
    output_dictionary: DMatrix<f64>,
    target: DVector<f64>,
    epsilon: f64,
    tau: f64,
    big_m: f64,
}

impl<'a> Problem<'a> {
    /// Wraps a precomputed output dictionary (observed rows of `X` times the
    /// kernel matrix) and the observed outputs.
    pub fn new(
        dict: &'a Dictionary,
        output_dictionary: DMatrix<f64>,
        target: DVector<f64>,
    ) -> Result<Self> {
        if output_dictionary.ncols() != dict.n_cols() {
            return Err(Error::DimensionMismatch(format!(
                "output dictionary has {} columns, dictionary {}",
                output_dictionary.ncols(),
                dict.n_cols()
            )));
        }
        if output_dictionary.nrows() != target.len() {
            return Err(Error::DimensionMismatch(format!(
                "output dictionary has {} rows, target {}",
                output_dictionary.nrows(),
                target.len()
            )));
        }
        if target.is_empty() {
            return Err(Error::EmptyObservationSet);
        }
        Ok(Self {
            dict,
            output_dictionary,
            target,
            epsilon: 0.0,
            tau: 0.0,
            big_m: 0.0,
        })
    }

    /// Assembles the problem directly from signals: dictionary column
    /// responses to the input, keeping only rows where `mask` is true.
    pub fn assemble(
        dict: &'a Dictionary,
        input: &[f64],
        output: &[f64],
        mask: &[bool],
    ) -> Result<Self> {
        if input.len() != output.len() || input.len() != mask.len() {
            return Err(Error::DimensionMismatch(
                "input, output and mask lengths differ".into(),
            ));
        }
        let rows: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
        if rows.is_empty() {
            return Err(Error::EmptyObservationSet);
        }
        let full = dict.output_matrix(input);
        let a = full.select_rows(rows.iter());
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| output[i]));
        Self::new(dict, a, y)
    }

    /// Assembles through the dense regression matrix route. Same result as
    /// [`Problem::assemble`], kept for cross-checking and small problems.
    pub fn from_regression(
        dict: &'a Dictionary,
        x: &RegressionMatrix,
        output: &[f64],
        mask: &[bool],
    ) -> Result<Self> {
        if x.n_samples() != output.len() || output.len() != mask.len() {
            return Err(Error::DimensionMismatch(
                "regression matrix, output and mask lengths differ".into(),
            ));
        }
        let x_obs = x.observed(mask)?;
        let a = x_obs * dict.kernel_matrix();
        let y = crate::data::observed_values(output, mask)?;
        Self::new(dict, a, y)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_big_m(mut self, big_m: f64) -> Self {
        self.big_m = big_m;
        self
    }

    pub fn dict(&self) -> &Dictionary {
        self.dict
    }

    pub fn output_dictionary(&self) -> &DMatrix<f64> {
        &self.output_dictionary
    }

    pub fn target(&self) -> &DVector<f64> {
        &self.target
    }

    pub fn n_observed(&self) -> usize {
        self.target.len()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn big_m(&self) -> f64 {
        self.big_m
    }

    /// Squared residual of a coefficient vector.
    pub fn residual_sq(&self, coeffs: &DVector<f64>) -> f64 {
        (&self.target - &self.output_dictionary * coeffs).norm_squared()
    }

    /// Smallest achievable squared residual over the full column space.
    pub fn min_residual_sq(&self) -> f64 {
        let w = min_norm_least_squares(&self.output_dictionary, &self.target);
        self.residual_sq(&w)
    }
}

/// Which algorithm produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Mip,
    L1,
    Fw,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Mip => "mip",
            SolverKind::L1 => "l1",
            SolverKind::Fw => "fw",
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome of one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// Real coefficient vector over the dictionary columns.
    pub coeffs: DVector<f64>,
    /// Sparse model at the activity threshold.
    pub model: AtomicModel,
    pub residual_sq: f64,
    /// Atoms whose coefficient modulus exceeds the activity threshold
    /// (column pairs counted once; the constant is not an atom).
    pub cardinality: usize,
    pub objective_trace: Vec<f64>,
    pub solver_name: SolverKind,
    pub converged: bool,
    pub seed: u64,
}

impl SolveResult {
    pub(crate) fn build(
        problem: &Problem,
        solver_name: SolverKind,
        coeffs: DVector<f64>,
        objective_trace: Vec<f64>,
        converged: bool,
        seed: u64,
    ) -> Result<Self> {
        let dict = problem.dict();
        let residual_sq = problem.residual_sq(&coeffs);
        let cardinality = dict.active_atoms(&coeffs, ACTIVITY_THRESHOLD_REL).len();
        let max_modulus = (0..dict.n_atoms())
            .map(|j| coeffs[1 + 2 * j].hypot(coeffs[2 + 2 * j]))
            .fold(0.0, f64::max);
        let model = dict.complex_coeffs(&coeffs, ACTIVITY_THRESHOLD_REL * max_modulus)?;
        Ok(SolveResult {
            coeffs,
            model,
            residual_sq,
            cardinality,
            objective_trace,
            solver_name,
            converged,
            seed,
        })
    }
}

/// Minimum-norm least-squares solution via SVD with a relative singular
/// value cutoff.
pub(crate) fn min_norm_least_squares(a: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let cutoff = svd.singular_values.max() * 1e-12;
    svd.solve(y, cutoff.max(f64::MIN_POSITIVE))
        .expect("svd solve with u and v_t computed")
}

/// Least squares on a column subset; returns the full-length coefficient
/// vector (zeros off the subset) and the squared residual.
pub(crate) fn subset_least_squares(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    cols: &[usize],
) -> (DVector<f64>, f64) {
    let sub = a.select_columns(cols.iter());
    let w_sub = min_norm_least_squares(&sub, y);
    let residual_sq = (y - sub * &w_sub).norm_squared();
    let mut w = DVector::zeros(a.ncols());
    for (i, &c) in cols.iter().enumerate() {
        w[c] = w_sub[i];
    }
    (w, residual_sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atoms::{augment_grid, build_catalog, build_dictionary, build_grid, PairPolicy};
    use crate::data::{observed_values, uniform_input};
    use crate::model::{eval_kernels, regression_matrix, simulate, Pole};
    use crate::presets;

    #[test]
    fn assembly_routes_agree() {
        let grid = augment_grid(
            &build_grid(2, 4, 0.3, 0.8).unwrap(),
            &[Pole::new(0.5, 0.31).unwrap()],
        );
        let catalog = build_catalog(&grid, PairPolicy::Sampled(6), 1.0, 1.0, 5).unwrap();
        let dict = build_dictionary(catalog, 6).unwrap();
        let input = uniform_input(40, 9);
        let model = presets::example2().model;
        let output = simulate(&eval_kernels(&model, 6).unwrap(), &input);
        let mut mask = vec![true; 40];
        mask[5] = false;
        mask[17] = false;

        let fast = Problem::assemble(&dict, &input, &output, &mask).unwrap();
        let x = regression_matrix(&input, 6).unwrap();
        let slow = Problem::from_regression(&dict, &x, &output, &mask).unwrap();

        assert_eq!(fast.output_dictionary().shape(), slow.output_dictionary().shape());
        for (a, b) in fast
            .output_dictionary()
            .iter()
            .zip(slow.output_dictionary().iter())
        {
            assert!((a - b).abs() < 1e-10);
        }
        let y = observed_values(&output, &mask).unwrap();
        assert_eq!(fast.target(), &y);
        assert_eq!(slow.target(), &y);
    }

    #[test]
    fn residual_of_exact_coefficients_is_zero() {
        let model = presets::example1().model;
        let grid = augment_grid(&build_grid(1, 1, 0.5, 0.5).unwrap(), &model.distinct_poles());
        let mut catalog = build_catalog(&grid, PairPolicy::Sampled(0), 1.0, 1.0, 0).unwrap();
        for (a, _) in model.second_order() {
            catalog
                .ensure_second_order_pair(a.pole1(), a.pole2())
                .unwrap();
        }
        let l = 25;
        let dict = build_dictionary(catalog, l).unwrap();
        let input = uniform_input(60, 2);
        let output = simulate(&eval_kernels(&model, l).unwrap(), &input);
        let mask = vec![true; 60];
        let problem = Problem::assemble(&dict, &input, &output, &mask).unwrap();
        let w = dict.model_coeffs(&model).unwrap();
        assert!(problem.residual_sq(&w) < 1e-16 * output.iter().map(|v| v * v).sum::<f64>());
    }
}

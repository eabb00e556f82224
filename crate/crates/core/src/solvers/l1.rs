//! Atomic-cost relaxation under a residual constraint.
//!
//! The constrained problem `min Ω(w) s.t. ||y - Aw||² <= ε` is solved
//! through its penalized form `min ½||y - Aw||² + λ·Ω(w)` with an
//! accelerated proximal-gradient loop (the prox of Ω is a group soft
//! threshold on each `(u, v)` coefficient pair, a scalar soft threshold on
//! the constant), plus an outer bisection on `λ`: feasible evaluations move
//! the bracket up, infeasible ones down, until the residual lands in
//! `[(1-δ)ε, ε]` or the bracket collapses. The feasible iterate with the
//! smallest atomic cost seen is returned.

use nalgebra::{DMatrix, DVector};

use super::{Problem, SolveResult, SolverKind};
use crate::atoms::Dictionary;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct L1Config {
    /// Inner stopping criterion: max KKT violation relative to the current
    /// penalty value.
    pub tol: f64,
    /// Inner iteration budget per penalty evaluation.
    pub max_iter: usize,
    /// Feasibility band δ: accept residuals in `[(1-δ)ε, ε]`.
    pub feasibility_band: f64,
    /// Outer bisection budget.
    pub max_outer: usize,
}

impl Default for L1Config {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 20_000,
            feasibility_band: 0.05,
            max_outer: 60,
        }
    }
}

/// Proximal operator of `t·Ω`: scalar soft threshold on the constant,
/// `max(0, 1 - t/||(u,v)||)·(u,v)` on each atom pair.
pub fn group_soft_threshold(dict: &Dictionary, z: &DVector<f64>, t: f64) -> DVector<f64> {
    let mut w = z.clone();
    w[0] = z[0].signum() * (z[0].abs() - t).max(0.0);
    for j in 0..dict.n_atoms() {
        let (u, v) = (z[1 + 2 * j], z[2 + 2 * j]);
        let norm = u.hypot(v);
        let factor = if norm > t { 1.0 - t / norm } else { 0.0 };
        w[1 + 2 * j] = factor * u;
        w[2 + 2 * j] = factor * v;
    }
    w
}

/// Largest group correlation norm `max_g ||A_gᵀ r||`; at `λ` above this
/// value (with `r = y`) the penalized solution is identically zero.
pub fn critical_lambda(dict: &Dictionary, a: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let corr = a.tr_mul(y);
    let mut lambda = corr[0].abs();
    for j in 0..dict.n_atoms() {
        lambda = lambda.max(corr[1 + 2 * j].hypot(corr[2 + 2 * j]));
    }
    lambda
}

/// Max KKT violation of the penalized problem at `w`.
fn kkt_violation(dict: &Dictionary, corr: &DVector<f64>, w: &DVector<f64>, lambda: f64) -> f64 {
    let mut worst = if w[0] != 0.0 {
        (corr[0] - lambda * w[0].signum()).abs()
    } else {
        (corr[0].abs() - lambda).max(0.0)
    };
    for j in 0..dict.n_atoms() {
        let (u, v) = (w[1 + 2 * j], w[2 + 2 * j]);
        let (cu, cv) = (corr[1 + 2 * j], corr[2 + 2 * j]);
        let viol = if u != 0.0 || v != 0.0 {
            let norm = u.hypot(v);
            (cu - lambda * u / norm).hypot(cv - lambda * v / norm)
        } else {
            (cu.hypot(cv) - lambda).max(0.0)
        };
        worst = worst.max(viol);
    }
    worst
}

/// Access to the quadratic term `½||y - Aw||²`. Tall problems keep the
/// factored form; when the column count is small relative to the row count
/// the precomputed Gram matrix makes each gradient much cheaper.
pub(crate) struct QuadraticTerm<'m> {
    a: &'m DMatrix<f64>,
    y: &'m DVector<f64>,
    gram: Option<DMatrix<f64>>,
    aty: DVector<f64>,
}

impl<'m> QuadraticTerm<'m> {
    pub(crate) fn new(a: &'m DMatrix<f64>, y: &'m DVector<f64>) -> Self {
        let aty = a.tr_mul(y);
        let gram = (a.ncols() <= 2 * a.nrows()).then(|| a.tr_mul(a));
        Self { a, y, gram, aty }
    }

    /// Gradient `AᵀAw - Aᵀy`; the residual correlations are its negation.
    fn grad(&self, w: &DVector<f64>) -> DVector<f64> {
        match &self.gram {
            Some(g) => g * w - &self.aty,
            None => self.a.tr_mul(&(self.a * w - self.y)),
        }
    }

    /// Reduced normal-equation pieces `(AᵀA)_SS` and `(Aᵀy)_S`.
    fn reduced(&self, cols: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
        let aty = DVector::from_iterator(cols.len(), cols.iter().map(|&c| self.aty[c]));
        let gram = match &self.gram {
            Some(g) => DMatrix::from_fn(cols.len(), cols.len(), |i, j| g[(cols[i], cols[j])]),
            None => {
                let sub = self.a.select_columns(cols.iter());
                sub.tr_mul(&sub)
            }
        };
        (gram, aty)
    }
}

/// High-precision solve of the penalized problem restricted to a working
/// set of groups, by iteratively reweighted least squares on the smooth
/// reformulation: stationarity requires
/// `(AᵀA)_S w + λ·blockdiag(1/||w_g||) w = (Aᵀy)_S`.
/// Groups whose norm collapses are dropped to exact zero.
fn irls_polish(
    dict: &Dictionary,
    term: &QuadraticTerm,
    lambda: f64,
    groups: &[usize],
    w: &mut DVector<f64>,
) {
    let mut active: Vec<usize> = groups.to_vec();
    for _ in 0..200 {
        if active.is_empty() {
            return;
        }
        let mut cols = Vec::new();
        for &g in &active {
            let (c0, c1) = dict.group_cols(g);
            cols.push(c0);
            if let Some(c1) = c1 {
                cols.push(c1);
            }
        }
        let (gram, aty) = term.reduced(&cols);
        // Current group norms set the reweighting diagonal.
        let mut diag = DVector::zeros(cols.len());
        let mut scale: f64 = 0.0;
        {
            let mut k = 0;
            for &g in &active {
                let (c0, c1) = dict.group_cols(g);
                let norm = if let Some(c1) = c1 {
                    w[c0].hypot(w[c1])
                } else {
                    w[c0].abs()
                };
                scale = scale.max(norm);
                let weight = lambda / norm.max(1e-300);
                diag[k] = weight;
                k += 1;
                if c1.is_some() {
                    diag[k] = weight;
                    k += 1;
                }
            }
        }
        let mut system = gram;
        for i in 0..cols.len() {
            system[(i, i)] += diag[i];
        }
        let Some(solved) = system.clone().cholesky().map(|ch| ch.solve(&aty)).or_else(|| {
            system.lu().solve(&aty)
        }) else {
            return;
        };
        let mut max_change: f64 = 0.0;
        for (i, &c) in cols.iter().enumerate() {
            max_change = max_change.max((w[c] - solved[i]).abs());
            w[c] = solved[i];
        }
        // Drop collapsed groups so the reweighting stays bounded.
        let mut new_scale: f64 = 0.0;
        for &g in &active {
            let (c0, c1) = dict.group_cols(g);
            let norm = if let Some(c1) = c1 {
                w[c0].hypot(w[c1])
            } else {
                w[c0].abs()
            };
            new_scale = new_scale.max(norm);
        }
        let floor = new_scale * 1e-10;
        let before = active.len();
        active.retain(|&g| {
            let (c0, c1) = dict.group_cols(g);
            let norm = if let Some(c1) = c1 {
                w[c0].hypot(w[c1])
            } else {
                w[c0].abs()
            };
            if norm <= floor {
                w[c0] = 0.0;
                if let Some(c1) = c1 {
                    w[c1] = 0.0;
                }
                false
            } else {
                true
            }
        });
        if active.len() == before && max_change <= 1e-15 * scale.max(1e-300) {
            return;
        }
    }
}

/// One burst of accelerated proximal-gradient iterations.
fn prox_gradient_burst(
    dict: &Dictionary,
    term: &QuadraticTerm,
    lambda: f64,
    w0: &DVector<f64>,
    lipschitz: f64,
    kkt_tol: f64,
    max_iter: usize,
) -> (DVector<f64>, bool) {
    let step = 1.0 / lipschitz;
    let mut w = w0.clone();
    let mut z = w.clone();
    let mut momentum = 1.0f64;
    for iter in 0..max_iter {
        let grad = term.grad(&z);
        let w_next = group_soft_threshold(dict, &(&z - &grad * step), step * lambda);
        let dw = &w_next - &w;

        // Gradient-mapping restart keeps the momentum useful.
        if (&z - &w_next).dot(&dw) > 0.0 {
            momentum = 1.0;
            z = w_next.clone();
        } else {
            let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            z = &w_next + &dw * ((momentum - 1.0) / next);
            momentum = next;
        }
        w = w_next;

        if iter % 10 == 9 || iter + 1 == max_iter {
            let corr = -term.grad(&w);
            if kkt_violation(dict, &corr, &w, lambda) <= kkt_tol {
                return (w, true);
            }
        }
    }
    (w, false)
}

/// Penalized solve at one `λ`, warm-started. Proximal-gradient bursts
/// stabilize the active set; a working-set IRLS polish then drives the
/// reduced problem to high precision, and the worst KKT violator joins the
/// set until the full optimality conditions hold. Returns the iterate,
/// whether the KKT tolerance was met, and rounds used.
pub(crate) fn penalized_prox_gradient(
    dict: &Dictionary,
    term: &QuadraticTerm,
    lambda: f64,
    w0: &DVector<f64>,
    lipschitz: f64,
    kkt_tol: f64,
    max_iter: usize,
) -> (DVector<f64>, bool, usize) {
    let burst = max_iter.clamp(1, 300);
    let (mut w, mut converged) = prox_gradient_burst(
        dict, term, lambda, w0, lipschitz, kkt_tol, burst,
    );
    let max_rounds = 60;
    for round in 0..max_rounds {
        let corr = -term.grad(&w);
        let mut groups: Vec<usize> = Vec::new();
        let mut worst_group = 0usize;
        let mut worst: f64 = -1.0;
        for g in 0..dict.n_groups() {
            let (c0, c1) = dict.group_cols(g);
            let (norm, cnorm) = match c1 {
                Some(c1) => (w[c0].hypot(w[c1]), corr[c0].hypot(corr[c1])),
                None => (w[c0].abs(), corr[c0].abs()),
            };
            if norm > 0.0 {
                groups.push(g);
            } else {
                let viol = (cnorm - lambda).max(0.0);
                if viol > worst {
                    worst = viol;
                    worst_group = g;
                }
            }
        }
        if kkt_violation(dict, &corr, &w, lambda) <= kkt_tol {
            return (w, true, round);
        }
        if worst > kkt_tol {
            groups.push(worst_group);
        }
        if groups.is_empty() {
            return (w, true, round);
        }
        irls_polish(dict, term, lambda, &groups, &mut w);
        converged = false;
    }
    let corr = -term.grad(&w);
    let ok = kkt_violation(dict, &corr, &w, lambda) <= kkt_tol;
    let _ = converged;
    (w, ok, max_rounds)
}

/// Constrained atomic-cost minimization through the penalized path.
pub fn solve_l1(problem: &Problem, config: &L1Config) -> Result<SolveResult> {
    let eps = problem.epsilon();
    if eps <= 0.0 {
        return Err(Error::SolverConfig(format!(
            "l1 solver requires epsilon > 0, got {eps}"
        )));
    }
    let dict = problem.dict();
    let a = problem.output_dictionary();
    let y = problem.target();
    let y_sq = y.norm_squared();
    if y_sq <= eps {
        // The zero model is feasible with zero atomic cost.
        return SolveResult::build(
            problem,
            SolverKind::L1,
            DVector::zeros(dict.n_cols()),
            vec![y_sq],
            true,
            0,
        );
    }

    let min_rsq = problem.min_residual_sq();
    if min_rsq > eps {
        return Err(Error::Infeasible {
            min_residual_sq: min_rsq,
            epsilon: eps,
        });
    }

    let lambda_max = critical_lambda(dict, a, y);
    let sigma_max = a.clone().singular_values().max();
    let lipschitz = (sigma_max * sigma_max).max(f64::MIN_POSITIVE);
    let term = QuadraticTerm::new(a, y);

    let band_lo = (1.0 - config.feasibility_band) * eps;
    let mut lo = lambda_max * 1e-12;
    let mut hi = lambda_max;
    let mut w = DVector::zeros(dict.n_cols());
    let mut trace = Vec::new();
    let mut best: Option<(f64, DVector<f64>, bool)> = None;

    for _ in 0..config.max_outer {
        let mid = (lo * hi).sqrt();
        let (w_mid, inner_ok, _) = penalized_prox_gradient(
            dict,
            &term,
            mid,
            &w,
            lipschitz,
            config.tol * mid,
            config.max_iter,
        );
        w = w_mid.clone();
        let rsq = problem.residual_sq(&w_mid);
        trace.push(rsq);
        if rsq <= eps {
            let cost = dict.atomic_l1_cost(&w_mid);
            if best.as_ref().map_or(true, |(c, _, _)| cost < *c) {
                best = Some((cost, w_mid, inner_ok));
            }
            if rsq >= band_lo {
                break;
            }
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0 + 1e-4 {
            break;
        }
    }

    // The bracket can collapse without a feasible evaluation even though
    // the dense fit is feasible; push once more at the small end.
    if best.is_none() {
        let (w_lo, inner_ok, _) = penalized_prox_gradient(
            dict,
            &term,
            lo,
            &w,
            lipschitz,
            config.tol * lo,
            config.max_iter * 3,
        );
        let rsq = problem.residual_sq(&w_lo);
        trace.push(rsq);
        if rsq <= eps {
            best = Some((dict.atomic_l1_cost(&w_lo), w_lo, inner_ok));
        }
    }

    match best {
        Some((_, w_best, inner_ok)) => {
            SolveResult::build(problem, SolverKind::L1, w_best, trace, inner_ok, 0)
        }
        None => Err(Error::Infeasible {
            min_residual_sq: trace.iter().cloned().fold(f64::INFINITY, f64::min),
            epsilon: eps,
        }),
    }
}

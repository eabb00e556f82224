//! Exact cardinality minimization over the atom activity pattern.
//!
//! Minimizes the number of active atoms subject to the squared-residual
//! bound. An atom is either fully active (both of its coefficient columns
//! free) or pinned to zero; the constant column is always available and is
//! not counted. Best-first branch-and-bound: nodes order by
//! (forced-active count, least-squares relaxation residual), the relaxation
//! over all not-yet-excluded columns gives a residual lower bound for the
//! subtree, and every node's forced-active set is itself tested as a
//! candidate support. The optimum is exact when the node budget suffices.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use nalgebra::DVector;

use super::{subset_least_squares, min_norm_least_squares, Problem, SolveResult, SolverKind};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct MipConfig {
    pub max_nodes: usize,
}

impl Default for MipConfig {
    fn default() -> Self {
        Self { max_nodes: 200_000 }
    }
}

#[derive(Debug)]
struct Node {
    forced_in: u64,
    forced_out: u64,
    next_rank: usize,
    relax_rsq: f64,
}

struct QueueEntry {
    card: usize,
    relax_rsq: f64,
    id: u64,
    node: Node,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for QueueEntry {}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.card
            .cmp(&other.card)
            .then(self.relax_rsq.total_cmp(&other.relax_rsq))
            .then(self.id.cmp(&other.id))
    }
}

/// Columns of a support: the constant plus both columns of each active atom.
fn support_cols(mask: u64, n_atoms: usize) -> Vec<usize> {
    let mut cols = Vec::with_capacity(1 + 2 * mask.count_ones() as usize);
    cols.push(0);
    for j in 0..n_atoms {
        if mask >> j & 1 == 1 {
            cols.push(1 + 2 * j);
            cols.push(2 + 2 * j);
        }
    }
    cols
}

/// Exact minimum-cardinality identification by branch-and-bound.
pub fn solve_mip(problem: &Problem, config: &MipConfig) -> Result<SolveResult> {
    let dict = problem.dict();
    let n = dict.n_atoms();
    if n > 63 {
        return Err(Error::SolverConfig(format!(
            "branch-and-bound supports at most 63 atoms, got {n}"
        )));
    }
    let eps = problem.epsilon();
    let a = problem.output_dictionary();
    let y = problem.target();

    let mut memo: HashMap<u64, (DVector<f64>, f64)> = HashMap::new();
    let mut eval = |mask: u64| -> (DVector<f64>, f64) {
        memo.entry(mask)
            .or_insert_with(|| subset_least_squares(a, y, &support_cols(mask, n)))
            .clone()
    };

    let all_mask: u64 = (1u64 << n) - 1;
    let (w_all, rsq_all) = eval(all_mask);
    if rsq_all > eps {
        return Err(Error::Infeasible {
            min_residual_sq: rsq_all,
            epsilon: eps,
        });
    }

    // Branch on the atom with the largest dense-fit modulus first.
    let moduli: Vec<f64> = (0..n)
        .map(|j| w_all[1 + 2 * j].hypot(w_all[2 + 2 * j]))
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| moduli[j].total_cmp(&moduli[i]));

    // The full support seeds the incumbent.
    let mut best_card = n;
    let mut best_rsq = rsq_all;
    let mut best_w = w_all;
    let mut trace = vec![best_card as f64];

    // Supports slightly over the bound cannot hide a feasible subset, so
    // pruning with this slack never discards the optimum.
    let feas_slack = 1e-12 * (1.0 + eps);

    let mut heap: BinaryHeap<Reverse<QueueEntry>> = BinaryHeap::new();
    let mut next_id: u64 = 0;
    heap.push(Reverse(QueueEntry {
        card: 0,
        relax_rsq: rsq_all,
        id: next_id,
        node: Node {
            forced_in: 0,
            forced_out: 0,
            next_rank: 0,
            relax_rsq: rsq_all,
        },
    }));

    let mut visited = 0usize;
    while let Some(Reverse(entry)) = heap.pop() {
        visited += 1;
        if visited > config.max_nodes {
            let best = SolveResult::build(
                problem,
                SolverKind::Mip,
                best_w,
                trace,
                false,
                0,
            )?;
            return Err(Error::NodeBudgetExceeded {
                best: Box::new(best),
            });
        }
        let node = entry.node;
        let card_in = node.forced_in.count_ones() as usize;
        if card_in > best_card {
            continue;
        }

        // The forced-active set itself is a candidate support.
        let (w_in, rsq_in) = eval(node.forced_in);
        if rsq_in <= eps
            && (card_in < best_card || (card_in == best_card && rsq_in < best_rsq))
        {
            best_card = card_in;
            best_rsq = rsq_in;
            best_w = w_in;
            trace.push(best_card as f64);
        }

        // Children add at least one atom or keep the same forced set, so
        // only branch while an equal-or-better cardinality is reachable.
        if card_in + 1 > best_card {
            continue;
        }
        let branch_atom = order[node.next_rank..]
            .iter()
            .copied()
            .find(|&j| (node.forced_in | node.forced_out) >> j & 1 == 0);
        let Some(atom) = branch_atom else {
            continue;
        };
        let rank_after = order.iter().position(|&j| j == atom).unwrap() + 1;

        // Include-child: same relaxation set as the parent.
        next_id += 1;
        heap.push(Reverse(QueueEntry {
            card: card_in + 1,
            relax_rsq: node.relax_rsq,
            id: next_id,
            node: Node {
                forced_in: node.forced_in | 1 << atom,
                forced_out: node.forced_out,
                next_rank: rank_after,
                relax_rsq: node.relax_rsq,
            },
        }));

        // Exclude-child: relaxation shrinks; prune when already infeasible.
        let excluded = node.forced_out | 1 << atom;
        let (_, relax_rsq) = eval(all_mask & !excluded);
        if relax_rsq <= eps + feas_slack {
            next_id += 1;
            heap.push(Reverse(QueueEntry {
                card: card_in,
                relax_rsq,
                id: next_id,
                node: Node {
                    forced_in: node.forced_in,
                    forced_out: excluded,
                    next_rank: rank_after,
                    relax_rsq,
                },
            }));
        }
    }

    SolveResult::build(problem, SolverKind::Mip, best_w, trace, true, 0)
}

/// Coefficient bound for the mixed-integer formulation: `safety` times the
/// largest group modulus of the minimum-norm dense least-squares fit.
pub fn choose_big_m(problem: &Problem, safety: f64) -> f64 {
    debug_assert!(safety >= 1.0, "safety factor below 1 cannot bound the optimum");
    let w = min_norm_least_squares(problem.output_dictionary(), problem.target());
    let dict = problem.dict();
    let mut max_modulus = w[0].abs();
    for j in 0..dict.n_atoms() {
        max_modulus = max_modulus.max(w[1 + 2 * j].hypot(w[2 + 2 * j]));
    }
    safety * max_modulus
}

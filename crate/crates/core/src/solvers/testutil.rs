//! Shared instance generators for solver tests.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::{subset_least_squares, Problem};
use crate::atoms::{build_catalog, build_dictionary, canonical_pairs, Dictionary, PairPolicy, PoleGrid};
use crate::data::uniform_input;
use crate::model::Pole;

/// Random set of well-separated upper-half poles. Moduli stay in a band
/// away from the origin: poles near zero all look like near-delta kernels
/// and make dictionary columns nearly collinear.
pub(crate) fn random_grid(rng: &mut ChaCha12Rng, n_poles: usize, min_sep: f64) -> PoleGrid {
    let mut poles: Vec<Pole> = Vec::new();
    let mut sep = min_sep;
    let mut attempts = 0usize;
    while poles.len() < n_poles {
        attempts += 1;
        if attempts > 10_000 {
            // The requested packing does not fit; loosen it.
            sep *= 0.9;
            attempts = 0;
        }
        let re = rng.random_range(-0.85..0.85);
        let im = rng.random_range(0.0..0.85);
        let Ok(p) = Pole::new(re, im) else { continue };
        if p.modulus() > 0.85 || p.modulus() < 0.35 {
            continue;
        }
        if poles
            .iter()
            .all(|q| (q.re() - p.re()).hypot(q.im() - p.im()) >= sep)
        {
            poles.push(p);
        }
    }
    PoleGrid::from_poles(&poles).unwrap()
}

/// Dictionary with the requested atom split, a sparse truth drawn on it,
/// and simulated (optionally noisy) data. Returns the dictionary, the true
/// coefficient vector, the input and the output.
pub(crate) fn random_instance(
    seed: u64,
    n_first: usize,
    n_second: usize,
    truth_atoms: usize,
    noise_level: f64,
    n_samples: usize,
) -> (Dictionary, DVector<f64>, Vec<f64>, Vec<f64>) {
    random_instance_with(seed, n_first, n_second, truth_atoms, noise_level, n_samples, 0.25)
}

/// As [`random_instance`] with an explicit pole separation. Exact-recovery
/// tests need generous separation: closer atoms stay too correlated for
/// the relaxation to null the decoys.
pub(crate) fn random_instance_with(
    seed: u64,
    n_first: usize,
    n_second: usize,
    truth_atoms: usize,
    noise_level: f64,
    n_samples: usize,
    min_sep: f64,
) -> (Dictionary, DVector<f64>, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let grid = random_grid(&mut rng, n_first, min_sep);
    let pairs = canonical_pairs(&grid).len();
    let catalog = build_catalog(
        &grid,
        PairPolicy::Sampled(n_second.min(pairs)),
        1.0,
        1.0,
        seed,
    )
    .unwrap();
    let dict = build_dictionary(catalog, 12).unwrap();

    let mut w_true = DVector::zeros(dict.n_cols());
    let mut chosen: Vec<usize> = Vec::new();
    while chosen.len() < truth_atoms.min(dict.n_atoms()) {
        let j = rng.random_range(0..dict.n_atoms());
        if !chosen.contains(&j) {
            chosen.push(j);
            w_true[1 + 2 * j] =
                rng.random_range(0.5..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            if dict.col_active(2 + 2 * j) {
                w_true[2 + 2 * j] = rng.random_range(-1.5..1.5);
            }
        }
    }

    let input = uniform_input(n_samples, seed.wrapping_add(1));
    let a_full = dict.output_matrix(&input);
    let clean: Vec<f64> = (&a_full * &w_true).iter().cloned().collect();
    let noisy = if noise_level > 0.0 {
        crate::data::add_uniform_noise(&clean, noise_level, seed.wrapping_add(2))
            .unwrap()
            .0
    } else {
        clean.clone()
    };
    (dict, w_true, input, noisy)
}

/// Brute-force minimum-cardinality search over every atom support.
pub(crate) fn exhaustive_best(problem: &Problem) -> Option<(usize, f64)> {
    let n = problem.dict().n_atoms();
    let mut best: Option<(usize, f64)> = None;
    for mask in 0..(1u64 << n) {
        let mut cols = vec![0usize];
        for j in 0..n {
            if mask >> j & 1 == 1 {
                cols.push(1 + 2 * j);
                cols.push(2 + 2 * j);
            }
        }
        let (_, rsq) = subset_least_squares(problem.output_dictionary(), problem.target(), &cols);
        if rsq <= problem.epsilon() {
            let card = mask.count_ones() as usize;
            let better = match best {
                None => true,
                Some((bc, br)) => card < bc || (card == bc && rsq < br),
            };
            if better {
                best = Some((card, rsq));
            }
        }
    }
    best
}

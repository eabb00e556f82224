//! Built-in benchmark systems.
//!
//! Two second-order systems with randomly drawn poles and coefficients,
//! each a sum of four first-order and two second-order exponential atoms
//! (scales 1, no constant offset). The first is identified from `N = 100`
//! samples under 11.2% uniform output noise, the second from `N = 150`
//! samples under 8% noise.

use num_complex::Complex64;

use crate::model::{AtomicModel, FirstOrderAtom, Pole, SecondOrderAtom};

/// A ground-truth system together with its experiment defaults.
#[derive(Debug, Clone)]
pub struct PresetSpec {
    pub name: &'static str,
    pub model: AtomicModel,
    pub n_samples: usize,
    pub noise_level_pct: f64,
}

/// Raw preset constants: `(pole_re, pole_im, coeff_re, coeff_im)` per
/// first-order atom and `(p1_re, p1_im, p2_re, p2_im, c_re, c_im)` per
/// second-order atom.
pub const EXAMPLE1_FIRST: [(f64, f64, f64, f64); 4] = [
    (-0.1375, 0.2731, 1.8969, 0.0618),
    (-0.1210, 0.3591, 0.2834, -0.6773),
    (0.7844, 0.0577, 1.9874, -0.2800),
    (-0.8890, -0.2277, 0.2142, -0.0328),
];

pub const EXAMPLE1_SECOND: [(f64, f64, f64, f64, f64, f64); 2] = [
    (0.2270, 0.1086, 0.3591, -0.6873, 1.5449, -1.2369),
    (0.4978, -0.4239, -0.7062, 0.5511, 1.7244, -0.9657),
];

pub const EXAMPLE2_FIRST: [(f64, f64, f64, f64); 4] = [
    (-0.6019, 0.2180, -1.9283, -1.8763),
    (0.4813, -0.4971, -1.5213, -0.0245),
    (0.1924, -0.3459, 1.8085, 1.4509),
    (0.8084, -0.0051, 1.9034, -1.0285),
];

pub const EXAMPLE2_SECOND: [(f64, f64, f64, f64, f64, f64); 2] = [
    (0.3966, 0.6776, -0.5943, -0.5600, 0.5278, 0.2857),
    (0.0182, 0.0431, 0.5027, 0.3444, -1.0269, 1.9269),
];

fn build(
    first: &[(f64, f64, f64, f64)],
    second: &[(f64, f64, f64, f64, f64, f64)],
) -> AtomicModel {
    let first_order = first
        .iter()
        .map(|&(pr, pi, cr, ci)| {
            let atom = FirstOrderAtom::new(Pole::new(pr, pi).unwrap(), 1.0).unwrap();
            (atom, Complex64::new(cr, ci))
        })
        .collect();
    let second_order = second
        .iter()
        .map(|&(p1r, p1i, p2r, p2i, cr, ci)| {
            let atom = SecondOrderAtom::new(
                Pole::new(p1r, p1i).unwrap(),
                Pole::new(p2r, p2i).unwrap(),
                1.0,
            )
            .unwrap();
            (atom, Complex64::new(cr, ci))
        })
        .collect();
    AtomicModel::new(0.0, first_order, second_order)
}

pub fn example1() -> PresetSpec {
    PresetSpec {
        name: "example1",
        model: build(&EXAMPLE1_FIRST, &EXAMPLE1_SECOND),
        n_samples: 100,
        noise_level_pct: 11.2,
    }
}

pub fn example2() -> PresetSpec {
    PresetSpec {
        name: "example2",
        model: build(&EXAMPLE2_FIRST, &EXAMPLE2_SECOND),
        n_samples: 150,
        noise_level_pct: 8.0,
    }
}

/// Looks up a preset by name.
pub fn by_name(name: &str) -> Option<PresetSpec> {
    match name {
        "example1" => Some(example1()),
        "example2" => Some(example2()),
        _ => None,
    }
}

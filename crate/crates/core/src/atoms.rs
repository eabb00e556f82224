//! Pole grids, atom catalogs and the real-valued kernel dictionary.
//!
//! A grid discretizes a compact annulus inside the unit circle; only
//! upper-half-disk poles are stored since conjugates are implicit. The
//! catalog instantiates one first-order atom per grid pole and second-order
//! atoms over pole pairs (full Cartesian square or a seeded sample of it;
//! one representative per conjugate orbit). The dictionary maps real
//! coefficient pairs `(u, v)` per atom to stacked kernels: with `c = u + iv`
//! paired against its conjugate, the atom contributes `u·2Re(a) + v·(-2Im(a))`,
//! so every reachable kernel is real and the solvers stay entirely real.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::collections::HashSet;
use std::f64::consts::PI;

use crate::model::{
    eval_first_order_kernel, lagged_exponential_sum, powers, AtomicModel, FirstOrderAtom, Pole,
    SecondOrderAtom, POLE_TOL,
};
use crate::{Error, Result};

/// Deduplicated upper-half-disk pole set over an annulus.
#[derive(Debug, Clone)]
pub struct PoleGrid {
    poles: Vec<Pole>,
    radial_counts: usize,
    angular_counts: usize,
    min_radius: f64,
    max_radius: f64,
}

impl PoleGrid {
    /// Grid from an explicit pole list (canonicalized to the upper half,
    /// deduplicated; radii taken from the content).
    pub fn from_poles(poles: &[Pole]) -> Result<PoleGrid> {
        if poles.is_empty() {
            return Err(Error::GridConfig("pole list is empty".into()));
        }
        let mut out: Vec<Pole> = Vec::new();
        for p in poles {
            let p = p.canonical();
            if !contains(&out, &p) {
                out.push(p);
            }
        }
        let min_radius = out.iter().map(|p| p.modulus()).fold(1.0, f64::min);
        let max_radius = out.iter().map(|p| p.modulus()).fold(0.0, f64::max);
        Ok(PoleGrid {
            poles: out,
            radial_counts: 1,
            angular_counts: 1,
            min_radius,
            max_radius,
        })
    }

    pub fn poles(&self) -> &[Pole] {
        &self.poles
    }

    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    pub fn radial_counts(&self) -> usize {
        self.radial_counts
    }

    pub fn angular_counts(&self) -> usize {
        self.angular_counts
    }

    pub fn min_radius(&self) -> f64 {
        self.min_radius
    }

    pub fn max_radius(&self) -> f64 {
        self.max_radius
    }

    /// Largest pole modulus actually present.
    pub fn max_modulus(&self) -> f64 {
        self.poles
            .iter()
            .map(|p| p.modulus())
            .fold(0.0, f64::max)
    }

    /// Diagonal of one grid cell, a conservative estimate of the distance
    /// from an arbitrary disk point to its nearest grid pole.
    pub fn spacing(&self) -> f64 {
        let dr = if self.radial_counts > 1 {
            (self.max_radius - self.min_radius) / (self.radial_counts - 1) as f64
        } else {
            0.0
        };
        let arc = if self.angular_counts > 1 {
            self.max_radius * PI / (self.angular_counts - 1) as f64
        } else {
            0.0
        };
        dr.hypot(arc)
    }
}

fn contains(poles: &[Pole], p: &Pole) -> bool {
    poles.iter().any(|q| q.approx_eq(p, POLE_TOL))
}

/// Grids the upper half of the annulus `[min_radius, max_radius]` with the
/// Cartesian product of uniformly spaced radii and angles in `[0, π]`.
pub fn build_grid(
    radial_counts: usize,
    angular_counts: usize,
    min_radius: f64,
    max_radius: f64,
) -> Result<PoleGrid> {
    if radial_counts == 0 || angular_counts == 0 {
        return Err(Error::GridConfig("grid counts must be at least 1".into()));
    }
    if !(min_radius > 0.0 && min_radius <= max_radius && max_radius < 1.0) {
        return Err(Error::GridConfig(format!(
            "radii must satisfy 0 < min <= max < 1, got [{min_radius}, {max_radius}]"
        )));
    }
    let radius = |i: usize| {
        if radial_counts == 1 {
            min_radius
        } else {
            min_radius + (max_radius - min_radius) * i as f64 / (radial_counts - 1) as f64
        }
    };
    let angle = |k: usize| {
        if angular_counts == 1 {
            0.0
        } else {
            PI * k as f64 / (angular_counts - 1) as f64
        }
    };
    let mut poles = Vec::new();
    for i in 0..radial_counts {
        for k in 0..angular_counts {
            let (r, th) = (radius(i), angle(k));
            // Snap coordinates that are zero up to rounding so that
            // deduplication and realness checks see exact values.
            let snap = |v: f64| if v.abs() <= POLE_TOL { 0.0 } else { v };
            let p = Pole::new(snap(r * th.cos()), snap(r * th.sin()))?;
            if !contains(&poles, &p) {
                poles.push(p);
            }
        }
    }
    Ok(PoleGrid {
        poles,
        radial_counts,
        angular_counts,
        min_radius,
        max_radius,
    })
}

/// Union of a grid with extra poles (canonicalized to the upper half,
/// deduplicated, appended after the original grid in order).
pub fn augment_grid(grid: &PoleGrid, extra: &[Pole]) -> PoleGrid {
    let mut out = grid.clone();
    for p in extra {
        let p = p.canonical();
        if !contains(&out.poles, &p) {
            out.min_radius = out.min_radius.min(p.modulus());
            out.max_radius = out.max_radius.max(p.modulus());
            out.poles.push(p);
        }
    }
    out
}

/// How second-order pole pairs are chosen from the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairPolicy {
    /// Every canonical pair from the full-disk Cartesian square.
    AllPairs,
    /// A seeded sample of the given size, drawn without replacement.
    Sampled(usize),
}

impl PairPolicy {
    pub fn name(&self) -> String {
        match self {
            PairPolicy::AllPairs => "all_pairs".into(),
            PairPolicy::Sampled(m) => format!("sampled({m})"),
        }
    }
}

/// The instantiated atomic set: one first-order atom per grid pole plus
/// second-order atoms over selected pole pairs.
#[derive(Debug, Clone)]
pub struct AtomCatalog {
    first_atoms: Vec<FirstOrderAtom>,
    second_atoms: Vec<SecondOrderAtom>,
    scale_alpha: f64,
    scale_beta: f64,
    pair_policy: PairPolicy,
    seed: u64,
}

impl AtomCatalog {
    pub fn first_atoms(&self) -> &[FirstOrderAtom] {
        &self.first_atoms
    }

    pub fn second_atoms(&self) -> &[SecondOrderAtom] {
        &self.second_atoms
    }

    pub fn scale_alpha(&self) -> f64 {
        self.scale_alpha
    }

    pub fn scale_beta(&self) -> f64 {
        self.scale_beta
    }

    pub fn pair_policy(&self) -> PairPolicy {
        self.pair_policy
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_atoms(&self) -> usize {
        self.first_atoms.len() + self.second_atoms.len()
    }

    /// Atom by catalog index: first-order atoms come first.
    pub fn atom(&self, index: usize) -> AtomRef<'_> {
        if index < self.first_atoms.len() {
            AtomRef::First(&self.first_atoms[index])
        } else {
            AtomRef::Second(&self.second_atoms[index - self.first_atoms.len()])
        }
    }

    /// Guarantees a first-order atom at the canonical representative of
    /// `pole`, appending it when missing. Returns true if added.
    ///
    /// Note: appending to the first-order block renumbers every
    /// second-order catalog index, so plant poles before building a
    /// dictionary over the catalog.
    pub fn ensure_first_order_atom(&mut self, pole: Pole) -> Result<bool> {
        let pole = pole.canonical();
        let exists = self
            .first_atoms
            .iter()
            .any(|a| a.pole().approx_eq(&pole, POLE_TOL));
        if exists {
            Ok(false)
        } else {
            self.first_atoms
                .push(FirstOrderAtom::new(pole, self.scale_alpha)?);
            Ok(true)
        }
    }

    /// Guarantees a second-order atom for the conjugate orbit of
    /// `(pole1, pole2)`, appending it when missing. Returns true if added.
    pub fn ensure_second_order_pair(&mut self, pole1: Pole, pole2: Pole) -> Result<bool> {
        let (atom, _) = SecondOrderAtom::new(pole1, pole2, self.scale_beta)?.canonical();
        let exists = self.second_atoms.iter().any(|a| {
            a.pole1().approx_eq(&atom.pole1(), POLE_TOL) && a.pole2().approx_eq(&atom.pole2(), POLE_TOL)
        });
        if exists {
            Ok(false)
        } else {
            self.second_atoms.push(atom);
            Ok(true)
        }
    }
}

/// Reference to a catalog atom of either order.
#[derive(Debug, Clone, Copy)]
pub enum AtomRef<'a> {
    First(&'a FirstOrderAtom),
    Second(&'a SecondOrderAtom),
}

impl AtomRef<'_> {
    /// Whether the conjugate pair degenerates (all poles real), pinning the
    /// imaginary coefficient column to zero.
    pub fn is_real(&self) -> bool {
        match self {
            AtomRef::First(a) => a.pole().is_real(),
            AtomRef::Second(a) => a.is_real(),
        }
    }
}

fn pair_key(p1: &Pole, p2: &Pole) -> (u64, u64, u64, u64) {
    (
        p1.re().to_bits(),
        p1.im().to_bits(),
        p2.re().to_bits(),
        p2.im().to_bits(),
    )
}

/// Canonical conjugate-orbit representatives of the full-disk pair square,
/// in first-occurrence order.
pub fn canonical_pairs(grid: &PoleGrid) -> Vec<(Pole, Pole)> {
    let mut full = Vec::new();
    for p in grid.poles() {
        full.push(*p);
        if !p.is_real() {
            full.push(p.conj());
        }
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for a in &full {
        for b in &full {
            // Same orbit rule as SecondOrderAtom::canonical.
            let key = (a.im(), b.im(), a.re(), b.re());
            let conj_key = (-a.im(), -b.im(), a.re(), b.re());
            let (ca, cb) = if conj_key > key {
                (a.conj(), b.conj())
            } else {
                (*a, *b)
            };
            if seen.insert(pair_key(&ca, &cb)) {
                out.push((ca, cb));
            }
        }
    }
    out
}

/// Instantiates the atom catalog over a grid. First-order atoms are one per
/// grid pole in grid order; second-order atoms follow the pair policy.
/// Deterministic given `(grid, policy, seed)`.
pub fn build_catalog(
    grid: &PoleGrid,
    policy: PairPolicy,
    scale_alpha: f64,
    scale_beta: f64,
    seed: u64,
) -> Result<AtomCatalog> {
    if grid.is_empty() {
        return Err(Error::GridConfig("catalog requires a nonempty grid".into()));
    }
    let first_atoms: Vec<FirstOrderAtom> = grid
        .poles()
        .iter()
        .map(|&p| FirstOrderAtom::new(p, scale_alpha))
        .collect::<Result<_>>()?;

    let pairs = canonical_pairs(grid);
    let selected: Vec<(Pole, Pole)> = match policy {
        PairPolicy::AllPairs => pairs,
        PairPolicy::Sampled(m) => {
            if m > pairs.len() {
                return Err(Error::TooManyPairs {
                    requested: m,
                    available: pairs.len(),
                });
            }
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut idx: Vec<usize> = (0..pairs.len()).collect();
            for i in 0..m {
                let j = rng.random_range(i..idx.len());
                idx.swap(i, j);
            }
            let mut chosen = idx[..m].to_vec();
            chosen.sort_unstable();
            chosen.into_iter().map(|i| pairs[i]).collect()
        }
    };
    let second_atoms: Vec<SecondOrderAtom> = selected
        .into_iter()
        .map(|(p1, p2)| SecondOrderAtom::new(p1, p2, scale_beta))
        .collect::<Result<_>>()?;

    Ok(AtomCatalog {
        first_atoms,
        second_atoms,
        scale_alpha,
        scale_beta,
        pair_policy: policy,
        seed,
    })
}

/// Catalog plus memory length: the real-valued map from coefficient vectors
/// to stacked kernels.
///
/// Column layout: column 0 is the constant atom (1 in the `h0` slot). Atom
/// `j` owns the column pair `(1 + 2j, 2 + 2j)`: the first holds the stacked
/// kernel of `2·Re(a_j)`, the second of `-2·Im(a_j)`, so the real pair
/// `(u, v)` reproduces the kernel of the complex coefficient `u + iv` paired
/// with its conjugate. For atoms whose poles are all real the imaginary
/// column is identically zero and flagged inactive.
#[derive(Debug, Clone)]
pub struct Dictionary {
    catalog: AtomCatalog,
    memory: usize,
}

/// Builds a dictionary over a catalog for a given memory length.
pub fn build_dictionary(catalog: AtomCatalog, memory: usize) -> Result<Dictionary> {
    if memory == 0 {
        return Err(Error::ZeroMemory);
    }
    if catalog.n_atoms() == 0 {
        return Err(Error::GridConfig("catalog has no atoms".into()));
    }
    Ok(Dictionary { catalog, memory })
}

impl Dictionary {
    pub fn catalog(&self) -> &AtomCatalog {
        &self.catalog
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn n_atoms(&self) -> usize {
        self.catalog.n_atoms()
    }

    /// Constant column plus one `(Re, Im)` column pair per atom.
    pub fn n_cols(&self) -> usize {
        1 + 2 * self.catalog.n_atoms()
    }

    /// Coefficient groups: group 0 is the constant, group `j + 1` is atom `j`.
    pub fn n_groups(&self) -> usize {
        1 + self.catalog.n_atoms()
    }

    /// Columns of a group: the constant group has one, atoms have two.
    pub fn group_cols(&self, group: usize) -> (usize, Option<usize>) {
        if group == 0 {
            (0, None)
        } else {
            (2 * group - 1, Some(2 * group))
        }
    }

    /// Stacked kernel length `1 + L + L²`.
    pub fn stacked_len(&self) -> usize {
        1 + self.memory + self.memory * self.memory
    }

    /// False exactly for the imaginary column of an all-real-pole atom
    /// (that column is identically zero; its coefficient stays pinned at 0).
    pub fn col_active(&self, col: usize) -> bool {
        if col == 0 || (col - 1) % 2 == 0 {
            return true;
        }
        !self.catalog.atom((col - 1) / 2).is_real()
    }

    /// One dictionary column as a stacked kernel vector.
    pub fn stacked_column(&self, col: usize) -> DVector<f64> {
        let l = self.memory;
        let mut v = DVector::zeros(self.stacked_len());
        if col == 0 {
            v[0] = 1.0;
            return v;
        }
        let atom_idx = (col - 1) / 2;
        let imag_col = (col - 1) % 2 == 1;
        let weight = |z: Complex64| if imag_col { -2.0 * z.im } else { 2.0 * z.re };
        match self.catalog.atom(atom_idx) {
            AtomRef::First(a) => {
                let kernel = eval_first_order_kernel(a, l).expect("memory validated");
                for k in 0..l {
                    v[1 + k] = weight(kernel[k]);
                }
            }
            AtomRef::Second(a) => {
                let p1 = powers(a.pole1(), l);
                let p2 = powers(a.pole2(), l);
                for k1 in 0..l {
                    let row = a.scale() * p1[k1];
                    for k2 in 0..l {
                        v[1 + l + k1 * l + k2] = weight(row * p2[k2]);
                    }
                }
            }
        }
        v
    }

    /// Materialized kernel matrix, shape `(1 + L + L²) × n_cols`. Intended
    /// for small memory lengths; solvers work from output-space columns.
    pub fn kernel_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.stacked_len(), self.n_cols());
        for col in 0..self.n_cols() {
            m.set_column(col, &self.stacked_column(col));
        }
        m
    }

    /// Output responses of every dictionary column to `input` (the product
    /// of the regression matrix with the kernel matrix, computed without
    /// materializing either: first-order columns are lag sums, second-order
    /// kernels are separable so their response is a product of two lag sums).
    pub fn output_matrix(&self, input: &[f64]) -> DMatrix<f64> {
        let n = input.len();
        let l = self.memory;
        let mut m = DMatrix::zeros(n, self.n_cols());
        for t in 0..n {
            m[(t, 0)] = 1.0;
        }
        let n_first = self.catalog.first_atoms().len();
        for (j, atom) in self.catalog.first_atoms().iter().enumerate() {
            let s = lagged_exponential_sum(atom.pole(), l, input);
            for t in 0..n {
                let z = atom.scale() * s[t];
                m[(t, 1 + 2 * j)] = 2.0 * z.re;
                m[(t, 2 + 2 * j)] = -2.0 * z.im;
            }
        }
        for (j2, atom) in self.catalog.second_atoms().iter().enumerate() {
            let j = n_first + j2;
            let s1 = lagged_exponential_sum(atom.pole1(), l, input);
            let s2 = lagged_exponential_sum(atom.pole2(), l, input);
            for t in 0..n {
                let z = atom.scale() * s1[t] * s2[t];
                m[(t, 1 + 2 * j)] = 2.0 * z.re;
                m[(t, 2 + 2 * j)] = -2.0 * z.im;
            }
        }
        m
    }

    /// Real coefficient vector from a complex coefficient per atom
    /// (catalog order) plus the constant.
    pub fn real_coeffs(&self, h0: f64, coeffs: &[Complex64]) -> Result<DVector<f64>> {
        if coeffs.len() != self.n_atoms() {
            return Err(Error::CoeffLength {
                expected: self.n_atoms(),
                got: coeffs.len(),
            });
        }
        let mut w = DVector::zeros(self.n_cols());
        w[0] = h0;
        for (j, c) in coeffs.iter().enumerate() {
            w[1 + 2 * j] = c.re;
            w[2 + 2 * j] = c.im;
        }
        Ok(w)
    }

    /// Real coefficient vector reproducing `model`, which must only use
    /// atoms present in the catalog (scale ratios are folded into the
    /// coefficients).
    pub fn model_coeffs(&self, model: &AtomicModel) -> Result<DVector<f64>> {
        let mut w = DVector::zeros(self.n_cols());
        w[0] = model.h0();
        let n_first = self.catalog.first_atoms().len();
        for (atom, coeff) in model.first_order() {
            let pole = atom.pole().canonical();
            let j = self
                .catalog
                .first_atoms()
                .iter()
                .position(|a| a.pole().approx_eq(&pole, POLE_TOL))
                .ok_or(Error::AtomNotInCatalog)?;
            let c = coeff * (atom.scale() / self.catalog.first_atoms()[j].scale());
            w[1 + 2 * j] += c.re;
            w[2 + 2 * j] += c.im;
        }
        for (atom, coeff) in model.second_order() {
            let (canon, conjugated) = atom.canonical();
            let coeff = if conjugated { coeff.conj() } else { *coeff };
            let j2 = self
                .catalog
                .second_atoms()
                .iter()
                .position(|a| {
                    a.pole1().approx_eq(&canon.pole1(), POLE_TOL)
                        && a.pole2().approx_eq(&canon.pole2(), POLE_TOL)
                })
                .ok_or(Error::AtomNotInCatalog)?;
            let j = n_first + j2;
            let c = coeff * (canon.scale() / self.catalog.second_atoms()[j2].scale());
            w[1 + 2 * j] += c.re;
            w[2 + 2 * j] += c.im;
        }
        Ok(w)
    }

    /// Sparse model from a real coefficient vector. Atoms whose `|u|` and
    /// `|v|` both lie at or below `threshold` are omitted.
    pub fn complex_coeffs(&self, w: &DVector<f64>, threshold: f64) -> Result<AtomicModel> {
        if w.len() != self.n_cols() {
            return Err(Error::CoeffLength {
                expected: self.n_cols(),
                got: w.len(),
            });
        }
        let mut first_order = Vec::new();
        let mut second_order = Vec::new();
        for j in 0..self.n_atoms() {
            let (u, v) = (w[1 + 2 * j], w[2 + 2 * j]);
            if u.abs() <= threshold && v.abs() <= threshold {
                continue;
            }
            let c = Complex64::new(u, v);
            match self.catalog.atom(j) {
                AtomRef::First(a) => first_order.push((*a, c)),
                AtomRef::Second(a) => second_order.push((*a, c)),
            }
        }
        Ok(AtomicModel::new(w[0], first_order, second_order))
    }

    /// Dictionary-restricted atomic cost
    /// `|w0| + Σ_j sqrt(u_j² + v_j²)` of a real coefficient vector.
    pub fn atomic_l1_cost(&self, w: &DVector<f64>) -> f64 {
        assert_eq!(w.len(), self.n_cols(), "coefficient length mismatch");
        let mut cost = w[0].abs();
        for j in 0..self.n_atoms() {
            cost += w[1 + 2 * j].hypot(w[2 + 2 * j]);
        }
        cost
    }

    /// Indices of atoms (groups minus the constant) whose modulus exceeds
    /// `threshold_rel` times the largest atom modulus.
    pub fn active_atoms(&self, w: &DVector<f64>, threshold_rel: f64) -> Vec<usize> {
        let moduli: Vec<f64> = (0..self.n_atoms())
            .map(|j| w[1 + 2 * j].hypot(w[2 + 2 * j]))
            .collect();
        let max = moduli.iter().cloned().fold(0.0, f64::max);
        if max == 0.0 {
            return Vec::new();
        }
        (0..self.n_atoms())
            .filter(|&j| moduli[j] > threshold_rel * max)
            .collect()
    }
}

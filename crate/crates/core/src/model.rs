//! Truncated second-order Volterra systems built from exponential atoms.
//!
//! A system with memory `L` maps an input sequence `x` to
//!
//! ```text
//! y(n) = h0 + sum_{k1} h1(k1) x(n-k1)
//!           + sum_{k1,k2} h2(k1,k2) x(n-k1) x(n-k2)
//! ```
//!
//! with all lag sums over `0..L` and zero prehistory (`x(m) = 0` for `m < 0`).
//! Kernels come in two forms: a sparse [`AtomicModel`] (complex-exponential
//! atoms with complex coefficients, each implicitly paired with its
//! conjugate so the kernels are real) and the dense evaluated
//! [`VolterraKernels`]. The output is linear in the stacked kernel vector
//! `[h0; h1; vec(H2)]`, realized by [`regression_matrix`].
//!
//! Atoms are evaluated as `scale * p^k` for lags `k = 0..L-1`. The kernels
//! spanned are the same as with any other fixed power offset; anchoring the
//! exponent at the lag index keeps every atom well defined at `k = 0`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

/// Tolerance used when comparing poles for identity (deduplication, merging).
pub const POLE_TOL: f64 = 1e-12;

/// A pole strictly inside the unit circle (and away from the origin).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pole {
    re: f64,
    im: f64,
}

impl Pole {
    /// Creates a pole, rejecting moduli outside the open interval (0, 1).
    pub fn new(re: f64, im: f64) -> Result<Self> {
        let modulus = re.hypot(im);
        if !modulus.is_finite() || modulus <= 0.0 || modulus >= 1.0 {
            return Err(Error::InvalidPole { re, im, modulus });
        }
        // Normalize -0.0 so conjugation of real poles is bit-exact.
        Ok(Self {
            re: re + 0.0,
            im: im + 0.0,
        })
    }

    pub fn re(&self) -> f64 {
        self.re
    }

    pub fn im(&self) -> f64 {
        self.im
    }

    pub fn modulus(&self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn as_complex(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn conj(&self) -> Self {
        Self {
            re: self.re,
            im: -self.im + 0.0,
        }
    }

    /// Upper-half-disk representative of the conjugate pair {p, p̄}.
    pub fn canonical(&self) -> Self {
        if self.im < 0.0 {
            self.conj()
        } else {
            *self
        }
    }

    /// Whether the imaginary part is zero (the conjugate pair degenerates).
    pub fn is_real(&self) -> bool {
        self.im == 0.0
    }

    pub fn approx_eq(&self, other: &Pole, tol: f64) -> bool {
        (self.re - other.re).abs() <= tol && (self.im - other.im).abs() <= tol
    }
}

/// First-order atom `a(k) = scale * p^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderAtom {
    pole: Pole,
    scale: f64,
}

impl FirstOrderAtom {
    pub fn new(pole: Pole, scale: f64) -> Result<Self> {
        if !scale.is_finite() || scale == 0.0 {
            return Err(Error::InvalidScale(scale));
        }
        Ok(Self { pole, scale })
    }

    pub fn pole(&self) -> Pole {
        self.pole
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

/// Second-order atom `a(k1, k2) = scale * p1^k1 * p2^k2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondOrderAtom {
    pole1: Pole,
    pole2: Pole,
    scale: f64,
}

impl SecondOrderAtom {
    pub fn new(pole1: Pole, pole2: Pole, scale: f64) -> Result<Self> {
        if !scale.is_finite() || scale == 0.0 {
            return Err(Error::InvalidScale(scale));
        }
        Ok(Self {
            pole1,
            pole2,
            scale,
        })
    }

    pub fn pole1(&self) -> Pole {
        self.pole1
    }

    pub fn pole2(&self) -> Pole {
        self.pole2
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// The conjugate of `(p1, p2)` is `(p̄1, p̄2)`; exactly one member of each
    /// orbit is canonical, chosen by lexicographic order on
    /// `(Im p1, Im p2, Re p1, Re p2)`. Returns the representative and whether
    /// the atom was conjugated to reach it.
    pub fn canonical(&self) -> (Self, bool) {
        let key = (self.pole1.im, self.pole2.im, self.pole1.re, self.pole2.re);
        let conj_key = (-self.pole1.im, -self.pole2.im, self.pole1.re, self.pole2.re);
        if conj_key > key {
            (
                Self {
                    pole1: self.pole1.conj(),
                    pole2: self.pole2.conj(),
                    scale: self.scale,
                },
                true,
            )
        } else {
            (*self, false)
        }
    }

    /// Both poles real: the conjugate pair degenerates to the atom itself.
    pub fn is_real(&self) -> bool {
        self.pole1.is_real() && self.pole2.is_real()
    }
}

/// Sparse system representation: a constant offset plus exponential atoms
/// with complex coefficients. Every listed `(atom, c)` pair implicitly
/// contributes its conjugate partner `(ā, c̄)` as well, so evaluated kernels
/// are always real.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicModel {
    h0: f64,
    first_order: Vec<(FirstOrderAtom, Complex64)>,
    second_order: Vec<(SecondOrderAtom, Complex64)>,
}

impl AtomicModel {
    /// Builds a model, canonicalizing atoms to their conjugate-orbit
    /// representatives and merging entries that share a pole tuple.
    pub fn new(
        h0: f64,
        first_order: Vec<(FirstOrderAtom, Complex64)>,
        second_order: Vec<(SecondOrderAtom, Complex64)>,
    ) -> Self {
        let mut merged_first: Vec<(FirstOrderAtom, Complex64)> = Vec::new();
        for (atom, coeff) in first_order {
            let (atom, coeff) = if atom.pole.im < 0.0 {
                (
                    FirstOrderAtom {
                        pole: atom.pole.conj(),
                        scale: atom.scale,
                    },
                    coeff.conj(),
                )
            } else {
                (atom, coeff)
            };
            match merged_first
                .iter_mut()
                .find(|(a, _)| a.pole.approx_eq(&atom.pole, POLE_TOL))
            {
                // Same pole: fold the scale ratio into the coefficient.
                Some((existing, c)) => *c += coeff * (atom.scale / existing.scale),
                None => merged_first.push((atom, coeff)),
            }
        }

        let mut merged_second: Vec<(SecondOrderAtom, Complex64)> = Vec::new();
        for (atom, coeff) in second_order {
            let (atom, conjugated) = atom.canonical();
            let coeff = if conjugated { coeff.conj() } else { coeff };
            match merged_second.iter_mut().find(|(a, _)| {
                a.pole1.approx_eq(&atom.pole1, POLE_TOL) && a.pole2.approx_eq(&atom.pole2, POLE_TOL)
            }) {
                Some((existing, c)) => *c += coeff * (atom.scale / existing.scale),
                None => merged_second.push((atom, coeff)),
            }
        }

        Self {
            h0,
            first_order: merged_first,
            second_order: merged_second,
        }
    }

    /// A model with no atoms, only the constant offset.
    pub fn offset_only(h0: f64) -> Self {
        Self {
            h0,
            first_order: Vec::new(),
            second_order: Vec::new(),
        }
    }

    pub fn h0(&self) -> f64 {
        self.h0
    }

    pub fn first_order(&self) -> &[(FirstOrderAtom, Complex64)] {
        &self.first_order
    }

    pub fn second_order(&self) -> &[(SecondOrderAtom, Complex64)] {
        &self.second_order
    }

    /// First- plus second-order atom count (the constant is not an atom).
    pub fn n_atoms(&self) -> usize {
        self.first_order.len() + self.second_order.len()
    }

    /// Total coefficient magnitude `|h0| + sum |c_i|`, the atomic cost of
    /// this particular decomposition.
    pub fn atomic_cost(&self) -> f64 {
        self.h0.abs()
            + self
                .first_order
                .iter()
                .map(|(_, c)| c.norm())
                .sum::<f64>()
            + self
                .second_order
                .iter()
                .map(|(_, c)| c.norm())
                .sum::<f64>()
    }

    /// Largest pole modulus over all atoms, if any atom exists.
    pub fn max_pole_modulus(&self) -> Option<f64> {
        self.first_order
            .iter()
            .map(|(a, _)| a.pole.modulus())
            .chain(
                self.second_order
                    .iter()
                    .flat_map(|(a, _)| [a.pole1.modulus(), a.pole2.modulus()]),
            )
            .fold(None, |acc: Option<f64>, m| Some(acc.map_or(m, |a| a.max(m))))
    }

    /// All distinct canonical (upper-half) poles appearing in the model.
    pub fn distinct_poles(&self) -> Vec<Pole> {
        let mut poles: Vec<Pole> = Vec::new();
        let mut push = |p: Pole| {
            let p = p.canonical();
            if !poles.iter().any(|q| q.approx_eq(&p, 1e-9)) {
                poles.push(p);
            }
        };
        for (a, _) in &self.first_order {
            push(a.pole);
        }
        for (a, _) in &self.second_order {
            push(a.pole1);
            push(a.pole2);
        }
        poles
    }
}

/// Dense evaluated kernels of a system with memory `L = h1.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolterraKernels {
    h0: f64,
    h1: DVector<f64>,
    h2: DMatrix<f64>,
}

impl VolterraKernels {
    pub fn new(h0: f64, h1: DVector<f64>, h2: DMatrix<f64>) -> Result<Self> {
        let l = h1.len();
        if l == 0 {
            return Err(Error::ZeroMemory);
        }
        if h2.nrows() != l || h2.ncols() != l {
            return Err(Error::DimensionMismatch(format!(
                "h2 is {}x{}, expected {}x{}",
                h2.nrows(),
                h2.ncols(),
                l,
                l
            )));
        }
        if !h0.is_finite() || h1.iter().any(|v| !v.is_finite()) || h2.iter().any(|v| !v.is_finite())
        {
            return Err(Error::DimensionMismatch(
                "kernel entries must be finite".into(),
            ));
        }
        Ok(Self { h0, h1, h2 })
    }

    pub fn h0(&self) -> f64 {
        self.h0
    }

    pub fn h1(&self) -> &DVector<f64> {
        &self.h1
    }

    pub fn h2(&self) -> &DMatrix<f64> {
        &self.h2
    }

    pub fn memory(&self) -> usize {
        self.h1.len()
    }
}

/// Regression matrix with rows `[1, x1ᵀ(n), x1ᵀ(n) ⊗ x1ᵀ(n)]` where
/// `x1(n) = [x(n), x(n-1), ..., x(n-L+1)]` with zero prehistory.
#[derive(Debug, Clone)]
pub struct RegressionMatrix {
    entries: DMatrix<f64>,
    memory: usize,
}

impl RegressionMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn n_samples(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.entries.ncols()
    }

    /// Copy of the rows where `mask` is true.
    pub fn observed(&self, mask: &[bool]) -> Result<DMatrix<f64>> {
        if mask.len() != self.n_samples() {
            return Err(Error::DimensionMismatch(format!(
                "mask length {} vs {} rows",
                mask.len(),
                self.n_samples()
            )));
        }
        let rows: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
        if rows.is_empty() {
            return Err(Error::EmptyObservationSet);
        }
        Ok(self.entries.select_rows(rows.iter()))
    }
}

/// Powers `p^0 .. p^{L-1}` by repeated multiplication.
pub(crate) fn powers(pole: Pole, memory: usize) -> Vec<Complex64> {
    let p = pole.as_complex();
    let mut out = Vec::with_capacity(memory);
    let mut acc = Complex64::new(1.0, 0.0);
    for _ in 0..memory {
        out.push(acc);
        acc *= p;
    }
    out
}

/// Evaluates a first-order atom over lags `0..L`: element `k` is `scale * p^k`.
pub fn eval_first_order_kernel(atom: &FirstOrderAtom, memory: usize) -> Result<Vec<Complex64>> {
    if memory == 0 {
        return Err(Error::ZeroMemory);
    }
    Ok(powers(atom.pole(), memory)
        .into_iter()
        .map(|p| atom.scale() * p)
        .collect())
}

/// Evaluates a second-order atom over the lag square:
/// entry `(k1, k2)` is `scale * p1^k1 * p2^k2`.
pub fn eval_second_order_kernel(atom: &SecondOrderAtom, memory: usize) -> Result<DMatrix<Complex64>> {
    if memory == 0 {
        return Err(Error::ZeroMemory);
    }
    let p1 = powers(atom.pole1(), memory);
    let p2 = powers(atom.pole2(), memory);
    Ok(DMatrix::from_fn(memory, memory, |k1, k2| {
        atom.scale() * p1[k1] * p2[k2]
    }))
}

/// Evaluates the dense kernels of a model: each atom contributes
/// `2 Re(c * a)` (the atom plus its implicit conjugate partner), so the
/// output is real with no imaginary residue to discard.
pub fn eval_kernels(model: &AtomicModel, memory: usize) -> Result<VolterraKernels> {
    if memory == 0 {
        return Err(Error::ZeroMemory);
    }
    let l = memory;
    let mut h1 = DVector::zeros(l);
    for (atom, coeff) in model.first_order() {
        let a = eval_first_order_kernel(atom, l)?;
        for k in 0..l {
            h1[k] += 2.0 * (coeff * a[k]).re;
        }
    }
    let mut h2 = DMatrix::zeros(l, l);
    for (atom, coeff) in model.second_order() {
        let p1 = powers(atom.pole1(), l);
        let p2 = powers(atom.pole2(), l);
        for k1 in 0..l {
            let row = coeff * atom.scale() * p1[k1];
            for k2 in 0..l {
                h2[(k1, k2)] += 2.0 * (row * p2[k2]).re;
            }
        }
    }
    VolterraKernels::new(model.h0(), h1, h2)
}

/// Simulates the time-domain response to `input` with zero prehistory.
pub fn simulate(kernels: &VolterraKernels, input: &[f64]) -> Vec<f64> {
    let l = kernels.memory();
    let n = input.len();
    let mut output = vec![0.0; n];
    for t in 0..n {
        let span = l.min(t + 1);
        let mut acc = kernels.h0();
        for k1 in 0..span {
            acc += kernels.h1()[k1] * input[t - k1];
        }
        for k1 in 0..span {
            let x1 = input[t - k1];
            for k2 in 0..span {
                acc += kernels.h2()[(k1, k2)] * x1 * input[t - k2];
            }
        }
        output[t] = acc;
    }
    output
}

/// Builds the regression matrix of shape `N × (1 + L + L²)`; column order
/// matches [`stack`], so `simulate(kernels, x) = X · stack(kernels)`.
pub fn regression_matrix(input: &[f64], memory: usize) -> Result<RegressionMatrix> {
    if memory == 0 {
        return Err(Error::ZeroMemory);
    }
    if input.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = input.len();
    let l = memory;
    let mut entries = DMatrix::zeros(n, 1 + l + l * l);
    for t in 0..n {
        entries[(t, 0)] = 1.0;
        for k in 0..l {
            entries[(t, 1 + k)] = if t >= k { input[t - k] } else { 0.0 };
        }
        for k1 in 0..l {
            let x1 = entries[(t, 1 + k1)];
            for k2 in 0..l {
                entries[(t, 1 + l + k1 * l + k2)] = x1 * entries[(t, 1 + k2)];
            }
        }
    }
    Ok(RegressionMatrix { entries, memory })
}

/// Stacks kernels as `[h0; h1; vec(H2)]` with `vec` row-major over
/// `(k1, k2)`, `k1` outer — the Kronecker column order of the regression
/// matrix.
pub fn stack(kernels: &VolterraKernels) -> DVector<f64> {
    let l = kernels.memory();
    let mut v = DVector::zeros(1 + l + l * l);
    v[0] = kernels.h0();
    for k in 0..l {
        v[1 + k] = kernels.h1()[k];
    }
    for k1 in 0..l {
        for k2 in 0..l {
            v[1 + l + k1 * l + k2] = kernels.h2()[(k1, k2)];
        }
    }
    v
}

/// Inverse of [`stack`].
pub fn unstack(stacked: &DVector<f64>, memory: usize) -> Result<VolterraKernels> {
    let l = memory;
    if stacked.len() != 1 + l + l * l {
        return Err(Error::DimensionMismatch(format!(
            "stacked length {} vs expected {}",
            stacked.len(),
            1 + l + l * l
        )));
    }
    let h0 = stacked[0];
    let h1 = DVector::from_fn(l, |k, _| stacked[1 + k]);
    let h2 = DMatrix::from_fn(l, l, |k1, k2| stacked[1 + l + k1 * l + k2]);
    VolterraKernels::new(h0, h1, h2)
}

/// Memory length from the kernel decay rule: the smallest `L` with
/// `rho^L < decay_tol`, where `rho` is the largest pole modulus involved.
pub fn auto_memory(max_pole_modulus: f64, decay_tol: f64) -> Result<usize> {
    if !(max_pole_modulus > 0.0 && max_pole_modulus < 1.0) {
        return Err(Error::InvalidPole {
            re: max_pole_modulus,
            im: 0.0,
            modulus: max_pole_modulus,
        });
    }
    if !(decay_tol > 0.0 && decay_tol < 1.0) {
        return Err(Error::GridConfig(format!(
            "decay tolerance must be in (0, 1), got {decay_tol}"
        )));
    }
    let l = (decay_tol.ln() / max_pole_modulus.ln()).floor() as usize + 1;
    Ok(l.max(1))
}

/// Complex lag sums `s(t) = sum_{k=0}^{min(t, L-1)} p^k x(t-k)` for every
/// sample. A first-order atom's output contribution is `2 Re(c·scale·s)`;
/// a second-order atom's is `2 Re(c·scale·s1·s2)` since its kernel is
/// separable across the two lags.
pub(crate) fn lagged_exponential_sum(pole: Pole, memory: usize, input: &[f64]) -> Vec<Complex64> {
    let pw = powers(pole, memory);
    let n = input.len();
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        let span = memory.min(t + 1);
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..span {
            acc += pw[k] * input[t - k];
        }
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn pole(re: f64, im: f64) -> Pole {
        Pole::new(re, im).unwrap()
    }

    fn first(re: f64, im: f64, scale: f64) -> FirstOrderAtom {
        FirstOrderAtom::new(pole(re, im), scale).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Independent per-element power evaluation (polar form, not repeated
    /// multiplication).
    fn power_oracle(p: Pole, k: usize) -> Complex64 {
        Complex64::from_polar(p.modulus().powi(k as i32), p.im().atan2(p.re()) * k as f64)
    }

    fn random_model(rng: &mut ChaCha12Rng, n_first: usize, n_second: usize) -> AtomicModel {
        let mut rand_pole = |rng: &mut ChaCha12Rng| loop {
            let re = rng.random_range(-0.9..0.9);
            let im = rng.random_range(-0.9..0.9);
            if let Ok(p) = Pole::new(re, im) {
                if p.modulus() < 0.9 && p.modulus() > 0.05 {
                    return p;
                }
            }
        };
        let first_order = (0..n_first)
            .map(|_| {
                let atom = FirstOrderAtom::new(rand_pole(rng), 1.0).unwrap();
                (atom, c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
            })
            .collect();
        let second_order = (0..n_second)
            .map(|_| {
                let atom = SecondOrderAtom::new(rand_pole(rng), rand_pole(rng), 1.0).unwrap();
                (atom, c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
            })
            .collect();
        AtomicModel::new(rng.random_range(-1.0..1.0), first_order, second_order)
    }

    #[test]
    fn pole_rejects_outside_annulus() {
        assert!(Pole::new(1.0, 0.0).is_err());
        assert!(Pole::new(0.8, 0.8).is_err());
        assert!(Pole::new(0.0, 0.0).is_err());
        assert!(Pole::new(f64::NAN, 0.0).is_err());
        assert!(Pole::new(0.999, 0.0).is_ok());
    }

    #[test]
    fn atom_rejects_bad_scale() {
        let p = pole(0.5, 0.0);
        assert!(FirstOrderAtom::new(p, 0.0).is_err());
        assert!(FirstOrderAtom::new(p, f64::INFINITY).is_err());
        assert!(SecondOrderAtom::new(p, p, 0.0).is_err());
    }

    #[test]
    fn first_order_kernel_real_pole() {
        let a = first(0.5, 0.0, 1.0);
        let k = eval_first_order_kernel(&a, 3).unwrap();
        assert_eq!(k, vec![c(1.0, 0.0), c(0.5, 0.0), c(0.25, 0.0)]);
    }

    #[test]
    fn first_order_kernel_imaginary_pole() {
        let a = first(0.0, 0.5, 1.0);
        let k = eval_first_order_kernel(&a, 3).unwrap();
        assert_eq!(k, vec![c(1.0, 0.0), c(0.0, 0.5), c(-0.25, 0.0)]);
    }

    #[test]
    fn first_order_kernel_matches_power_oracle() {
        // Pole taken from the first benchmark system.
        let p = pole(0.7844, 0.0577);
        let a = FirstOrderAtom::new(p, 1.0).unwrap();
        let k = eval_first_order_kernel(&a, 10).unwrap();
        for (i, v) in k.iter().enumerate() {
            let expected = power_oracle(p, i);
            assert!((v - expected).norm() < 1e-12, "lag {i}: {v} vs {expected}");
        }
    }

    #[test]
    fn first_order_kernel_rejects_zero_memory() {
        let a = first(0.5, 0.0, 1.0);
        assert!(matches!(
            eval_first_order_kernel(&a, 0),
            Err(Error::ZeroMemory)
        ));
    }

    #[test]
    fn eval_kernels_empty_model() {
        let k = eval_kernels(&AtomicModel::offset_only(3.0), 2).unwrap();
        assert_eq!(k.h0(), 3.0);
        assert!(k.h1().iter().all(|&v| v == 0.0));
        assert!(k.h2().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn eval_kernels_single_real_atom() {
        let m = AtomicModel::new(0.0, vec![(first(0.5, 0.0, 1.0), c(1.0, 0.0))], vec![]);
        let k = eval_kernels(&m, 2).unwrap();
        assert_eq!(k.h1().as_slice(), &[2.0, 1.0]);
    }

    /// Direct-summation oracle: evaluates `c·a + c̄·ā` per element with
    /// independently computed powers, rather than `2 Re(c·a)`.
    fn kernels_oracle(model: &AtomicModel, l: usize) -> (DVector<f64>, DMatrix<f64>, f64) {
        let mut h1 = DVector::zeros(l);
        let mut max_imag: f64 = 0.0;
        for (atom, coeff) in model.first_order() {
            for k in 0..l {
                let a = atom.scale() * power_oracle(atom.pole(), k);
                let v = coeff * a + coeff.conj() * a.conj();
                h1[k] += v.re;
                max_imag = max_imag.max(v.im.abs());
            }
        }
        let mut h2 = DMatrix::zeros(l, l);
        for (atom, coeff) in model.second_order() {
            for k1 in 0..l {
                for k2 in 0..l {
                    let a = atom.scale()
                        * power_oracle(atom.pole1(), k1)
                        * power_oracle(atom.pole2(), k2);
                    let v = coeff * a + coeff.conj() * a.conj();
                    h2[(k1, k2)] += v.re;
                    max_imag = max_imag.max(v.im.abs());
                }
            }
        }
        (h1, h2, max_imag)
    }

    #[test]
    fn eval_kernels_matches_conjugate_sum_oracle() {
        let model = crate::presets::example1().model;
        let l = 20;
        let k = eval_kernels(&model, l).unwrap();
        let (h1, h2, max_imag) = kernels_oracle(&model, l);
        assert!(max_imag < 1e-12, "conjugate pairing must cancel exactly");
        for i in 0..l {
            assert!((k.h1()[i] - h1[i]).abs() < 1e-12);
        }
        for k1 in 0..l {
            for k2 in 0..l {
                assert!((k.h2()[(k1, k2)] - h2[(k1, k2)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn realness_for_random_models() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..20 {
            let model = random_model(&mut rng, 3, 2);
            let l = 6;
            let k = eval_kernels(&model, l).unwrap();
            let (h1, h2, max_imag) = kernels_oracle(&model, l);
            assert!(max_imag < 1e-12);
            for i in 0..l {
                assert!((k.h1()[i] - h1[i]).abs() < 1e-12);
            }
            for k1 in 0..l {
                for k2 in 0..l {
                    assert!((k.h2()[(k1, k2)] - h2[(k1, k2)]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn duplicate_atoms_merge_by_coefficient_addition() {
        let a = first(0.5, 0.2, 1.0);
        let m = AtomicModel::new(0.0, vec![(a, c(1.0, 0.5)), (a, c(0.25, -0.25))], vec![]);
        assert_eq!(m.first_order().len(), 1);
        assert_eq!(m.first_order()[0].1, c(1.25, 0.25));
    }

    #[test]
    fn lower_half_atom_canonicalizes_to_conjugate() {
        // (a, c) and (ā, c̄) describe the same real kernel, so listing the
        // lower-half pole must merge with the upper-half entry.
        let up = first(0.5, 0.2, 1.0);
        let down = first(0.5, -0.2, 1.0);
        let m = AtomicModel::new(0.0, vec![(up, c(1.0, 0.5)), (down, c(1.0, -0.5))], vec![]);
        assert_eq!(m.first_order().len(), 1);
        assert_eq!(m.first_order()[0].1, c(2.0, 1.0));
    }

    #[test]
    fn second_order_orbit_representative() {
        let a = SecondOrderAtom::new(pole(0.4978, -0.4239), pole(-0.7062, 0.5511), 1.0).unwrap();
        let (canon, conjugated) = a.canonical();
        assert!(conjugated);
        assert_eq!(canon.pole1().im(), 0.4239);
        assert_eq!(canon.pole2().im(), -0.5511);
        // Canonicalizing twice is a no-op.
        let (again, changed) = canon.canonical();
        assert!(!changed);
        assert_eq!(again, canon);
    }

    #[test]
    fn simulate_zero_input_keeps_offset() {
        let k = eval_kernels(&AtomicModel::offset_only(1.5), 3).unwrap();
        let y = simulate(&k, &[0.0; 5]);
        assert_eq!(y, vec![1.5; 5]);
    }

    #[test]
    fn simulate_unit_impulse_reads_kernel_diagonal() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let model = random_model(&mut rng, 2, 2);
        let l = 5;
        let mut kernels = eval_kernels(&model, l).unwrap();
        kernels.h0 = 0.0;
        let mut input = vec![0.0; l];
        input[0] = 1.0;
        let y = simulate(&kernels, &input);
        for n in 0..l {
            let expected = kernels.h1()[n] + kernels.h2()[(n, n)];
            assert!((y[n] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn simulate_matches_regression_matrix_route() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let model = crate::presets::example1().model;
        let l = 12;
        let kernels = eval_kernels(&model, l).unwrap();
        let input: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let direct = simulate(&kernels, &input);
        let x = regression_matrix(&input, l).unwrap();
        let via_matrix = x.entries() * stack(&kernels);
        for t in 0..input.len() {
            assert!((direct[t] - via_matrix[t]).abs() < 1e-10);
        }
    }

    #[test]
    fn regression_matrix_scalar_memory() {
        let x = regression_matrix(&[2.0], 1).unwrap();
        assert_eq!(x.entries().as_slice(), &[1.0, 2.0, 4.0]);
    }

    #[test]
    fn regression_matrix_hand_expansion() {
        let x = regression_matrix(&[1.0, 3.0], 2).unwrap();
        let expected_row0 = [1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let expected_row1 = [1.0, 3.0, 1.0, 9.0, 3.0, 3.0, 1.0];
        for j in 0..7 {
            assert_eq!(x.entries()[(0, j)], expected_row0[j]);
            assert_eq!(x.entries()[(1, j)], expected_row1[j]);
        }
    }

    #[test]
    fn regression_matrix_property_against_simulation() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        for _ in 0..100 {
            let l = rng.random_range(1..=6);
            let n = rng.random_range(1..=50);
            let model = random_model(&mut rng, 2, 1);
            let kernels = eval_kernels(&model, l).unwrap();
            let input: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x = regression_matrix(&input, l).unwrap();
            assert_eq!(x.n_cols(), 1 + l + l * l);
            let via = x.entries() * stack(&kernels);
            let direct = simulate(&kernels, &input);
            for t in 0..n {
                assert!((via[t] - direct[t]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn stack_tiny_example() {
        let k = VolterraKernels::new(
            1.0,
            DVector::from_vec(vec![2.0]),
            DMatrix::from_vec(1, 1, vec![3.0]),
        )
        .unwrap();
        assert_eq!(stack(&k).as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn stack_unstack_round_trip() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..10 {
            let l = rng.random_range(1..=5);
            let model = random_model(&mut rng, 2, 2);
            let k = eval_kernels(&model, l).unwrap();
            let back = unstack(&stack(&k), l).unwrap();
            assert_eq!(k, back);
        }
    }

    #[test]
    fn stack_ordering_matches_kronecker_columns() {
        // H2(0,1) must land on the column multiplying x(n)·x(n-1): probe
        // both routes with an input pair and compare.
        let l = 2;
        let mut h2 = DMatrix::zeros(l, l);
        h2[(0, 1)] = 1.0;
        let k = VolterraKernels::new(0.0, DVector::zeros(l), h2).unwrap();
        let input = vec![2.0, 5.0];
        let y = simulate(&k, &input);
        // y(1) = H2(0,1)·x(1)·x(0) = 10
        assert_eq!(y, vec![0.0, 10.0]);
        let stacked = stack(&k);
        let idx = 1 + l + 1; // row-major slot for (k1, k2) = (0, 1)
        assert_eq!(stacked[idx], 1.0);
        let x = regression_matrix(&input, l).unwrap();
        assert_eq!(x.entries()[(1, idx)], input[1] * input[0]);
        let via = x.entries() * stacked;
        assert_eq!(via[1], 10.0);
    }

    #[test]
    fn single_atom_kernel_decay_bound() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..20 {
            let model = random_model(&mut rng, 1, 0);
            let (atom, coeff) = model.first_order()[0];
            let l = 30;
            let k = eval_kernels(&AtomicModel::new(0.0, vec![(atom, coeff)], vec![]), l).unwrap();
            let rho = atom.pole().modulus();
            for i in 0..l {
                let bound = 2.0 * coeff.norm() * atom.scale().abs() * rho.powi(i as i32);
                assert!(k.h1()[i].abs() <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn auto_memory_decay_rule() {
        let l = auto_memory(0.5, 1e-6).unwrap();
        // 0.5^19 = 1.9e-6, 0.5^20 = 9.5e-7
        assert_eq!(l, 20);
        assert!(0.5f64.powi(l as i32) < 1e-6);
        assert!(0.5f64.powi(l as i32 - 1) >= 1e-6);
        assert!(auto_memory(1.0, 1e-6).is_err());
        assert!(auto_memory(0.5, 2.0).is_err());
    }

    #[test]
    fn lagged_sum_matches_bruteforce() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let p = pole(0.3, 0.6);
        let input: Vec<f64> = (0..25).map(|_| rng.random_range(-1.0..1.0)).collect();
        let l = 8;
        let s = lagged_exponential_sum(p, l, &input);
        for t in 0..input.len() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..l.min(t + 1) {
                acc += power_oracle(p, k) * input[t - k];
            }
            assert!((s[t] - acc).norm() < 1e-12);
        }
    }
}

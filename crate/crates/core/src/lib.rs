//! Parsimonious identification of second-order Volterra systems whose
//! kernels are sparse sums of damped complex-exponential atoms.
//!
//! The library is organized around a small pipeline:
//!
//! - [`model`] — truncated second-order Volterra systems: kernel evaluation
//!   from exponential atoms, time-domain simulation, and the structured
//!   regression matrix that makes the output linear in the stacked kernels.
//! - [`atoms`] — pole grids inside the unit circle, atom catalogs over them,
//!   and the real-valued dictionary that maps real coefficient pairs to
//!   stacked kernels (conjugate pairing keeps everything real).
//! - [`solvers`] — the three identification routes: exact cardinality
//!   minimization by branch-and-bound, an atomic-cost relaxation solved by a
//!   proximal-gradient path with bisection on the penalty, and randomized
//!   Frank-Wolfe over the atomic-cost ball, plus support extraction with
//!   least-squares refitting.
//! - [`data`] — dataset construction, bounded uniform noise, observation
//!   masks, error metrics, and the CSV/JSON file formats.
//! - [`presets`] — the two built-in benchmark systems used by the CLI.

pub mod atoms;
pub mod data;
pub mod model;
pub mod presets;
pub mod solvers;

mod error;

pub use error::{Error, Result};

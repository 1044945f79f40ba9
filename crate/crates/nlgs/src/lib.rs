//! Ground states of the mass-constrained nonlocal Schrodinger problem
//!
//! ```text
//! -Δu + (V - ω)u + (K_{a,b} * u²)u = 0,   ‖u‖² = μ,
//! K_{a,b}(x) = (1/|x|)((4/3)e^{-b|x|} - (1/3)e^{-a|x|} - 1),
//! ```
//!
//! on a cubic grid with spectral derivatives and free-space (zero-padded)
//! convolution, together with the checks used to validate the solver:
//! rescaling identities, convolution inequalities, kernel geometry and
//! parameter limits.

// `!(x > 0.0)` is used throughout to reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convolution;
pub mod error;
pub mod experiments;
pub mod fft;
pub mod functionals;
pub mod grid;
pub mod kernel;
pub mod par;
pub mod physics;
pub mod potentials;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{Field, Grid3};
pub use kernel::{KernelParams, Screening};

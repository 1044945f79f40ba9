//! Scripted checks of the theorem-level claims: parameter limits,
//! convolution inequalities, perturbation stability, scaling identities and
//! the kernel atlas.

pub mod asymptotic;
pub mod atlas;
pub mod inequalities;
pub mod perturbation;
pub mod report;
pub mod rescaling;

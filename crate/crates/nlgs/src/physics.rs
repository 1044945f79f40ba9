//! Conversion between the physical Schrodinger-Newton form with
//! fourth-order gravity corrections and the dimensionless problem.
//!
//! The couplings α, β of the curvature-squared terms fix the screening
//! masses a = 1/√(-4(α+3β)) and b = 1/√(2α); the frequency and amplitude
//! scale as ω = 2mω̃/ħ² and u = (√(2Gm³)/ħ)v.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{KernelParams, Screening};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhysicalParams {
    pub m: f64,
    pub hbar: f64,
    pub g: f64,
    /// Physical frequency ω̃.
    pub omega_tilde: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Screening masses from the gravity couplings. Requires α ≥ 0 and α + 3β ≤ 0.
pub fn graviton_masses(alpha: f64, beta: f64) -> Result<KernelParams> {
    if !(alpha.is_finite() && beta.is_finite()) {
        return Err(Error::InvalidCouplings(format!(
            "couplings must be finite, got ({alpha}, {beta})"
        )));
    }
    if alpha < 0.0 {
        return Err(Error::InvalidCouplings(format!(
            "alpha must be >= 0, got {alpha}"
        )));
    }
    let s = alpha + 3.0 * beta;
    if s > 0.0 {
        return Err(Error::InvalidCouplings(format!(
            "alpha + 3 beta must be <= 0, got {s}"
        )));
    }
    let a = if s == 0.0 {
        Screening::Infinite
    } else {
        Screening::new(1.0 / (-4.0 * s).sqrt())?
    };
    let b = if alpha == 0.0 {
        Screening::Infinite
    } else {
        Screening::new(1.0 / (2.0 * alpha).sqrt())?
    };
    Ok(KernelParams { a, b })
}

/// Dimensionless frequency and amplitude scale of a physical setup.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Dimensionless {
    pub omega: f64,
    /// u = field_scale · v
    pub field_scale: f64,
}

fn check_constants(m: f64, hbar: f64, g: f64) -> Result<()> {
    if m > 0.0 && hbar > 0.0 && g > 0.0 && m.is_finite() && hbar.is_finite() && g.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "m, hbar and G must be positive, got ({m}, {hbar}, {g})"
        )))
    }
}

pub fn to_dimensionless(p: &PhysicalParams) -> Result<Dimensionless> {
    check_constants(p.m, p.hbar, p.g)?;
    Ok(Dimensionless {
        omega: 2.0 * p.m * p.omega_tilde / (p.hbar * p.hbar),
        field_scale: (2.0 * p.g * p.m.powi(3)).sqrt() / p.hbar,
    })
}

/// Physical frequency ω̃ = ħ²ω/(2m) and the inverse amplitude factor.
pub fn from_dimensionless(d: &Dimensionless, m: f64, hbar: f64, g: f64) -> Result<(f64, f64)> {
    check_constants(m, hbar, g)?;
    let omega_tilde = hbar * hbar * d.omega / (2.0 * m);
    let inverse_scale = hbar / (2.0 * g * m.powi(3)).sqrt();
    Ok((omega_tilde, inverse_scale))
}

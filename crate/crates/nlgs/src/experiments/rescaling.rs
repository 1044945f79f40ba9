//! The scaling identities of u_θ(x) = θ³u(θ²x):
//!
//! ```text
//! ‖u_θ‖² = ‖u‖²,  A(u_θ) = θ⁴A(u),  K_{a,b}(u_θ) = θ²K_{a/θ², b/θ²}(u).
//! ```

use serde::Serialize;

use crate::error::Result;
use crate::functionals::{k_ab, rescale};
use crate::grid::{dirichlet_energy, Grid3};
use crate::kernel::KernelParams;
use crate::solver::gaussian;

pub const MASS_TOL: f64 = 1e-10;
pub const KINETIC_TOL: f64 = 1e-8;
pub const NONLOCAL_TOL: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RescalingCheck {
    pub theta: f64,
    /// Relative errors of the three identities; one nonlocal entry per kernel.
    pub mass_rel: f64,
    pub kinetic_rel: f64,
    pub nonlocal_rel: Vec<(KernelParams, f64)>,
}

impl RescalingCheck {
    pub fn passed(&self) -> bool {
        self.mass_rel <= MASS_TOL
            && self.kinetic_rel <= KINETIC_TOL
            && self.nonlocal_rel.iter().all(|x| x.1 <= NONLOCAL_TOL)
    }
}

pub fn default_kernels() -> Vec<KernelParams> {
    [(1.0, 1.0), (1.0, f64::INFINITY), (0.0, 2.0)]
        .into_iter()
        .map(|(a, b)| KernelParams::new(a, b).expect("valid kernel"))
        .collect()
}

fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs()
}

/// Check the identities for a unit-width Gaussian on `grid`.
pub fn rescaling_checks(
    grid: &Grid3,
    thetas: &[f64],
    kernels: &[KernelParams],
) -> Result<Vec<RescalingCheck>> {
    let u = gaussian(grid, 1.0);
    let l = grid.diagonal();
    let a = dirichlet_energy(&u);
    thetas
        .iter()
        .map(|&theta| {
            let v = rescale(&u, theta)?;
            let t2 = theta * theta;
            let nonlocal_rel = kernels
                .iter()
                .map(|&p| {
                    let lhs = k_ab(&v, p, l)?.value;
                    let rhs = t2 * k_ab(&u, p.scaled(1.0 / t2), l)?.value;
                    Ok((p, rel(lhs, rhs)))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(RescalingCheck {
                theta,
                mass_rel: rel(v.mass(), u.mass()),
                kinetic_rel: rel(dirichlet_energy(&v), t2 * t2 * a),
                nonlocal_rel,
            })
        })
        .collect()
}

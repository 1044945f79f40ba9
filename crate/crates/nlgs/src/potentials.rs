//! External potentials V = Σ q_k/|x - x_k|^{α_k} + V_bounded with 0 < α_k < 2.
//!
//! Singular terms are sampled in one of two ways:
//!
//! * [`Regularization::BandLimited`] (default) splits r^{-α} into a smooth
//!   long-range part r^{-α}P(α/2, r²/σ²), sampled pointwise, and a short-range
//!   remainder whose analytic Fourier transform is summed up to the grid's
//!   Nyquist frequency. The sampled potential is the band-limited projection
//!   of the singular one, so h³Σ V u² converges spectrally for resolved u.
//! * [`Regularization::HalfCell`] replaces |x - x₀| by max(|x - x₀|, h/2).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_lr};

use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::grid::{Field, Grid3};
use crate::kernel::KernelParams;
use crate::par;
use crate::solver::{minimize, SolverConfig};

/// q/|x - center|^alpha.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerTerm {
    pub q: f64,
    pub alpha: f64,
    pub center: [f64; 3],
}

/// A bounded, compactly supported part of V.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum BoundedPart {
    /// Constant `level` on the whole computational box.
    Plateau { level: f64 },
    /// level·exp(1 - 1/(1 - (r/radius)²)) for r < radius, zero outside.
    Bump {
        level: f64,
        center: [f64; 3],
        radius: f64,
    },
}

impl BoundedPart {
    pub fn sup_norm(&self) -> f64 {
        match self {
            BoundedPart::Plateau { level } | BoundedPart::Bump { level, .. } => level.abs(),
        }
    }

    pub fn value(&self, x: [f64; 3]) -> f64 {
        match *self {
            BoundedPart::Plateau { level } => level,
            BoundedPart::Bump {
                level,
                center,
                radius,
            } => {
                let t = dist2(x, center) / (radius * radius);
                if t < 1.0 {
                    level * (1.0 - 1.0 / (1.0 - t)).exp()
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub terms: Vec<PowerTerm>,
    pub bounded: Option<BoundedPart>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularization {
    #[default]
    BandLimited,
    HalfCell,
}

fn dist2(x: [f64; 3], c: [f64; 3]) -> f64 {
    (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2)
}

impl PotentialSpec {
    /// Single Coulomb-like term q/|x - center|.
    pub fn coulomb(q: f64, center: [f64; 3]) -> Self {
        PotentialSpec {
            terms: vec![PowerTerm {
                q,
                alpha: 1.0,
                center,
            }],
            bounded: None,
        }
    }

    pub fn with_bounded(mut self, part: BoundedPart) -> Self {
        self.bounded = Some(part);
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.q == 0.0) && self.bounded.map_or(true, |b| b.sup_norm() == 0.0)
    }

    /// True when every term is ≤ 0 everywhere.
    pub fn is_nonpositive(&self) -> bool {
        self.terms.iter().all(|t| t.q <= 0.0)
            && self.bounded.map_or(true, |b| match b {
                BoundedPart::Plateau { level } | BoundedPart::Bump { level, .. } => level <= 0.0,
            })
    }

    pub fn validate(&self, grid: Option<&Grid3>) -> Result<()> {
        for t in &self.terms {
            if !(t.alpha > 0.0 && t.alpha < 2.0) {
                return Err(Error::InvalidPotential(format!(
                    "exponent alpha must lie in (0, 2), got {}",
                    t.alpha
                )));
            }
            if !t.q.is_finite() || t.center.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidPotential(
                    "non-finite strength or center".into(),
                ));
            }
            if let Some(g) = grid {
                let half = 0.5 * g.box_length();
                if t.center.iter().any(|&c| c < -half || c >= half) {
                    return Err(Error::InvalidPotential(format!(
                        "center {:?} outside the box",
                        t.center
                    )));
                }
            }
        }
        if let Some(BoundedPart::Bump { radius, .. }) = self.bounded {
            if !(radius > 0.0) {
                return Err(Error::InvalidPotential(format!(
                    "bump radius must be positive, got {radius}"
                )));
            }
        }
        if let Some(b) = self.bounded {
            if !b.sup_norm().is_finite() {
                return Err(Error::InvalidPotential("bounded part is not finite".into()));
            }
        }
        Ok(())
    }
}

/// Sample V on the grid with the default regularization.
pub fn sample_potential(spec: &PotentialSpec, grid: &Grid3) -> Result<Field> {
    sample_potential_with(spec, grid, Regularization::default())
}

pub fn sample_potential_with(
    spec: &PotentialSpec,
    grid: &Grid3,
    reg: Regularization,
) -> Result<Field> {
    spec.validate(Some(grid))?;
    let mut v = vec![0.0; grid.len()];
    for t in &spec.terms {
        let part = match reg {
            Regularization::HalfCell => half_cell_term(t, grid),
            Regularization::BandLimited => band_limited_term(t, grid),
        };
        v.iter_mut().zip(part).for_each(|(a, b)| *a += b);
    }
    if let Some(b) = spec.bounded {
        v.iter_mut()
            .enumerate()
            .for_each(|(i, a)| *a += b.value(grid.position(i)));
    }
    Field::new(*grid, v)
}

fn half_cell_term(t: &PowerTerm, grid: &Grid3) -> Vec<f64> {
    let floor = 0.5 * grid.spacing();
    par::map(grid.len(), |i| {
        let r = dist2(grid.position(i), t.center).sqrt().max(floor);
        t.q / r.powf(t.alpha)
    })
}

/// Splitting width of the band-limited sampling, in cells. The long-range
/// part's spectrum is ~e^{-(πσ/2h)²} ≈ 2e-10 at the Nyquist frequency.
const SPLIT_CELLS: f64 = 3.0;

fn band_limited_term(t: &PowerTerm, grid: &Grid3) -> Vec<f64> {
    let n = grid.n();
    let h = grid.spacing();
    let sigma = SPLIT_CELLS * h;
    let alpha = t.alpha;
    let s = 0.5 * (3.0 - alpha);
    let half = 0.5 * alpha;

    // Smooth long-range part, pointwise.
    let at_zero = sigma.powf(-alpha) / gamma(half + 1.0);
    let long = par::map(grid.len(), |i| {
        let r = dist2(grid.position(i), t.center).sqrt();
        if r < 1e-6 * sigma {
            at_zero
        } else {
            r.powf(-alpha) * gamma_lr(half, (r / sigma).powi(2))
        }
    });

    // Short-range remainder r^{-α}Q(α/2, r²/σ²), from its Fourier transform
    // π^{3/2}/Γ(α/2)·(k²/4)^{-s}·γ(s, k²σ²/4), s = (3-α)/2.
    let pref = PI.powf(1.5) / gamma(half);
    let gs = gamma(s);
    let short_hat = |k2: f64| {
        let x = 0.25 * k2 * sigma * sigma;
        if x < 1e-12 {
            pref * sigma.powf(2.0 * s) / s
        } else {
            pref * (0.25 * k2).powf(-s) * gs * gamma_lr(s, x)
        }
    };
    let origin = -0.5 * grid.box_length();
    let shift = [
        origin - t.center[0],
        origin - t.center[1],
        origin - t.center[2],
    ];
    let k: Vec<f64> = (0..n).map(|i| grid.wavenumber(i)).collect();
    let inv_h3 = 1.0 / grid.cell_volume();
    let mut spec: Vec<Complex64> = par::map(grid.len(), |i| {
        let (kx, ky, kz) = (k[i % n], k[(i / n) % n], k[i / (n * n)]);
        let phase = kx * shift[0] + ky * shift[1] + kz * shift[2];
        Complex64::from_polar(short_hat(kx * kx + ky * ky + kz * kz) * inv_h3, phase)
    });
    Fft3::cached(n).inverse(&mut spec);
    long.into_iter()
        .zip(spec)
        .map(|(l, c)| t.q * (l + c.re))
        .collect()
}

/// V(u) = h³·Σ V u², with V sampled by the default regularization.
pub fn potential_energy(u: &Field, spec: &PotentialSpec) -> Result<f64> {
    let v = sample_potential(spec, u.grid())?;
    Ok(potential_energy_sampled(u, &v))
}

/// h³·Σ V u² for an already sampled V.
pub fn potential_energy_sampled(u: &Field, v: &Field) -> f64 {
    let (uv, vv) = (u.values(), v.values());
    u.grid().cell_volume() * par::sum(uv.len(), |i| vv[i] * uv[i] * uv[i])
}

/// L^p norm of the sampled potential (used for the L^{3/2} part of a
/// perturbation bound).
pub fn potential_lp_norm(spec: &PotentialSpec, grid: &Grid3, p: f64) -> Result<f64> {
    crate::grid::lp_norm(&sample_potential(spec, grid)?, p)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeficiencyReport {
    /// Best E^V(μ) found.
    pub e_v: f64,
    /// Best E^0(μ) found.
    pub e_0: f64,
    /// e_v < e_0 - margin, and both runs converged.
    pub deficient: bool,
    pub margin: f64,
    /// At least one of the two solver runs did not converge.
    pub inconclusive: bool,
}

/// Compare the ground-state energies with and without V from identical
/// initializations.
pub fn check_deficiency(
    spec: &PotentialSpec,
    p: KernelParams,
    mu: f64,
    cfg: &SolverConfig,
) -> Result<DeficiencyReport> {
    if !(mu > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "mass must be positive, got {mu}"
        )));
    }
    spec.validate(Some(&cfg.grid()?))?;
    let cfg = SolverConfig { mu, ..cfg.clone() };
    let specs = [Some(spec), None];
    let runs = par::map(2, |i| minimize(p, specs[i], &cfg));
    let mut runs = runs.into_iter();
    let with_v = runs.next().unwrap()?;
    let without = runs.next().unwrap()?;
    let margin = 10.0 * cfg.tol_energy;
    let inconclusive = !(with_v.converged && without.converged);
    let e_v = with_v.breakdown.total;
    let e_0 = without.breakdown.total;
    Ok(DeficiencyReport {
        e_v,
        e_0,
        deficient: !inconclusive && e_v < e_0 - margin,
        margin,
        inconclusive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_bounds() {
        let g = Grid3::new(8, 4.0).unwrap();
        for alpha in [0.0, 2.0, 2.5, -1.0] {
            let s = PotentialSpec {
                terms: vec![PowerTerm {
                    q: 1.0,
                    alpha,
                    center: [0.0; 3],
                }],
                bounded: None,
            };
            assert!(matches!(
                sample_potential(&s, &g),
                Err(Error::InvalidPotential(_))
            ));
        }
        let outside = PotentialSpec::coulomb(-1.0, [2.0, 0.0, 0.0]);
        assert!(sample_potential(&outside, &g).is_err());
    }

    #[test]
    fn band_limited_coulomb_integral() {
        // ∫ e^{-r²}/r d³x = 2π, with the centre on and off a grid node.
        let g = Grid3::new(32, 12.0).unwrap();
        for c in [[0.0; 3], [0.17, -0.05, 0.31]] {
            let spec = PotentialSpec::coulomb(1.0, c);
            let v = sample_potential(&spec, &g).unwrap();
            let u = Field::from_fn(g, |x| (-0.5 * dist2(x, c)).exp());
            let e: f64 = v
                .values()
                .iter()
                .zip(u.values())
                .map(|(v, u)| v * u * u)
                .sum::<f64>()
                * g.cell_volume();
            assert!((e - 2.0 * PI).abs() < 1e-6, "{e}");
            let hc = sample_potential_with(&spec, &g, Regularization::HalfCell).unwrap();
            let e_hc: f64 = hc
                .values()
                .iter()
                .zip(u.values())
                .map(|(v, u)| v * u * u)
                .sum::<f64>()
                * g.cell_volume();
            assert!((e_hc - 2.0 * PI).abs() > (e - 2.0 * PI).abs());
        }
    }

    #[test]
    fn bump_shape() {
        let b = BoundedPart::Bump {
            level: 2.0,
            center: [0.0; 3],
            radius: 1.5,
        };
        assert_eq!(b.value([0.0; 3]), 2.0);
        assert_eq!(b.value([1.5, 0.0, 0.0]), 0.0);
        assert!(b.value([1.0, 0.0, 0.0]) > 0.0 && b.value([1.0, 0.0, 0.0]) < 2.0);
        assert_eq!(b.sup_norm(), 2.0);
    }
}

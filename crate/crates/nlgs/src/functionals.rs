//! Energy functionals, the rescaling map u_θ(x) = θ³u(θ²x), and the
//! Euler-Lagrange operator.
//!
//! ```text
//! E(u) = ½A(u) + ½V(u) + ¼K_{a,b}(u),
//! A(u) = ∫|∇u|²,  V(u) = ∫V u²,  K_{a,b}(u) = ∫∫K_{a,b}(x-y)u(x)²u(y)²,
//! K_{a,b} = (4/3)D_b - (1/3)D_a - D_0,  D_c(u) = ∫∫e^{-c|x-y|}/|x-y| u²u².
//! ```

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::convolution::{
    contract, isolated_apply, ConvKernel, FreeSpaceOperator, PaddedWorkspace,
};
use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::grid::{dirichlet_energy, is_resolved, Field, Grid3};
use crate::kernel::{KernelParams, Screening};
use crate::par;
use crate::potentials::{sample_potential, PotentialSpec};

/// How the kinetic term treats the box boundary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Spectral Laplacian of the field zero-extended to the doubled grid,
    /// consistent with the free-space convolution.
    #[default]
    Isolated,
    /// Spectral Laplacian on the periodic box.
    Periodic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    /// ½A(u)
    pub kinetic: f64,
    /// ½V(u)
    pub potential: f64,
    /// ¼K_{a,b}(u)
    pub nonlocal: f64,
    pub total: f64,
    pub d0: f64,
    pub da: f64,
    pub db: f64,
    /// No field involved had more than 1% of its spectral power in the top
    /// octave.
    pub resolved: bool,
}

impl EnergyBreakdown {
    pub const CSV_HEADER: &'static str =
        "mu,a,b,kinetic,potential,nonlocal,total,omega,d0,da,db,resolved";

    pub fn csv_row(&self, mu: f64, p: KernelParams, omega: f64) -> String {
        format!(
            "{mu:.17e},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{omega:.17e},{:.17e},{:.17e},{:.17e},{}",
            p.a, p.b, self.kinetic, self.potential, self.nonlocal, self.total, self.d0, self.da, self.db, self.resolved
        )
    }
}

/// A nonlocal energy together with the resolution flag of its input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Nonlocal {
    pub value: f64,
    pub resolved: bool,
}

fn check_mass(u: &Field) -> Result<()> {
    if u.mass() > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain("field has zero mass".into()))
    }
}

fn density(u: &Field) -> Vec<f64> {
    u.values().iter().map(|v| v * v).collect()
}

fn conv_energy(u: &Field, kernel: ConvKernel, l_trunc: f64) -> Result<f64> {
    if kernel.is_zero() {
        return Ok(0.0);
    }
    let op = FreeSpaceOperator::get(*u.grid(), l_trunc, kernel)?;
    let mut ws = PaddedWorkspace::new(u.grid());
    Ok(op.energy(&density(u), &mut ws))
}

/// D_c(u) with the kernel truncated at `l_trunc`.
pub fn d_c(u: &Field, c: Screening, l_trunc: f64) -> Result<Nonlocal> {
    check_mass(u)?;
    let value = conv_energy(u, ConvKernel::Block(c), l_trunc)?.max(0.0);
    Ok(Nonlocal {
        value,
        resolved: is_resolved(u),
    })
}

/// K_{a,b}(u) through one combined multiplier.
pub fn k_ab(u: &Field, p: KernelParams, l_trunc: f64) -> Result<Nonlocal> {
    check_mass(u)?;
    let value = conv_energy(u, ConvKernel::Pair(p), l_trunc)?;
    Ok(Nonlocal {
        value,
        resolved: is_resolved(u),
    })
}

/// Energy breakdown with periodic kinetic term and the box diagonal as
/// truncation radius. V absent means the autonomous problem.
pub fn energy(u: &Field, p: KernelParams, v: Option<&PotentialSpec>) -> Result<EnergyBreakdown> {
    Problem::new(*u.grid(), p, v, Boundary::Periodic)?.energy(u)
}

/// (A(u) + V(u) + K_{a,b}(u))/μ, periodic kinetic term.
pub fn nehari_omega(u: &Field, p: KernelParams, v: Option<&PotentialSpec>) -> Result<f64> {
    Problem::new(*u.grid(), p, v, Boundary::Periodic)?.nehari_omega(u)
}

/// L² gradient of the energy, -Δu + Vu + (K * u²)u, periodic kinetic term.
pub fn gradient(u: &Field, p: KernelParams, v: Option<&PotentialSpec>) -> Result<Field> {
    Problem::new(*u.grid(), p, v, Boundary::Periodic)?.apply_h(u)
}

/// (A(u - v) + mass(u - v))^{1/2} with the periodic spectral A.
pub fn h1_distance(u: &Field, v: &Field) -> Result<f64> {
    if u.grid() != v.grid() {
        return Err(Error::GridMismatch("fields live on different grids".into()));
    }
    let d = u.axpy(-1.0, v);
    Ok((dirichlet_energy(&d) + d.mass()).sqrt())
}

/// Rows of the trigonometric interpolation matrix evaluating at `y_i`.
fn interpolation_matrix(grid: &Grid3, theta2: f64) -> Vec<f64> {
    let n = grid.n();
    let l = grid.box_length();
    let half = 0.5 * l;
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        let y = theta2 * grid.coord(i);
        if y < -half || y >= half {
            continue;
        }
        for j in 0..n {
            let t = y - grid.coord(j);
            let arg = PI * t / l;
            m[i * n + j] = if arg.sin().abs() < 1e-14 {
                // t is a multiple of the period within the box: a node.
                if (t / grid.spacing()).round() == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (n as f64 * arg).sin() / (n as f64 * arg.tan())
            };
        }
    }
    m
}

/// x ↦ θ³u(θ²x) by separable trigonometric interpolation. Fails when more
/// than 1e-10 of the mass would leave the box.
pub fn rescale(u: &Field, theta: f64) -> Result<Field> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::Domain(format!(
            "theta must be positive, got {theta}"
        )));
    }
    let g = *u.grid();
    let t2 = theta * theta;
    if t2 < 1.0 {
        let lim = 0.5 * t2 * g.box_length();
        let vals = u.values();
        let outside = par::sum(vals.len(), |i| {
            let p = g.position(i);
            if p.iter().any(|c| c.abs() >= lim) {
                vals[i] * vals[i]
            } else {
                0.0
            }
        });
        let total: f64 = vals.iter().map(|v| v * v).sum();
        let leak = outside / total;
        if leak > 1e-10 {
            return Err(Error::RescaleOutOfBox { leak });
        }
    }
    let n = g.n();
    let m = interpolation_matrix(&g, t2);
    let (t, d) = contract(u.values(), [n; 3], 2, &m, n);
    let (t, d) = contract(&t, d, 1, &m, n);
    let (t, _) = contract(&t, d, 0, &m, n);
    let s = theta.powi(3);
    Field::new(g, t.into_iter().map(|v| v * s).collect())
}

/// A discretized problem: grid, kernel, sampled potential and boundary
/// treatment, with the convolution operator prepared.
pub struct Problem {
    grid: Grid3,
    params: KernelParams,
    potential: Option<Field>,
    boundary: Boundary,
    l_trunc: f64,
    op: Option<Arc<FreeSpaceOperator>>,
    k2: Vec<f64>,
}

/// Reusable buffers for [`Problem::evaluate`].
pub struct Workspace {
    padded: PaddedWorkspace,
    boxed: Vec<Complex64>,
}

impl Workspace {
    pub fn new(grid: &Grid3) -> Self {
        Workspace {
            padded: PaddedWorkspace::new(grid),
            boxed: vec![Complex64::default(); grid.len()],
        }
    }
}

/// Everything needed for one step of the flow.
pub struct Evaluation {
    /// -Δu
    pub neg_lap: Vec<f64>,
    /// K * u² (absent when K ≡ 0)
    pub phi: Option<Vec<f64>>,
    /// A(u)
    pub a: f64,
    /// V(u)
    pub v: f64,
    /// K_{a,b}(u)
    pub k: f64,
}

impl Evaluation {
    pub fn energy(&self) -> f64 {
        0.5 * self.a + 0.5 * self.v + 0.25 * self.k
    }

    /// Sum of the magnitudes of the energy terms, the scale of its round-off.
    pub fn magnitude(&self) -> f64 {
        0.5 * self.a.abs() + 0.5 * self.v.abs() + 0.25 * self.k.abs()
    }
}

impl Problem {
    pub fn new(
        grid: Grid3,
        params: KernelParams,
        v: Option<&PotentialSpec>,
        boundary: Boundary,
    ) -> Result<Self> {
        let potential = match v {
            Some(spec) if !spec.is_zero() => Some(sample_potential(spec, &grid)?),
            Some(spec) => {
                spec.validate(Some(&grid))?;
                None
            }
            None => None,
        };
        Self::with_sampled_potential(grid, params, potential, boundary)
    }

    /// Problem with an already sampled potential.
    pub fn with_sampled_potential(
        grid: Grid3,
        params: KernelParams,
        potential: Option<Field>,
        boundary: Boundary,
    ) -> Result<Self> {
        if let Some(p) = &potential {
            if p.grid() != &grid {
                return Err(Error::GridMismatch(
                    "potential sampled on a different grid".into(),
                ));
            }
        }
        let l_trunc = grid.diagonal();
        let op = if params.is_zero() {
            None
        } else {
            Some(FreeSpaceOperator::get(
                grid,
                l_trunc,
                ConvKernel::Pair(params),
            )?)
        };
        Ok(Problem {
            grid,
            params,
            potential,
            boundary,
            l_trunc,
            op,
            k2: grid.k_squared(),
        })
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn params(&self) -> KernelParams {
        self.params
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn potential(&self) -> Option<&Field> {
        self.potential.as_ref()
    }

    /// Zero the face planes x, y or z = -L/2 for the isolated boundary.
    /// The remaining points are symmetric under x → -x, so centred
    /// iterates stay centred and the soft translation mode is not excited.
    pub fn restrict(&self, v: &mut [f64]) {
        if self.boundary != Boundary::Isolated {
            return;
        }
        let n = self.grid.n();
        par::for_each_chunk(v, n * n, |z, plane| {
            if z == 0 {
                plane.iter_mut().for_each(|x| *x = 0.0);
                return;
            }
            plane[..n].iter_mut().for_each(|x| *x = 0.0);
            plane.chunks_mut(n).for_each(|row| row[0] = 0.0);
        });
    }

    fn check(&self, u: &Field) -> Result<()> {
        if u.grid() != &self.grid {
            return Err(Error::GridMismatch("field and problem grids differ".into()));
        }
        check_mass(u)
    }

    /// -Δu, K * u² and the energy terms of `u`.
    pub fn evaluate(&self, u: &[f64], ws: &mut Workspace) -> Evaluation {
        let h3 = self.grid.cell_volume();
        let (neg_lap, phi) = match self.boundary {
            Boundary::Isolated => isolated_apply(&self.grid, self.op.as_deref(), u, &mut ws.padded),
            Boundary::Periodic => {
                let lap = self.periodic_neg_laplacian(u, &mut ws.boxed);
                let phi = self.op.as_ref().map(|op| {
                    let rho: Vec<f64> = u.iter().map(|v| v * v).collect();
                    op.potential(&rho, &mut ws.padded)
                });
                (lap, phi)
            }
        };
        let a = h3 * par::sum(u.len(), |i| u[i] * neg_lap[i]);
        let v = self.potential.as_ref().map_or(0.0, |p| {
            h3 * par::sum(u.len(), |i| p.values()[i] * u[i] * u[i])
        });
        let k = phi
            .as_ref()
            .map_or(0.0, |f| h3 * par::sum(u.len(), |i| f[i] * u[i] * u[i]));
        Evaluation {
            neg_lap,
            phi,
            a,
            v,
            k,
        }
    }

    fn periodic_neg_laplacian(&self, u: &[f64], buf: &mut [Complex64]) -> Vec<f64> {
        buf.iter_mut()
            .zip(u)
            .for_each(|(b, &v)| *b = Complex64::new(v, 0.0));
        let fft = Fft3::cached(self.grid.n());
        fft.forward(buf);
        buf.iter_mut().zip(&self.k2).for_each(|(b, k)| *b *= k);
        fft.inverse(buf);
        buf.iter().map(|c| c.re).collect()
    }

    /// Solve (1 + τ(k² + s))d = g on the periodic box.
    pub fn precondition(&self, g: &[f64], tau: f64, shift: f64, ws: &mut Workspace) -> Vec<f64> {
        let buf = &mut ws.boxed;
        buf.iter_mut()
            .zip(g)
            .for_each(|(b, &v)| *b = Complex64::new(v, 0.0));
        let fft = Fft3::cached(self.grid.n());
        fft.forward(buf);
        buf.iter_mut()
            .zip(&self.k2)
            .for_each(|(b, k)| *b /= 1.0 + tau * (k + shift));
        fft.inverse(buf);
        buf.iter().map(|c| c.re).collect()
    }

    /// H u = -Δu + V u + (K * u²)u from an evaluation.
    pub fn h_times(&self, u: &[f64], ev: &Evaluation) -> Vec<f64> {
        (0..u.len())
            .map(|i| {
                let w = self.potential.as_ref().map_or(0.0, |p| p.values()[i])
                    + ev.phi.as_ref().map_or(0.0, |f| f[i]);
                ev.neg_lap[i] + w * u[i]
            })
            .collect()
    }

    pub fn apply_h(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        let mut ws = Workspace::new(&self.grid);
        let ev = self.evaluate(u.values(), &mut ws);
        Ok(Field::from_raw(self.grid, self.h_times(u.values(), &ev)))
    }

    /// Total energy only.
    pub fn total_energy(&self, u: &Field) -> Result<f64> {
        self.check(u)?;
        Ok(self
            .evaluate(u.values(), &mut Workspace::new(&self.grid))
            .energy())
    }

    /// Full breakdown, with D_0, D_a, D_b evaluated separately.
    pub fn energy(&self, u: &Field) -> Result<EnergyBreakdown> {
        self.check(u)?;
        let ev = self.evaluate(u.values(), &mut Workspace::new(&self.grid));
        let block = |c: Screening| conv_energy(u, ConvKernel::Block(c), self.l_trunc);
        let d0 = block(Screening::ZERO)?;
        let da = if self.params.a.is_zero() {
            d0
        } else {
            block(self.params.a)?
        };
        let db = if self.params.b.is_zero() {
            d0
        } else {
            block(self.params.b)?
        };
        let nonlocal = if self.params.is_zero() {
            0.0
        } else {
            0.25 * ((4.0 / 3.0) * db - (1.0 / 3.0) * da - d0)
        };
        let kinetic = 0.5 * ev.a;
        let potential = 0.5 * ev.v;
        Ok(EnergyBreakdown {
            kinetic,
            potential,
            nonlocal,
            total: kinetic + potential + nonlocal,
            d0,
            da,
            db,
            resolved: is_resolved(u),
        })
    }

    pub fn nehari_omega(&self, u: &Field) -> Result<f64> {
        self.check(u)?;
        let ev = self.evaluate(u.values(), &mut Workspace::new(&self.grid));
        Ok((ev.a + ev.v + ev.k) / u.mass())
    }

    /// L² norm of Hu - ωu with its component along u removed.
    pub fn residual(&self, u: &Field, omega: f64) -> Result<f64> {
        self.check(u)?;
        let ev = self.evaluate(u.values(), &mut Workspace::new(&self.grid));
        let hu = self.h_times(u.values(), &ev);
        let r: Vec<f64> = hu
            .iter()
            .zip(u.values())
            .map(|(h, v)| h - omega * v)
            .collect();
        Ok(projected_norm(&self.grid, &r, u.values()))
    }
}

/// ‖r - (⟨r,u⟩/⟨u,u⟩)u‖ in the discrete L² norm.
pub(crate) fn projected_norm(grid: &Grid3, r: &[f64], u: &[f64]) -> f64 {
    let h3 = grid.cell_volume();
    let ru = par::sum(u.len(), |i| r[i] * u[i]);
    let uu = par::sum(u.len(), |i| u[i] * u[i]);
    let c = ru / uu;
    (h3 * par::sum(u.len(), |i| (r[i] - c * u[i]).powi(2))).sqrt()
}

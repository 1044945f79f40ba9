//! Stability of energy deficiency under a perturbation V = V₁ + V₂ + V₃.
//!
//! With u₁ a minimizer for V₁ and K = ½‖u₁‖²_{L⁶}, Hölder gives
//!
//! ```text
//! E^V(μ) ≤ E^V(u₁) ≤ E^{V₁}(μ) + K‖V₂‖_{L^{3/2}} + ½‖V₃‖_∞ μ,
//! ```
//!
//! so V stays deficient whenever the budget on the right is below the gap
//! E⁰(μ) - E^{V₁}(μ).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::Problem;
use crate::grid::{lp_norm, Field};
use crate::kernel::KernelParams;
use crate::par;
use crate::potentials::{sample_potential, BoundedPart, PotentialSpec};
use crate::solver::{flow, minimize_problem, SolverConfig};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerturbationConfig {
    pub params: KernelParams,
    pub mu: f64,
    /// The deficient base potential.
    pub v1: PotentialSpec,
    /// Measured in L^{3/2}.
    pub v2: Option<PotentialSpec>,
    /// Measured in L^∞.
    pub v3: Option<BoundedPart>,
    pub solver: SolverConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerturbationReport {
    pub e0: f64,
    pub e_v1: f64,
    pub e_v: f64,
    /// E⁰ - E^{V₁}.
    pub gap: f64,
    /// ½‖u₁‖²_{L⁶}.
    pub sobolev_factor: f64,
    pub v2_norm: f64,
    pub v3_sup: f64,
    pub budget: f64,
    /// budget < gap.
    pub predicted_deficient: bool,
    /// E^V < E⁰ - margin, with every run converged.
    pub deficient: bool,
    pub inconclusive: bool,
    pub margin: f64,
    /// E^V ≤ E^{V₁} + budget + margin.
    pub upper_bound_holds: bool,
}

impl PerturbationReport {
    /// A predicted deficiency was observed, and the upper bound held.
    pub fn consistent(&self) -> bool {
        self.upper_bound_holds && (!self.predicted_deficient || self.deficient)
    }

    pub const CSV_HEADER: &'static str =
        "e0,e_v1,e_v,gap,sobolev_factor,v2_norm,v3_sup,budget,predicted_deficient,deficient,inconclusive,upper_bound_holds";

    pub fn csv(&self) -> String {
        format!(
            "{}\n{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{},{},{}\n",
            Self::CSV_HEADER,
            self.e0,
            self.e_v1,
            self.e_v,
            self.gap,
            self.sobolev_factor,
            self.v2_norm,
            self.v3_sup,
            self.budget,
            self.predicted_deficient,
            self.deficient,
            self.inconclusive,
            self.upper_bound_holds
        )
    }
}

fn sampled(spec: &PotentialSpec, cfg: &SolverConfig) -> Result<Option<Field>> {
    if spec.is_zero() {
        spec.validate(Some(&cfg.grid()?))?;
        Ok(None)
    } else {
        Ok(Some(sample_potential(spec, &cfg.grid()?)?))
    }
}

fn add(total: Option<Field>, part: Option<Field>) -> Option<Field> {
    match (total, part) {
        (Some(t), Some(p)) => Some(t.axpy(1.0, &p)),
        (t, p) => t.or(p),
    }
}

pub fn run_perturbation(cfg: &PerturbationConfig) -> Result<PerturbationReport> {
    let solver = SolverConfig {
        mu: cfg.mu,
        ..cfg.solver.clone()
    };
    solver.validate()?;
    let grid = solver.grid()?;
    let mu = cfg.mu;

    let v1 = sampled(&cfg.v1, &solver)?;
    if v1.is_none() {
        return Err(Error::InvalidPotential("base potential V₁ is zero".into()));
    }
    let v2 = match &cfg.v2 {
        Some(s) => sampled(s, &solver)?,
        None => None,
    };
    let v3 = match cfg.v3 {
        Some(b) => sampled(
            &PotentialSpec {
                terms: vec![],
                bounded: Some(b),
            },
            &solver,
        )?,
        None => None,
    };
    let v2_norm = match &v2 {
        Some(f) => lp_norm(f, 1.5)?,
        None => 0.0,
    };
    let v3_sup = cfg.v3.map_or(0.0, |b| b.sup_norm());
    let full = add(add(v1.clone(), v2), v3);

    let base = [None, v1];
    let runs = par::map(2, |i| {
        let problem =
            Problem::with_sampled_potential(grid, cfg.params, base[i].clone(), solver.boundary)?;
        minimize_problem(&problem, &solver)
    });
    let mut runs = runs.into_iter();
    let free = runs.next().unwrap()?;
    let with_v1 = runs.next().unwrap()?;

    // Starting from u₁ makes E^V ≤ E^V(u₁), the first inequality above.
    let problem = Problem::with_sampled_potential(grid, cfg.params, full, solver.boundary)?;
    let run = flow(&problem, &with_v1.u, &solver)?;
    let converged = run.termination == crate::solver::Termination::Converged;

    let e0 = free.breakdown.total;
    let e_v1 = with_v1.breakdown.total;
    let e_v = problem.energy(&run.u)?.total;
    let gap = e0 - e_v1;
    let sobolev_factor = 0.5 * lp_norm(&with_v1.u, 6.0)?.powi(2);
    let budget = sobolev_factor * v2_norm + 0.5 * v3_sup * mu;
    let margin = 10.0 * solver.tol_energy.max(1e-12);
    let inconclusive = !(free.converged && with_v1.converged && converged);
    Ok(PerturbationReport {
        e0,
        e_v1,
        e_v,
        gap,
        sobolev_factor,
        v2_norm,
        v3_sup,
        budget,
        predicted_deficient: budget < gap,
        deficient: !inconclusive && e_v < e0 - margin,
        inconclusive,
        margin,
        upper_bound_holds: e_v <= e_v1 + budget + margin,
    })
}

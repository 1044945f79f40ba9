//! Ground states along (a_n, b_n) tending to (0, 0), (∞, ∞) or (0, ∞).
//!
//! The limit problem is solved once with the exact kernel (K ≡ 0, -1/r or
//! -4/(3r)); every sequence problem is then warm-started from the limit
//! minimizer and compared with it in the discrete H¹ norm.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::{h1_distance, Problem};
use crate::kernel::{KernelParams, Screening};
use crate::par;
use crate::potentials::PotentialSpec;
use crate::solver::{
    flow, minimize_problem, recentre, GroundStateResult, SolverConfig, Termination,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// a_n, b_n → 0: the kernel vanishes.
    ZeroZero,
    /// a_n, b_n → ∞: the Choquard kernel -1/r.
    InfInf,
    /// a_n → 0, b_n → ∞: the kernel -4/(3r).
    ZeroInf,
}

impl Target {
    pub fn limit(self) -> KernelParams {
        let (a, b) = match self {
            Target::ZeroZero => (Screening::ZERO, Screening::ZERO),
            Target::InfInf => (Screening::Infinite, Screening::Infinite),
            Target::ZeroInf => (Screening::ZERO, Screening::Infinite),
        };
        KernelParams { a, b }
    }

    /// (a_n, b_n) for n = 0..count, halving or doubling from 1.
    pub fn default_sequence(self, count: usize) -> Vec<KernelParams> {
        self.geometric_sequence(count, 2.0)
    }

    /// (a_n, b_n) for n = 0..count, moving from 1 by powers of `ratio`.
    pub fn geometric_sequence(self, count: usize, ratio: f64) -> Vec<KernelParams> {
        (0..count)
            .map(|n| {
                let up = ratio.powi(n as i32);
                let down = 1.0 / up;
                let (a, b) = match self {
                    Target::ZeroZero => (down, down),
                    Target::InfInf => (up, up),
                    Target::ZeroInf => (down, up),
                };
                KernelParams {
                    a: Screening::Finite(a),
                    b: Screening::Finite(b),
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticStep {
    pub a: f64,
    pub b: f64,
    pub energy: f64,
    pub omega: f64,
    pub h1_distance: f64,
    pub residual: f64,
    pub iters: usize,
    pub converged: bool,
    /// (4b + a)μ²/12 for the (0, 0) target.
    pub gap_bound: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct AsymptoticRun {
    pub target: Target,
    pub mu: f64,
    pub steps: Vec<AsymptoticStep>,
    pub limit_result: GroundStateResult,
}

impl AsymptoticRun {
    pub fn limit_energy(&self) -> f64 {
        self.limit_result.breakdown.total
    }

    /// H¹ distances non-increasing after the first step. Reported, not
    /// required: the limit theorems only give convergence.
    pub fn monotone(&self) -> bool {
        self.steps
            .iter()
            .skip(1)
            .collect::<Vec<_>>()
            .windows(2)
            .all(|w| w[1].h1_distance <= w[0].h1_distance)
    }

    /// ω_n < 0 at every step with b_n > 0.
    pub fn omega_negative(&self) -> bool {
        self.steps
            .iter()
            .filter(|s| s.b > 0.0)
            .all(|s| s.omega < 0.0)
    }

    /// |E_n - E_lim| ≤ gap bound + `slack` at every step that has a bound.
    pub fn within_gap(&self, slack: f64) -> bool {
        let e = self.limit_energy();
        self.steps.iter().all(|s| {
            s.gap_bound
                .map_or(true, |g| (s.energy - e).abs() <= g + slack)
        })
    }

    pub fn all_converged(&self) -> bool {
        self.limit_result.converged && self.steps.iter().all(|s| s.converged)
    }

    pub fn final_distance(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.h1_distance)
    }

    pub const CSV_HEADER: &'static str =
        "a,b,energy,omega,h1_distance,residual,iters,converged,gap_bound";

    pub fn csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for st in &self.steps {
            let gap = st
                .gap_bound
                .map(|g| format!("{g:.12e}"))
                .unwrap_or_default();
            s.push_str(&format!(
                "{},{},{:.12e},{:.12e},{:.12e},{:.3e},{},{},{}\n",
                st.a,
                st.b,
                st.energy,
                st.omega,
                st.h1_distance,
                st.residual,
                st.iters,
                st.converged,
                gap
            ));
        }
        s
    }
}

/// Margin below which E^V(μ) does not count as deficient.
fn margin(cfg: &SolverConfig) -> f64 {
    10.0 * cfg.tol_energy.max(1e-12)
}

pub fn run_asymptotic(
    target: Target,
    v: Option<&PotentialSpec>,
    mu: f64,
    sequence: &[KernelParams],
    cfg: &SolverConfig,
) -> Result<AsymptoticRun> {
    if sequence.is_empty() {
        return Err(Error::InvalidConfig("empty parameter sequence".into()));
    }
    if sequence.iter().any(|p| p.finite().is_none()) {
        return Err(Error::InvalidConfig(
            "sequence entries must be finite".into(),
        ));
    }
    let cfg = SolverConfig { mu, ..cfg.clone() };
    cfg.validate()?;
    let grid = cfg.grid()?;
    let v = v.filter(|s| !s.is_zero());
    let limit = target.limit();

    let limit_problem = Problem::new(grid, limit, v, cfg.boundary)?;
    let limit_result = match v {
        None if target == Target::ZeroZero => {
            return Err(Error::Hypothesis(
                "the (0, 0) limit without a potential has no minimizer".into(),
            ))
        }
        None => minimize_problem(&limit_problem, &cfg)?,
        Some(_) => {
            let with_v = minimize_problem(&limit_problem, &cfg)?;
            // Deficiency against the autonomous limit; its energy is 0 for (0, 0).
            let e_free = match target {
                Target::ZeroZero => 0.0,
                _ => {
                    minimize_problem(&Problem::new(grid, limit, None, cfg.boundary)?, &cfg)?
                        .breakdown
                        .total
                }
            };
            if !(with_v.breakdown.total < e_free - margin(&cfg)) {
                return Err(Error::Hypothesis(format!(
                    "potential is not energy deficient: E^V = {} vs E^0 = {e_free}",
                    with_v.breakdown.total
                )));
            }
            with_v
        }
    };
    let u_lim = if v.is_none() {
        recentre(&limit_result.u)
    } else {
        limit_result.u.clone()
    };

    let steps = par::map(sequence.len(), |i| -> Result<AsymptoticStep> {
        let p = sequence[i];
        let problem = Problem::new(grid, p, v, cfg.boundary)?;
        let run = flow(&problem, &limit_result.u, &cfg)?;
        let omega = problem.nehari_omega(&run.u)?;
        let u = if v.is_none() {
            recentre(&run.u)
        } else {
            run.u.clone()
        };
        let (a, b) = p.finite().expect("checked finite");
        Ok(AsymptoticStep {
            a,
            b,
            energy: run.energy,
            omega,
            h1_distance: h1_distance(&u, &u_lim)?,
            residual: run.residual,
            iters: run.iters,
            converged: run.termination == Termination::Converged,
            gap_bound: (target == Target::ZeroZero).then(|| (4.0 * b + a) * mu * mu / 12.0),
        })
    });
    let steps = steps.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(AsymptoticRun {
        target,
        mu,
        steps,
        limit_result,
    })
}

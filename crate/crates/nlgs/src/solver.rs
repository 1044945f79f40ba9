//! Normalized gradient flow on the mass sphere ‖u‖² = μ.
//!
//! One step, with ω the Nehari multiplier of u and s = max(0, -ω):
//!
//! ```text
//! g  = Hu - ωu,                      H = -Δ + V + (K * u²)
//! u* = |u - τ(1 + τ(-Δ + s))⁻¹ g|,   rescaled to mass μ
//! ```
//!
//! The inverse is applied spectrally on the periodic box. Fixed points are
//! exact discrete Euler-Lagrange solutions. Steps that raise the energy are
//! rejected and retried with τ/2; accepted steps grow τ by 1.1 up to `tau_max`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::functionals::{
    projected_norm, Boundary, EnergyBreakdown, Evaluation, Problem, Workspace,
};
use crate::grid::{Field, Grid3};
use crate::kernel::KernelParams;
use crate::par;
use crate::potentials::PotentialSpec;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Grid points per axis.
    pub n: usize,
    pub box_length: f64,
    /// Target mass μ.
    pub mu: f64,
    /// Initial pseudo-time step.
    pub tau: f64,
    pub tau_max: f64,
    /// Residual tolerance.
    pub tol_grad: f64,
    /// Energy change over `stall_window` accepted steps that counts as a stall.
    pub tol_energy: f64,
    pub stall_window: usize,
    pub max_iters: usize,
    pub n_starts: usize,
    pub seed: u64,
    pub boundary: Boundary,
    /// Add conjugate-direction momentum and a quadratic step-length fit to
    /// the preconditioned flow step. Off gives the plain flow.
    pub accelerate: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            n: 64,
            box_length: 20.0,
            mu: 1.0,
            tau: 1.0,
            tau_max: 100.0,
            tol_grad: 1e-8,
            tol_energy: 1e-15,
            stall_window: 50,
            max_iters: 5000,
            n_starts: 4,
            seed: 0,
            boundary: Boundary::Isolated,
            accelerate: true,
        }
    }
}

impl SolverConfig {
    pub fn with_grid(mut self, n: usize, box_length: f64) -> Self {
        self.n = n;
        self.box_length = box_length;
        self
    }

    pub fn grid(&self) -> Result<Grid3> {
        Grid3::new(self.n, self.box_length)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        let bad = |what: &str, v: f64| {
            Err(Error::InvalidConfig(format!(
                "{what} must be positive, got {v}"
            )))
        };
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad("mu", self.mu);
        }
        if !(self.tau > 0.0) {
            return bad("tau", self.tau);
        }
        if !(self.tau_max >= self.tau) {
            return Err(Error::InvalidConfig(format!(
                "tau_max {} is below tau {}",
                self.tau_max, self.tau
            )));
        }
        if !(self.tol_grad > 0.0) {
            return bad("tol_grad", self.tol_grad);
        }
        if !(self.tol_energy > 0.0) {
            return bad("tol_energy", self.tol_energy);
        }
        if self.n_starts == 0 || self.max_iters == 0 || self.stall_window == 0 {
            return Err(Error::InvalidConfig(
                "n_starts, max_iters and stall_window must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Residual fell below `tol_grad`.
    Converged,
    /// Energy changed by less than `tol_energy` over the stall window.
    EnergyStall,
    MaxIterations,
    /// τ shrank below 1e-14 without an acceptable step.
    StepCollapse,
    /// The iterates spread over the box with positive energy: no localized
    /// minimizer exists at this mass.
    InfimumNotAttained,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterRecord {
    pub iter: usize,
    pub energy: f64,
    pub residual: f64,
    pub tau: f64,
    #[serde(skip)]
    pub second_moment: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StartSummary {
    pub energy: f64,
    pub omega: f64,
    pub residual: f64,
    pub iters: usize,
    pub termination: Termination,
}

#[derive(Clone, Debug)]
pub struct GroundStateResult {
    /// Nonnegative minimizer with mass μ.
    pub u: Field,
    pub breakdown: EnergyBreakdown,
    pub omega: f64,
    pub mu: f64,
    pub converged: bool,
    pub termination: Termination,
    pub iters: usize,
    pub residual: f64,
    /// Index of the start that produced `u`.
    pub start_index: usize,
    pub starts: Vec<StartSummary>,
    /// Accepted iterates of the best start.
    pub history: Vec<IterRecord>,
}

impl GroundStateResult {
    /// One JSON object per accepted iterate: iter, energy, residual, tau.
    pub fn log_jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.history {
            s.push_str(&serde_json::to_string(r).expect("plain record serializes"));
            s.push('\n');
        }
        s
    }
}

/// Outcome of one start.
pub struct FlowRun {
    pub u: Field,
    pub energy: f64,
    pub omega: f64,
    pub residual: f64,
    pub iters: usize,
    pub termination: Termination,
    pub history: Vec<IterRecord>,
}

fn normalize(v: &mut [f64], mu: f64, h3: f64) {
    let m = h3 * par::sum(v.len(), |i| v[i] * v[i]);
    let s = (mu / m).sqrt();
    v.iter_mut().for_each(|x| *x *= s);
}

const ROUNDOFF: f64 = 1e-12;

struct FlowState {
    u: Vec<f64>,
    ev: Evaluation,
    omega: f64,
    g: Vec<f64>,
    residual: f64,
}

impl FlowState {
    fn new(problem: &Problem, u: Vec<f64>, mu: f64, ws: &mut Workspace) -> Self {
        let ev = problem.evaluate(&u, ws);
        let omega = (ev.a + ev.v + ev.k) / mu;
        let hu = problem.h_times(&u, &ev);
        let mut g: Vec<f64> = hu.iter().zip(&u).map(|(h, x)| h - omega * x).collect();
        problem.restrict(&mut g);
        let residual = projected_norm(problem.grid(), &g, &u);
        FlowState {
            u,
            ev,
            omega,
            g,
            residual,
        }
    }
}

/// Previous accepted step, its gradient and ⟨g, z⟩ for the conjugate update.
struct Momentum {
    step: Vec<f64>,
    g: Vec<f64>,
    gz: f64,
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    par::sum(x.len(), |i| x[i] * y[i])
}

/// Run the flow from `u0` until one of the stopping rules fires.
pub fn flow(problem: &Problem, u0: &Field, cfg: &SolverConfig) -> Result<FlowRun> {
    cfg.validate()?;
    let grid = *problem.grid();
    if u0.grid() != &grid {
        return Err(Error::GridMismatch(
            "initial field is on a different grid".into(),
        ));
    }
    if !(u0.mass() > 0.0) {
        return Err(Error::Domain("initial field has zero mass".into()));
    }
    let h3 = grid.cell_volume();
    let mu = cfg.mu;
    let mut ws = Workspace::new(&grid);
    let mut u = u0.values().to_vec();
    u.iter_mut().for_each(|x| *x = x.abs());
    problem.restrict(&mut u);
    if !(u.iter().any(|x| *x != 0.0)) {
        return Err(Error::Domain(
            "initial field vanishes off the boundary faces".into(),
        ));
    }
    normalize(&mut u, mu, h3);
    let mut state = FlowState::new(problem, u, mu, &mut ws);
    let mut tau = cfg.tau;
    let mut momentum: Option<Momentum> = None;
    let mut history: Vec<IterRecord> = Vec::new();
    let moment = |v: &[f64]| Field::from_raw(grid, v.to_vec()).second_moment();

    let termination = loop {
        let energy = state.ev.energy();
        history.push(IterRecord {
            iter: history.len(),
            energy,
            residual: state.residual,
            tau,
            second_moment: moment(&state.u),
        });

        if state.residual <= cfg.tol_grad {
            break Termination::Converged;
        }
        let k = history.len();
        if k > cfg.stall_window
            && (history[k - 1 - cfg.stall_window].energy - energy).abs() <= cfg.tol_energy
        {
            break Termination::EnergyStall;
        }
        if k > cfg.max_iters {
            break Termination::MaxIterations;
        }

        let shift = (-state.omega).max(0.0);
        let noise = ROUNDOFF * state.ev.magnitude();
        let mut accepted = false;
        while tau >= 1e-14 {
            let mut z = problem.precondition(&state.g, tau, shift, &mut ws);
            z.iter_mut().for_each(|x| *x *= tau);
            let gz = dot(&state.g, &z);
            let mut p: Vec<f64> = z.iter().map(|x| -x).collect();
            if let Some(m) = momentum.as_ref() {
                let beta = ((gz - dot(&m.g, &z)) / m.gz).max(0.0);
                if beta > 0.0 {
                    let c = dot(&m.step, &state.u) / dot(&state.u, &state.u);
                    p.iter_mut()
                        .zip(&m.step)
                        .zip(&state.u)
                        .for_each(|((p, s), u)| *p += beta * (s - c * u));
                    if dot(&state.g, &p) >= 0.0 {
                        p.iter_mut().zip(&z).for_each(|(p, z)| *p = -z);
                    }
                }
            }
            // Trial point u + tp on the sphere and the slope of the energy
            // along the path there. g ⟂ u, so only the scaled p counts.
            let advance = |t: f64, ws: &mut Workspace| {
                let mut trial: Vec<f64> = state.u.iter().zip(&p).map(|(x, d)| x + t * d).collect();
                problem.restrict(&mut trial);
                let c = (mu / (h3 * dot(&trial, &trial))).sqrt();
                trial.iter_mut().for_each(|x| *x *= c);
                let next = FlowState::new(problem, trial, mu, ws);
                let slope = c * h3 * dot(&next.g, &p);
                (next, slope)
            };
            let slope0 = h3 * dot(&state.g, &p);
            let (mut next, mut slope) = advance(1.0, &mut ws);
            let mut t = 1.0;
            if cfg.accelerate && slope > slope0 {
                // Secant step to the zero of the slope.
                let t_fit = (-slope0 / (slope - slope0)).clamp(0.1, 4.0);
                if (t_fit - 1.0).abs() > 0.2 {
                    let (other, other_slope) = advance(t_fit, &mut ws);
                    if other.ev.energy() < next.ev.energy() {
                        next = other;
                        slope = other_slope;
                        t = t_fit;
                    }
                }
            }
            let e = next.ev.energy();
            // Within round-off, judge the step by the energy change the two
            // end slopes predict instead of the difference of energies.
            let predicted = 0.5 * t * (slope0 + slope);
            let ok = e < energy - noise || (e <= energy + noise && predicted < 0.0);
            if ok {
                if cfg.accelerate {
                    p.iter_mut().for_each(|x| *x *= t);
                    momentum = Some(Momentum {
                        step: p,
                        g: std::mem::take(&mut state.g),
                        gz,
                    });
                }
                state = next;
                tau = (tau * 1.1).min(cfg.tau_max);
                accepted = true;
                break;
            }
            momentum = None;
            tau *= 0.5;
        }
        if !accepted {
            break Termination::StepCollapse;
        }
    };

    let last = *history.last().unwrap();
    let FlowState { mut u, omega, .. } = state;
    // The flow keeps the sign of its positive start; flip if it drifted.
    if u.iter().sum::<f64>() < 0.0 {
        u.iter_mut().for_each(|x| *x = -*x);
    }
    let termination = if spreading(&history, last.energy, grid.box_length()) {
        Termination::InfimumNotAttained
    } else {
        termination
    };
    Ok(FlowRun {
        u: Field::from_raw(grid, u),
        energy: last.energy,
        omega,
        residual: last.residual,
        iters: history.len() - 1,
        termination,
        history,
    })
}

/// Positive energy, second moment never decreasing, and a final spread
/// comparable to a field filling the box.
fn spreading(history: &[IterRecord], energy: f64, box_length: f64) -> bool {
    if !(energy > 0.0) || history.len() < 2 {
        return false;
    }
    let monotone = history
        .windows(2)
        .all(|w| w[1].second_moment >= w[0].second_moment * (1.0 - 1e-9));
    let uniform = 0.25 * box_length * box_length;
    monotone && history.last().unwrap().second_moment >= 0.3 * uniform
}

/// The default starts: Gaussians of width L/8 and L/16 at the box centre,
/// then random band-limited fields under a broad envelope, made even in
/// each axis about the centre. Off-centre starts converge slowly along the
/// nearly flat translation mode.
pub fn initial_guesses(grid: &Grid3, n_starts: usize, seed: u64) -> Vec<Field> {
    let l = grid.box_length();
    (0..n_starts)
        .map(|i| match i {
            0 => gaussian(grid, l / 8.0),
            1 => gaussian(grid, l / 16.0),
            _ => mirror_symmetrized(&random_band_limited(
                grid,
                3,
                l / 6.0,
                seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
                    .wrapping_add(i as u64),
            )),
        })
        .collect()
}

/// Average of `f` over the eight reflections x_i → -x_i about the centre.
fn mirror_symmetrized(f: &Field) -> Field {
    let g = f.grid();
    let n = g.n();
    let r = |i: usize| (n - i) % n;
    let v = f.values();
    let values = par::map(g.len(), |i| {
        let (x, y, z) = (i % n, (i / n) % n, i / (n * n));
        let mut s = 0.0;
        for zz in [z, r(z)] {
            for yy in [y, r(y)] {
                for xx in [x, r(x)] {
                    s += v[g.index(xx, yy, zz)];
                }
            }
        }
        0.125 * s
    });
    Field::from_raw(*g, values)
}

pub fn gaussian(grid: &Grid3, width: f64) -> Field {
    let w2 = 2.0 * width * width;
    Field::from_fn(*grid, |p| {
        (-(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) / w2).exp()
    })
}

/// Random combination of Fourier modes with |m_i| ≤ `modes`, times a
/// Gaussian envelope of width `envelope` (skipped when not finite).
pub fn random_band_limited(grid: &Grid3, modes: usize, envelope: f64, seed: u64) -> Field {
    let n = grid.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = vec![Complex64::default(); grid.len()];
    let m = modes as i64;
    for z in -m..=m {
        for y in -m..=m {
            for x in -m..=m {
                let w = |i: i64| i.rem_euclid(n as i64) as usize;
                let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                spec[grid.index(w(x), w(y), w(z))] = c;
            }
        }
    }
    Fft3::cached(n).inverse(&mut spec);
    let w2 = 2.0 * envelope * envelope;
    let values = spec
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let p = grid.position(i);
            let env = if envelope.is_finite() {
                (-(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) / w2).exp()
            } else {
                1.0
            };
            c.re * env
        })
        .collect();
    Field::from_raw(*grid, values)
}

fn summarize(
    problem: &Problem,
    run: FlowRun,
    start_index: usize,
    starts: Vec<StartSummary>,
    mu: f64,
) -> Result<GroundStateResult> {
    let breakdown = problem.energy(&run.u)?;
    let omega = problem.nehari_omega(&run.u)?;
    Ok(GroundStateResult {
        breakdown,
        omega,
        mu,
        converged: run.termination == Termination::Converged,
        termination: run.termination,
        iters: run.iters,
        residual: run.residual,
        start_index,
        starts,
        history: run.history,
        u: run.u,
    })
}

/// Best of `cfg.n_starts` flows on the problem described by `p`, `v`, `cfg`.
pub fn minimize(
    p: KernelParams,
    v: Option<&PotentialSpec>,
    cfg: &SolverConfig,
) -> Result<GroundStateResult> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let problem = Problem::new(grid, p, v, cfg.boundary)?;
    minimize_problem(&problem, cfg)
}

pub fn minimize_problem(problem: &Problem, cfg: &SolverConfig) -> Result<GroundStateResult> {
    cfg.validate()?;
    let inits = initial_guesses(problem.grid(), cfg.n_starts, cfg.seed);
    let runs = par::map(inits.len(), |i| flow(problem, &inits[i], cfg));
    let runs: Vec<FlowRun> = runs.into_iter().collect::<Result<_>>()?;
    let starts: Vec<StartSummary> = runs
        .iter()
        .map(|r| StartSummary {
            energy: r.energy,
            omega: r.omega,
            residual: r.residual,
            iters: r.iters,
            termination: r.termination,
        })
        .collect();
    let best = (0..runs.len())
        .min_by(|&i, &j| runs[i].energy.total_cmp(&runs[j].energy))
        .expect("at least one start");
    let run = runs.into_iter().nth(best).unwrap();
    summarize(problem, run, best, starts, cfg.mu)
}

/// A single flow from a given initial field.
pub fn minimize_from(
    p: KernelParams,
    v: Option<&PotentialSpec>,
    cfg: &SolverConfig,
    init: &Field,
) -> Result<GroundStateResult> {
    cfg.validate()?;
    let problem = Problem::new(cfg.grid()?, p, v, cfg.boundary)?;
    let run = flow(&problem, init, cfg)?;
    let summary = StartSummary {
        energy: run.energy,
        omega: run.omega,
        residual: run.residual,
        iters: run.iters,
        termination: run.termination,
    };
    summarize(&problem, run, 0, vec![summary], cfg.mu)
}

/// L² norm of the sphere-projected residual Hu - ωu.
pub fn residual(
    u: &Field,
    p: KernelParams,
    v: Option<&PotentialSpec>,
    omega: f64,
    boundary: Boundary,
) -> Result<f64> {
    Problem::new(*u.grid(), p, v, boundary)?.residual(u, omega)
}

/// Shift `u` by whole cells so that its maximum sits at the box centre.
pub fn recentre(u: &Field) -> Field {
    let g = u.grid();
    let n = g.n();
    let i = u.argmax_abs();
    let (x, y, z) = (i % n, (i / n) % n, i / (n * n));
    let c = (n / 2) as i64;
    u.rolled([c - x as i64, c - y as i64, c - z as i64])
}

#[derive(Clone, Debug)]
pub struct CurvePoint {
    pub mu: f64,
    pub energy: f64,
    pub omega: f64,
    pub converged: bool,
    pub result: GroundStateResult,
}

/// Ground states along an ascending list of masses. The first point uses
/// the configured multi-start; each later one starts from the previous
/// minimizer rescaled to the new mass.
pub fn energy_curve(
    p: KernelParams,
    v: Option<&PotentialSpec>,
    mus: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<CurvePoint>> {
    if mus.is_empty() || mus.iter().any(|m| !(*m > 0.0)) || mus.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(
            "mass list must be positive and strictly ascending".into(),
        ));
    }
    cfg.validate()?;
    let problem = Problem::new(cfg.grid()?, p, v, cfg.boundary)?;
    let mut out: Vec<CurvePoint> = Vec::with_capacity(mus.len());
    for &mu in mus {
        let c = SolverConfig { mu, ..cfg.clone() };
        let result = match out.last() {
            None => minimize_problem(&problem, &c)?,
            Some(prev) => {
                let init = prev.result.u.scaled((mu / prev.mu).sqrt());
                let run = flow(&problem, &init, &c)?;
                let summary = StartSummary {
                    energy: run.energy,
                    omega: run.omega,
                    residual: run.residual,
                    iters: run.iters,
                    termination: run.termination,
                };
                summarize(&problem, run, 0, vec![summary], mu)?
            }
        };
        out.push(CurvePoint {
            mu,
            energy: result.breakdown.total,
            omega: result.omega,
            converged: result.converged,
            result,
        });
    }
    Ok(out)
}

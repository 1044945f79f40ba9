//! The ten acceptance criteria, one PASS/FAIL line each.
//!
//! Set ACCEPTANCE_ONLY=3,5 to run a subset.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nlgs::experiments::asymptotic::{run_asymptotic, Target};
use nlgs::experiments::atlas::atlas_cell;
use nlgs::experiments::inequalities::{inequality_suite, InequalityConfig};
use nlgs::experiments::perturbation::{run_perturbation, PerturbationConfig, PerturbationReport};
use nlgs::experiments::rescaling::{default_kernels, rescaling_checks};
use nlgs::functionals::Boundary;
use nlgs::kernel::{classify_kernel, Regime};
use nlgs::potentials::{BoundedPart, PotentialSpec};
use nlgs::solver::{energy_curve, minimize, minimize_from, SolverConfig, Termination};
use nlgs::{Grid3, KernelParams, Screening};

use common::{choquard_oracle, extrapolate_to_zero, kernel_direct};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn hydrogen_potential() -> PotentialSpec {
    PotentialSpec::coulomb(-2.0, [0.0; 3])
}

fn kernel(a: f64, b: f64) -> KernelParams {
    KernelParams::new(a, b).unwrap()
}

fn within(t: Instant, limit: Duration) -> (bool, String) {
    let e = t.elapsed();
    (
        e < limit,
        format!("{:.1}s of {}s", e.as_secs_f64(), limit.as_secs()),
    )
}

fn rescaling_identities() -> Outcome {
    let t = Instant::now();
    let grid = Grid3::new(64, 20.0).unwrap();
    let thetas = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::SQRT_2];
    let checks = rescaling_checks(&grid, &thetas, &default_kernels()).unwrap();
    let (fast, time) = within(t, Duration::from_secs(10));
    let mass = checks.iter().map(|c| c.mass_rel).fold(0.0, f64::max);
    let kin = checks.iter().map(|c| c.kinetic_rel).fold(0.0, f64::max);
    let nl = checks
        .iter()
        .flat_map(|c| c.nonlocal_rel.iter().map(|x| x.1))
        .fold(0.0, f64::max);
    outcome(
        checks.iter().all(|c| c.passed()) && fast,
        format!("max rel errors mass {mass:.1e}, A {kin:.1e}, K {nl:.1e}; {time}"),
    )
}

fn convolution_inequalities() -> Outcome {
    let t = Instant::now();
    let r = inequality_suite(100, 2024, &InequalityConfig::default()).unwrap();
    let (fast, time) = within(t, Duration::from_secs(60));
    let violations: usize = r.bounds.iter().map(|b| b.violations).sum();
    let worst = r
        .bounds
        .iter()
        .map(|b| format!("{}@{}={:.3}", b.name, b.c.unwrap(), b.max_ratio))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(
        violations == 0 && fast,
        format!("{violations} violations over 100 fields; max ratios {worst}; {time}"),
    )
}

fn hydrogen() -> Outcome {
    let t = Instant::now();
    let cfg = SolverConfig::default().with_grid(64, 24.0);
    let r = minimize(KernelParams::ZERO, Some(&hydrogen_potential()), &cfg).unwrap();
    let (fast, time) = within(t, Duration::from_secs(120));
    let e_rel = (r.breakdown.total + 0.5).abs() / 0.5;
    let w_err = (r.omega + 1.0).abs();
    outcome(
        r.converged && e_rel <= 2e-2 && w_err <= 2e-2 && fast,
        format!(
            "E = {:.6} (rel {e_rel:.1e}), omega = {:.6} (err {w_err:.1e}); {time}",
            r.breakdown.total, r.omega
        ),
    )
}

fn free_vanishing() -> Outcome {
    let cfg = SolverConfig {
        boundary: Boundary::Periodic,
        accelerate: false,
        tau: 0.1,
        tau_max: 0.1,
        max_iters: 400,
        n_starts: 1,
        ..SolverConfig::default().with_grid(32, 20.0)
    };
    let r = minimize(KernelParams::ZERO, None, &cfg).unwrap();
    let moments: Vec<f64> = r.history.iter().map(|h| h.second_moment).collect();
    let monotone = moments.windows(2).all(|w| w[1] >= w[0]);
    let e = r.breakdown.total;
    outcome(
        r.termination == Termination::InfimumNotAttained && e > 0.0 && e < 1e-3 && monotone && r.history.len() > 200,
        format!(
            "{:?}, E = {e:.3e}, second moment {:.2} -> {:.2} monotone={monotone} over {} iterations",
            r.termination,
            moments[0],
            moments[moments.len() - 1],
            r.history.len() - 1
        ),
    )
}

fn autonomous_existence() -> Outcome {
    let cfg = SolverConfig::default().with_grid(48, 64.0);
    let oracle = choquard_oracle();
    let inf = f64::INFINITY;
    let mut ok = true;
    let mut parts = Vec::new();
    for (a, b) in [(inf, inf), (1.0, 1.0), (0.0, 1.0), (2.0, 1.0)] {
        let r = minimize(kernel(a, b), None, &cfg).unwrap();
        let e = r.breakdown.total;
        ok &= r.converged && e < -1e-4 && r.omega < -1e-4;
        if a == inf {
            // Agreement in three significant digits: half a unit in the third.
            let unit = 10f64.powf(oracle.energy.abs().log10().floor() - 2.0);
            let agree = (e - oracle.energy).abs() <= 0.5 * unit;
            ok &= agree;
            parts.push(format!(
                "({a},{b}) E = {e:.7} vs shooting {:.7}",
                oracle.energy
            ));
        } else {
            parts.push(format!("({a},{b}) E = {e:.6} omega = {:.5}", r.omega));
        }
    }
    outcome(ok, parts.join("; "))
}

fn strict_subadditivity() -> Outcome {
    let cfg = SolverConfig::default().with_grid(64, 32.0);
    let p = kernel(1.0, 1.0);
    let mus = [0.5, 1.0, 2.0, 4.0, 8.0];
    let curve = energy_curve(p, None, &mus, &cfg).unwrap();
    let tol = 10.0 * cfg.tol_grad.max(cfg.tol_energy);
    let per_mass: Vec<f64> = curve.iter().map(|c| c.energy / c.mu).collect();
    let drops_ok = per_mass.windows(2).all(|w| w[0] - w[1] > tol);
    let e = |mu: f64| curve.iter().find(|c| c.mu == mu).unwrap().energy;
    let mut spots: Vec<(f64, f64, f64)> = vec![
        (1.0, 0.5, 0.5),
        (2.0, 1.0, 1.0),
        (4.0, 2.0, 2.0),
        (8.0, 4.0, 4.0),
    ]
    .into_iter()
    .map(|(m, r1, r2)| (m, r1, e(m) - e(r1) - e(r2)))
    .collect();
    // An uneven split of μ = 2, warm-started from the μ = 2 state.
    let u2 = &curve[2].result.u;
    let extra: Vec<_> = [2.0 / 3.0, 4.0 / 3.0]
        .iter()
        .map(|&m| {
            minimize_from(
                p,
                None,
                &SolverConfig {
                    mu: m,
                    ..cfg.clone()
                },
                &u2.scaled((m / 2.0f64).sqrt()),
            )
            .unwrap()
        })
        .collect();
    spots.push((
        2.0,
        2.0 / 3.0,
        e(2.0) - extra[0].breakdown.total - extra[1].breakdown.total,
    ));
    let split_ok = spots.iter().all(|s| s.2 < -tol);
    let converged = curve.iter().all(|c| c.converged) && extra.iter().all(|r| r.converged);
    let resolved = curve.iter().all(|c| c.result.breakdown.resolved);
    outcome(
        converged && drops_ok && split_ok,
        format!(
            "E/mu = {:?}; E(mu) - E(rho) - E(mu-rho) = {:?}; resolved={resolved}",
            per_mass
                .iter()
                .map(|x| format!("{x:.6}"))
                .collect::<Vec<_>>(),
            spots
                .iter()
                .map(|s| format!("{:.2e}", s.2))
                .collect::<Vec<_>>()
        ),
    )
}

fn vanishing_screening_limit() -> Outcome {
    let cfg = SolverConfig::default().with_grid(48, 24.0);
    let target = Target::ZeroZero;
    let r = run_asymptotic(
        target,
        Some(&hydrogen_potential()),
        1.0,
        &target.default_sequence(7),
        &cfg,
    )
    .unwrap();
    let d = r.final_distance();
    let worst = r
        .steps
        .iter()
        .map(|s| (s.energy - r.limit_energy()).abs() - s.gap_bound.unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    outcome(
        r.all_converged() && r.within_gap(5e-3) && d < 5e-3,
        format!(
            "E_lim = {:.6}; max(|E_n - E_lim| - bound) = {worst:.2e}; final H1 distance {d:.2e}; omega<0: {}",
            r.limit_energy(),
            r.omega_negative()
        ),
    )
}

fn infinite_screening_limits() -> Outcome {
    let cfg = SolverConfig::default().with_grid(48, 64.0);
    let mut ok = true;
    let mut parts = Vec::new();
    for target in [Target::InfInf, Target::ZeroInf] {
        let limit = target.limit();
        ok &= limit.b == Screening::Infinite;
        let r =
            run_asymptotic(target, None, 1.0, &target.geometric_sequence(6, 4.0), &cfg).unwrap();
        let d: Vec<f64> = r.steps.iter().map(|s| s.h1_distance).collect();
        let decreasing = d.windows(2).all(|w| w[1] <= w[0]);
        ok &= r.all_converged() && decreasing && r.final_distance() < 1e-3;
        parts.push(format!(
            "{target:?}: distances {:?}",
            d.iter().map(|x| format!("{x:.1e}")).collect::<Vec<_>>()
        ));
    }
    outcome(ok, parts.join("; "))
}

fn kernel_atlas() -> Outcome {
    let inf = f64::INFINITY;
    let expected = [
        ((0.0, 0.0), Regime::BothZero),
        ((1.0, inf), Regime::InfiniteB),
        ((1.0, 2.0), Regime::ShallowA),
        ((2.0, 1.0), Regime::ShallowA),
        ((3.0, 1.0), Regime::ModerateA),
        ((4.0, 1.0), Regime::ModerateA),
        ((5.0, 1.0), Regime::SteepA),
        ((inf, 1.0), Regime::SteepInfiniteA),
        ((1.0, 0.0), Regime::ZeroB),
        ((inf, 0.0), Regime::ZeroBInfiniteA),
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for ((a, b), regime) in expected {
        let got = classify_kernel(kernel(a, b)).regime;
        if got != regime {
            ok = false;
            notes.push(format!("({a},{b}) classified {got:?}, expected {regime:?}"));
        }
    }
    let rows: Vec<u8> = expected.iter().map(|e| e.1.row()).collect();
    ok &= (1..=8).all(|r| rows.contains(&r));

    let six = atlas_cell(kernel(6.0, 1.0)).unwrap().geometry.unwrap();
    let r1 = six.numerator_stationary_point.unwrap();
    let r1_err = (r1 - 9f64.ln() / 5.0).abs();
    ok &= r1_err <= 1e-8;

    let boundary = atlas_cell(kernel(4.0, 1.0)).unwrap().geometry.unwrap();
    ok &= boundary.value_at_zero == 0.0;

    let mut worst: f64 = 0.0;
    for (a, b) in [
        (1.0, 2.0),
        (2.0, 1.0),
        (3.0, 1.0),
        (4.0, 1.0),
        (5.0, 1.0),
        (6.0, 1.0),
        (1.0, 0.0),
    ] {
        let g = atlas_cell(kernel(a, b)).unwrap().geometry.unwrap();
        let h = 1e-4;
        let x: Vec<f64> = (1..=4).map(|i| i as f64 * h).collect();
        let y: Vec<f64> = x.iter().map(|&r| kernel_direct(a, b, r)).collect();
        let (v0, s0) = extrapolate_to_zero(&x, &y);
        worst = worst
            .max((g.value_at_zero - v0).abs())
            .max((g.slope_at_zero - s0).abs());
    }
    ok &= worst <= 1e-8;
    notes.push(format!(
        "r1(6,1) - log(9)/5 = {r1_err:.1e}; true critical point {:?}; small-r limit mismatch {worst:.1e}",
        six.critical_points
    ));
    outcome(ok, notes.join("; "))
}

fn perturbation_stability() -> Outcome {
    let solver = SolverConfig::default().with_grid(32, 24.0);
    let run = |level: Option<f64>| -> PerturbationReport {
        run_perturbation(&PerturbationConfig {
            params: KernelParams::CHOQUARD,
            mu: 1.0,
            v1: hydrogen_potential(),
            v2: None,
            v3: level.map(|level| BoundedPart::Plateau { level }),
            solver: solver.clone(),
        })
        .unwrap()
    };
    let base = run(None);
    let gap = base.gap;
    let small = run(Some(gap));
    let large = run(Some(2.5 * gap));
    let small_ok = small.predicted_deficient && small.deficient && small.upper_bound_holds;
    let large_ok = !large.predicted_deficient
        && (large.inconclusive || !large.deficient)
        && large.e_v > small.e_v;
    outcome(
        base.deficient && small_ok && large_ok,
        format!(
            "gap {gap:.5}; |V3| = gap: E^V = {:.5} < E0 = {:.5} deficient={}; |V3| = 2.5 gap: E^V = {:.5} deficient={} inconclusive={}",
            small.e_v, small.e0, small.deficient, large.e_v, large.deficient, large.inconclusive
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("rescaling identities", rescaling_identities),
        ("convolution inequalities", convolution_inequalities),
        ("hydrogenic ground state", hydrogen),
        ("no minimizer without kernel or potential", free_vanishing),
        (
            "autonomous minimizers and shooting cross-check",
            autonomous_existence,
        ),
        (
            "strict subadditivity along the mass curve",
            strict_subadditivity,
        ),
        (
            "vanishing-screening limit with potential",
            vanishing_screening_limit,
        ),
        ("infinite-screening limits", infinite_screening_limits),
        ("kernel atlas and geometry", kernel_atlas),
        (
            "perturbation of a deficient potential",
            perturbation_stability,
        ),
    ];
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            outcome(
                false,
                format!(
                    "panicked: {:?}",
                    e.downcast_ref::<String>()
                        .map(String::as_str)
                        .or(e.downcast_ref::<&str>().copied())
                ),
            )
        });
        let status = if result.passed { "PASS" } else { "FAIL" };
        if !result.passed {
            failed += 1;
        }
        println!(
            "{status} criterion {n:>2} {name} [{:.1}s]: {}",
            t.elapsed().as_secs_f64(),
            result.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}

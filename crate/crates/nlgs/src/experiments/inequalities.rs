//! Convolution and interpolation inequalities evaluated on random
//! band-limited fields:
//!
//! * D_c(u) ≤ (4π/c²)‖u‖₄⁴,
//! * D_0(u) - D_c(u) ≤ c‖u‖₂⁴,
//! * D_c decreasing in c,
//! * the coercivity shape E(u) ≥ ¼A(u) - C₁μ - C₂A(u)^{1/2}μ^{3/2},
//! * the Gagliardo-Nirenberg shape ‖u‖_s ≤ C·A^{3(s-2)/(4s)}μ^{(6-s)/(4s)}.
//!
//! The last two have no explicit constants: they are fitted on one half of
//! the sample and must hold on the other half within a fixed factor.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::{d_c, Boundary, Problem, Workspace};
use crate::grid::{dirichlet_energy, lp_norm, Field, Grid3};
use crate::kernel::{KernelParams, Screening};
use crate::par;
use crate::potentials::PotentialSpec;
use crate::solver::random_band_limited;

/// Factor by which held-out samples may exceed a fitted constant.
pub const SHAPE_FACTOR: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityConfig {
    pub n: usize,
    pub box_length: f64,
    pub screenings: Vec<f64>,
    /// Screenings for the small-c approach of D_0 - D_c to c‖u‖₂⁴.
    pub small_screenings: Vec<f64>,
}

impl Default for InequalityConfig {
    fn default() -> Self {
        InequalityConfig {
            n: 32,
            box_length: 20.0,
            screenings: vec![0.5, 1.0, 4.0],
            small_screenings: vec![1e-1, 1e-2, 1e-3],
        }
    }
}

/// Worst case of one inequality over the sample.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub c: Option<f64>,
    /// Largest lhs/rhs over the sample; the bound holds when ≤ 1.
    pub max_ratio: f64,
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShapeFit {
    pub name: String,
    /// Constants fitted on the training half.
    pub constants: Vec<f64>,
    /// Largest ratio of the held-out requirement to the fitted bound.
    pub max_validation_ratio: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityReport {
    pub samples: usize,
    pub seed: u64,
    pub bounds: Vec<BoundCheck>,
    /// Fields where D_c failed to decrease along 0 < c_1 < ... < ∞.
    pub monotonicity_violations: usize,
    /// (c, (D_0 - D_c)/(c‖u‖₂⁴)) on the first field, c decreasing.
    pub small_c_ratios: Vec<(f64, f64)>,
    pub shapes: Vec<ShapeFit>,
}

impl InequalityReport {
    pub fn total_violations(&self) -> usize {
        self.bounds.iter().map(|b| b.violations).sum::<usize>() + self.monotonicity_violations
    }

    /// Every bound, monotonicity, the small-c limit and both shape fits.
    pub fn passed(&self) -> bool {
        self.total_violations() == 0 && self.small_c_ok() && self.shapes.iter().all(|s| s.holds)
    }

    /// Ratios increase towards 1 as c decreases and never exceed it.
    pub fn small_c_ok(&self) -> bool {
        let r: Vec<f64> = self.small_c_ratios.iter().map(|x| x.1).collect();
        r.iter().all(|&x| x <= 1.0) && r.windows(2).all(|w| w[1] >= w[0])
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("check,c,max_ratio,violations\n");
        for b in &self.bounds {
            let c = b.c.map(|c| c.to_string()).unwrap_or_default();
            s.push_str(&format!(
                "{},{},{:.12e},{}\n",
                b.name, c, b.max_ratio, b.violations
            ));
        }
        s.push_str(&format!(
            "monotone_in_c,,,{}\n",
            self.monotonicity_violations
        ));
        for (c, r) in &self.small_c_ratios {
            s.push_str(&format!("small_c_ratio,{c},{r:.12e},0\n"));
        }
        for f in &self.shapes {
            s.push_str(&format!(
                "{},,{:.12e},{}\n",
                f.name,
                f.max_validation_ratio,
                usize::from(!f.holds)
            ));
        }
        s
    }
}

struct Sample {
    mu: f64,
    a: f64,
    l4: f64,
    d: Vec<f64>,
    l12_5: f64,
    /// ¼A + ½V with V = -1/|x|.
    local: f64,
    /// ¼K_{a,b} for the kernels of the coercivity test.
    nonlocal: Vec<f64>,
}

/// Kernels over which the coercivity constant must be uniform.
fn coercivity_kernels() -> Vec<KernelParams> {
    let inf = f64::INFINITY;
    [(inf, inf), (1.0, 1.0), (0.0, 1.0), (5.0, 1.0), (0.0, inf)]
        .into_iter()
        .map(|(a, b)| KernelParams::new(a, b).expect("valid kernel"))
        .collect()
}

/// Random field with random mode content, envelope width and mass.
pub fn random_field(grid: &Grid3, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = grid.box_length();
    let envelope = rng.gen_range(l / 16.0..l / 6.0);
    let mu = rng.gen_range(0.25..4.0);
    let modes = rng.gen_range(1..=3);
    random_band_limited(grid, modes, envelope, rng.gen()).normalized(mu)
}

fn measure(u: &Field, cfg: &InequalityConfig, problems: &[Problem]) -> Result<Sample> {
    let l = u.grid().diagonal();
    let mut d = vec![d_c(u, Screening::ZERO, l)?.value];
    for &c in &cfg.screenings {
        d.push(d_c(u, Screening::new(c)?, l)?.value);
    }
    let mut ws = Workspace::new(u.grid());
    let local = {
        let ev = problems[0].evaluate(u.values(), &mut ws);
        0.25 * ev.a + 0.5 * ev.v
    };
    let nonlocal = problems[1..]
        .iter()
        .map(|p| 0.25 * p.evaluate(u.values(), &mut ws).k)
        .collect();
    Ok(Sample {
        mu: u.mass(),
        a: dirichlet_energy(u),
        l4: lp_norm(u, 4.0)?,
        d,
        l12_5: lp_norm(u, 12.0 / 5.0)?,
        local,
        nonlocal,
    })
}

/// Largest value of `f` over the slice.
fn max_of<T>(xs: &[T], f: impl Fn(&T) -> f64) -> f64 {
    xs.iter().map(f).fold(f64::NEG_INFINITY, f64::max)
}

pub fn inequality_suite(
    samples: usize,
    seed: u64,
    cfg: &InequalityConfig,
) -> Result<InequalityReport> {
    if samples == 0 {
        return Err(Error::InvalidConfig(
            "sample count must be at least 1".into(),
        ));
    }
    if cfg
        .screenings
        .iter()
        .chain(&cfg.small_screenings)
        .any(|c| !(*c > 0.0 && c.is_finite()))
    {
        return Err(Error::InvalidConfig(
            "screenings must be positive and finite".into(),
        ));
    }
    let grid = Grid3::new(cfg.n, cfg.box_length)?;
    let coulomb = PotentialSpec::coulomb(-1.0, [0.0; 3]);
    let mut problems = vec![Problem::new(
        grid,
        KernelParams::ZERO,
        Some(&coulomb),
        Boundary::Periodic,
    )?];
    for p in coercivity_kernels() {
        problems.push(Problem::new(grid, p, None, Boundary::Periodic)?);
    }

    let fields: Vec<Field> = (0..samples)
        .map(|i| {
            random_field(
                &grid,
                seed.wrapping_mul(0x2545_F491_4F6C_DD1D)
                    .wrapping_add(i as u64),
            )
        })
        .collect();
    let measured: Vec<Sample> = par::map(samples, |i| measure(&fields[i], cfg, &problems))
        .into_iter()
        .collect::<Result<_>>()?;

    let mut bounds = Vec::new();
    for (j, &c) in cfg.screenings.iter().enumerate() {
        let ratios: Vec<f64> = measured
            .iter()
            .map(|s| s.d[j + 1] / (4.0 * PI / (c * c) * s.l4.powi(4)))
            .collect();
        bounds.push(bound("l4_screened", c, &ratios));
        let ratios: Vec<f64> = measured
            .iter()
            .map(|s| (s.d[0] - s.d[j + 1]) / (c * s.mu * s.mu))
            .collect();
        bounds.push(bound("mass_screened_difference", c, &ratios));
    }

    // Along 0 < c_1 < ... < ∞; the ∞ block is exactly 0.
    let mut order: Vec<usize> = (1..=cfg.screenings.len()).collect();
    order.sort_by(|&i, &j| cfg.screenings[i - 1].total_cmp(&cfg.screenings[j - 1]));
    let monotonicity_violations = measured
        .iter()
        .filter(|s| {
            let mut seq = vec![s.d[0]];
            seq.extend(order.iter().map(|&i| s.d[i]));
            seq.push(0.0);
            seq.windows(2).any(|w| w[1] > w[0] || w[1] < 0.0)
        })
        .count();

    let first = &fields[0];
    let l = grid.diagonal();
    let d0 = d_c(first, Screening::ZERO, l)?.value;
    let mut small: Vec<f64> = cfg.small_screenings.clone();
    small.sort_by(|a, b| b.total_cmp(a));
    let small_c_ratios = small
        .iter()
        .map(|&c| {
            Ok((
                c,
                (d0 - d_c(first, Screening::new(c)?, l)?.value) / (c * first.mass().powi(2)),
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let (train, validate) = measured.split_at(samples.div_ceil(2));
    let shapes = vec![
        coercivity_shape(train, validate),
        gn_shape(train, validate, 4.0),
        gn_shape(train, validate, 12.0 / 5.0),
    ];

    Ok(InequalityReport {
        samples,
        seed,
        bounds,
        monotonicity_violations,
        small_c_ratios,
        shapes,
    })
}

fn bound(name: &str, c: f64, ratios: &[f64]) -> BoundCheck {
    BoundCheck {
        name: name.into(),
        c: Some(c),
        max_ratio: max_of(ratios, |r| *r),
        violations: ratios.iter().filter(|&&r| r > 1.0).count(),
    }
}

/// E ≥ ¼A - C₁μ - C₂A^{1/2}μ^{3/2} uniformly over the kernels, with
/// C₁ bounding the local part and C₂ the nonlocal one.
fn coercivity_shape(train: &[Sample], validate: &[Sample]) -> ShapeFit {
    let c1 = |s: &Sample| (-s.local / s.mu).max(0.0);
    let c2 = |s: &Sample| max_of(&s.nonlocal, |k| -k).max(0.0) / (s.a.sqrt() * s.mu.powf(1.5));
    let fit1 = max_of(train, c1);
    let fit2 = max_of(train, c2);
    let ratio = if validate.is_empty() {
        0.0
    } else {
        max_of(validate, |s| {
            let need = s
                .nonlocal
                .iter()
                .map(|k| -(s.local + k))
                .fold(f64::NEG_INFINITY, f64::max);
            need / (fit1 * s.mu + fit2 * s.a.sqrt() * s.mu.powf(1.5))
        })
    };
    ShapeFit {
        name: "coercivity".into(),
        constants: vec![fit1, fit2],
        max_validation_ratio: ratio,
        holds: ratio <= SHAPE_FACTOR,
    }
}

fn gn_shape(train: &[Sample], validate: &[Sample], s_exp: f64) -> ShapeFit {
    let rhs = |s: &Sample| {
        s.a.powf(3.0 * (s_exp - 2.0) / (4.0 * s_exp)) * s.mu.powf((6.0 - s_exp) / (4.0 * s_exp))
    };
    let lhs = |s: &Sample| if s_exp == 4.0 { s.l4 } else { s.l12_5 };
    let c = max_of(train, |s| lhs(s) / rhs(s));
    let ratio = if validate.is_empty() {
        0.0
    } else {
        max_of(validate, |s| lhs(s) / (c * rhs(s)))
    };
    ShapeFit {
        name: format!(
            "gagliardo_nirenberg_s{}",
            if s_exp == 4.0 { "4" } else { "12_5" }
        ),
        constants: vec![c],
        max_validation_ratio: ratio,
        holds: ratio <= SHAPE_FACTOR,
    }
}

use proptest::prelude::*;

use nlgs::functionals::{d_c, h1_distance, k_ab, rescale, Boundary, Problem};
use nlgs::grid::{decode_field, encode_field};
use nlgs::kernel::{classify_kernel, eval_kernel, kernel_derivative, KernelSign, Monotonicity};
use nlgs::par;
use nlgs::physics::{from_dimensionless, graviton_masses, to_dimensionless, PhysicalParams};
use nlgs::potentials::PotentialSpec;
use nlgs::solver::{gaussian, random_band_limited};
use nlgs::{Field, Grid3, KernelParams, Screening};

fn grid() -> Grid3 {
    Grid3::new(16, 12.0).unwrap()
}

fn field(seed: u64) -> Field {
    random_band_limited(&grid(), 2, 2.0, seed)
}

fn log_radii() -> Vec<f64> {
    (0..400)
        .map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / 399.0))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn combined_multiplier_matches_block_decomposition(seed in any::<u64>(), a in 0.0f64..6.0, b in 0.0f64..6.0) {
        prop_assume!(a > 0.0 || b > 0.0);
        let u = field(seed);
        let p = KernelParams::new(a, b).unwrap();
        let l = grid().diagonal();
        let k = k_ab(&u, p, l).unwrap().value;
        let d = |c: f64| d_c(&u, Screening::new(c).unwrap(), l).unwrap().value;
        let blocks = (4.0 / 3.0) * d(b) - (1.0 / 3.0) * d(a) - d(0.0);
        prop_assert!((k - blocks).abs() <= 1e-10 * d(0.0), "{} vs {}", k, blocks);
    }

    #[test]
    fn screened_energy_decreases_in_c(seed in any::<u64>(), c1 in 0.0f64..4.0, dc in 0.01f64..4.0) {
        let u = field(seed);
        let l = grid().diagonal();
        let lo = d_c(&u, Screening::new(c1).unwrap(), l).unwrap().value;
        let hi = d_c(&u, Screening::new(c1 + dc).unwrap(), l).unwrap().value;
        let inf = d_c(&u, Screening::Infinite, l).unwrap().value;
        prop_assert!(hi <= lo && inf == 0.0);
    }

    #[test]
    fn energy_is_quadratic_in_mass_scaling(seed in any::<u64>(), t in 0.2f64..5.0) {
        let u = field(seed);
        let v = PotentialSpec::coulomb(-1.0, [0.0; 3]);
        let prob = Problem::new(grid(), KernelParams::new(1.0, 2.0).unwrap(), Some(&v), Boundary::Isolated).unwrap();
        let e = prob.energy(&u).unwrap();
        let scaled = prob.energy(&u.scaled(t.sqrt())).unwrap();
        let expected = t * (e.kinetic + e.potential) + t * t * e.nonlocal;
        let scale = e.kinetic.abs() + e.potential.abs() + e.nonlocal.abs();
        prop_assert!((scaled.total - expected).abs() <= 1e-10 * t * t * scale);
    }

    #[test]
    fn nehari_value_is_the_rayleigh_quotient(seed in any::<u64>()) {
        let u = field(seed);
        let prob = Problem::new(grid(), KernelParams::CHOQUARD, None, Boundary::Periodic).unwrap();
        let omega = prob.nehari_omega(&u).unwrap();
        let hu = prob.apply_h(&u).unwrap();
        let q = hu.dot(&u) / u.mass();
        prop_assert!((omega - q).abs() <= 1e-10 * q.abs().max(1.0));
    }

    #[test]
    fn sequential_energy_is_bitwise_identical(seed in any::<u64>()) {
        let u = field(seed);
        let prob = Problem::new(grid(), KernelParams::new(1.0, 1.0).unwrap(), None, Boundary::Isolated).unwrap();
        let a = prob.total_energy(&u).unwrap();
        let b = par::sequential(|| prob.total_energy(&u).unwrap());
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn field_encoding_round_trips(seed in any::<u64>()) {
        let u = field(seed);
        prop_assert_eq!(decode_field(&encode_field(&u)).unwrap(), u);
    }

    #[test]
    fn rescaling_preserves_mass(theta in 0.85f64..1.2) {
        let g = Grid3::new(32, 20.0).unwrap();
        let u = gaussian(&g, 1.5);
        let v = rescale(&u, theta).unwrap();
        prop_assert!((v.mass() - u.mass()).abs() <= 1e-9 * u.mass());
        prop_assert!(h1_distance(&rescale(&u, 1.0).unwrap(), &u).unwrap() <= 1e-12);
    }

    #[test]
    fn sampled_sign_matches_classification(a in 0.0f64..10.0, b in 0.0f64..10.0) {
        prop_assume!(a > 0.0 || b > 0.0);
        let p = KernelParams::new(a, b).unwrap();
        let class = classify_kernel(p);
        let values: Vec<f64> = log_radii().iter().map(|&r| eval_kernel(p, r).unwrap()).collect();
        match class.sign {
            KernelSign::Negative => prop_assert!(values.iter().all(|v| *v < 0.0)),
            KernelSign::Positive => prop_assert!(values.iter().all(|v| *v > 0.0)),
            KernelSign::SignChanging => prop_assert!(values[0] > 0.0 && *values.last().unwrap() < 0.0),
            KernelSign::IdenticallyZero => prop_assert!(false),
        }
        let slopes: Vec<f64> = log_radii().iter().map(|&r| kernel_derivative(p, r).unwrap()).collect();
        match class.monotonicity {
            Monotonicity::StrictlyIncreasing => prop_assert!(slopes.iter().all(|s| *s > 0.0)),
            Monotonicity::StrictlyDecreasing => prop_assert!(slopes.iter().all(|s| *s < 0.0)),
            _ => {}
        }
    }

    #[test]
    fn newtonian_tail(a in 0.0f64..5.0, b in 0.01f64..5.0) {
        let p = KernelParams::new(a, b).unwrap();
        let r = 1e3 / [a, b, 1.0].into_iter().filter(|x| *x > 0.0).fold(f64::INFINITY, f64::min);
        let tail = r * eval_kernel(p, r).unwrap();
        let expected = if a == 0.0 { -4.0 / 3.0 } else { -1.0 };
        prop_assert!((tail - expected).abs() < 1e-6, "{}", tail);
    }

    #[test]
    fn couplings_round_trip(alpha in 0.01f64..10.0, extra in 0.01f64..10.0) {
        let beta = -(alpha + extra) / 3.0;
        let p = graviton_masses(alpha, beta).unwrap();
        let b = p.b.as_f64();
        let a = p.a.as_f64();
        prop_assert!((b - 1.0 / (2.0 * alpha).sqrt()).abs() < 1e-12 * b);
        prop_assert!((a - 1.0 / (4.0 * extra).sqrt()).abs() < 1e-12 * a);
        let phys = PhysicalParams { m: 1.3, hbar: 0.7, g: 2.1, omega_tilde: -0.4, alpha, beta };
        let d = to_dimensionless(&phys).unwrap();
        let (w, inv) = from_dimensionless(&d, phys.m, phys.hbar, phys.g).unwrap();
        prop_assert!((w - phys.omega_tilde).abs() < 1e-14 && (inv * d.field_scale - 1.0).abs() < 1e-14);
    }
}

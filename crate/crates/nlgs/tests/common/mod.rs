//! Independent reference values shared by the integration tests. Nothing
//! here calls into the solver.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Radial Choquard ground state from 1-D shooting.
#[derive(Debug, Clone, Copy)]
pub struct ChoquardOracle {
    /// Energy at unit mass.
    pub energy: f64,
    /// Lagrange multiplier at unit mass.
    pub omega: f64,
    /// Dirichlet energy at unit mass.
    pub kinetic: f64,
    /// ∫∫u²u²/|x-y| at unit mass.
    pub coulomb: f64,
}

/// State (Q, Q', U, U', ∫Q², ∫|∇Q|², ∫UQ²) of
/// Q'' + 2Q'/r = -UQ,  U'' + 2U'/r = -4πQ²,
/// with U = |x|⁻¹ * Q² + ω.
type State = [f64; 7];

fn rhs(r: f64, s: &State) -> State {
    let [q, dq, u, du, _, _, _] = *s;
    [
        dq,
        -u * q - 2.0 * dq / r,
        du,
        -4.0 * PI * q * q - 2.0 * du / r,
        4.0 * PI * q * q * r * r,
        4.0 * PI * dq * dq * r * r,
        4.0 * PI * u * q * q * r * r,
    ]
}

fn rk4(r: f64, s: &State, h: f64) -> State {
    let add = |a: &State, b: &State, t: f64| -> State {
        let mut o = *a;
        o.iter_mut().zip(b).for_each(|(x, y)| *x += t * y);
        o
    };
    let k1 = rhs(r, s);
    let k2 = rhs(r + 0.5 * h, &add(s, &k1, 0.5 * h));
    let k3 = rhs(r + 0.5 * h, &add(s, &k2, 0.5 * h));
    let k4 = rhs(r + h, &add(s, &k3, h));
    let mut o = *s;
    for i in 0..7 {
        o[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    o
}

enum Shot {
    /// Q crossed zero: U(0) too large.
    Crossed,
    /// Q turned upwards: U(0) too small.
    Turned(f64, State),
}

const H: f64 = 1e-3;
const R0: f64 = 1e-6;

fn shoot(u0: f64) -> (Shot, f64, State) {
    // Series start Q = 1 - U₀r²/6, U = U₀ - 4πr²/6.
    let mut r = R0;
    let mut s: State = [
        1.0 - u0 * r * r / 6.0,
        -u0 * r / 3.0,
        u0 - 4.0 * PI * r * r / 6.0,
        -4.0 * PI * r / 3.0,
        0.0,
        0.0,
        0.0,
    ];
    let mut best = (r, s);
    while r < 60.0 {
        s = rk4(r, &s, H);
        r += H;
        if s[0] <= 0.0 {
            return (Shot::Crossed, best.0, best.1);
        }
        if s[1] > 0.0 {
            return (Shot::Turned(r, s), best.0, best.1);
        }
        best = (r, s);
    }
    (Shot::Turned(r, s), best.0, best.1)
}

/// Bisect on U(0) with Q(0) = 1, then rescale u_λ = λ²Q(λx) to unit mass.
pub fn choquard_oracle() -> ChoquardOracle {
    let (mut lo, mut hi) = (0.5, 10.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        match shoot(mid).0 {
            Shot::Crossed => hi = mid,
            Shot::Turned(..) => lo = mid,
        }
    }
    // Stop where Q is smallest before the tail departs; both integrals have
    // converged there to far better than the three digits needed.
    let (_, r, s) = shoot(lo);
    let (mass, dirichlet) = (s[4], s[5]);
    // ψ = |x|⁻¹ * Q² ~ M/r at large r, so ω = U(r) - M(r)/r.
    let omega_q = s[2] - mass / r;
    let coulomb = s[6] - omega_q * mass;
    let energy_q = 0.5 * dirichlet - 0.25 * coulomb;
    let lambda = 1.0 / mass;
    ChoquardOracle {
        energy: lambda.powi(3) * energy_q,
        omega: lambda.powi(2) * omega_q,
        kinetic: lambda.powi(3) * dirichlet,
        coulomb: lambda.powi(3) * coulomb,
    }
}

/// Values p(0), p'(0) of the polynomial through (x_i, y_i).
pub fn extrapolate_to_zero(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len();
    let mut value = 0.0;
    let mut slope = 0.0;
    for i in 0..n {
        let denom: f64 = (0..n).filter(|&j| j != i).map(|j| x[i] - x[j]).product();
        let l0: f64 = (0..n).filter(|&j| j != i).map(|j| -x[j]).product();
        // d/dt Π_{j≠i}(t - x_j) at t = 0.
        let l1: f64 = (0..n)
            .filter(|&k| k != i)
            .map(|k| {
                (0..n)
                    .filter(|&j| j != i && j != k)
                    .map(|j| -x[j])
                    .product::<f64>()
            })
            .sum();
        value += y[i] * l0 / denom;
        slope += y[i] * l1 / denom;
    }
    (value, slope)
}

/// k_{a,b}(r) for finite a, b.
pub fn kernel_direct(a: f64, b: f64, r: f64) -> f64 {
    ((4.0 / 3.0) * (-b * r).exp_m1() - (1.0 / 3.0) * (-a * r).exp_m1()) / r
}

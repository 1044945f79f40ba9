//! The kernel K_{a,b}(r) = (1/r)((4/3)e^{-br} - (1/3)e^{-ar} - 1), its
//! truncated Fourier transform, and its qualitative classification.
//!
//! Screening masses live in [0, ∞]. The endpoints are exact: `a = 0` gives
//! e^{-ar} ≡ 1 and `a = ∞` gives e^{-ar} ≡ 0.

use std::f64::consts::PI;
use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// A screening mass in [0, ∞].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Screening {
    Finite(f64),
    Infinite,
}

impl Screening {
    pub const ZERO: Screening = Screening::Finite(0.0);

    /// Parse a float; `f64::INFINITY` maps to [`Screening::Infinite`].
    pub fn new(x: f64) -> Result<Self> {
        if x.is_nan() || x < 0.0 {
            return Err(Error::Domain(format!(
                "screening mass must lie in [0, inf], got {x}"
            )));
        }
        Ok(if x.is_infinite() {
            Screening::Infinite
        } else {
            Screening::Finite(x)
        })
    }

    pub fn is_zero(self) -> bool {
        self == Screening::ZERO
    }

    pub fn is_infinite(self) -> bool {
        self == Screening::Infinite
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Screening::Finite(c) => Some(c),
            Screening::Infinite => None,
        }
    }

    /// The value as a float, with `Infinite` mapped to `f64::INFINITY`.
    /// Only for display and serialization.
    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    /// e^{-cr} for r > 0.
    pub fn decay(self, r: f64) -> f64 {
        match self {
            Screening::Finite(0.0) => 1.0,
            Screening::Finite(c) => (-c * r).exp(),
            Screening::Infinite => 0.0,
        }
    }

    /// e^{-cr} - 1 for r > 0, accurate for small cr.
    pub fn decay_m1(self, r: f64) -> f64 {
        match self {
            Screening::Finite(c) => (-c * r).exp_m1(),
            Screening::Infinite => -1.0,
        }
    }

    /// c·e^{-cr} for r > 0 (zero in both limits).
    fn rate_decay(self, r: f64) -> f64 {
        match self {
            Screening::Finite(c) => c * (-c * r).exp(),
            Screening::Infinite => 0.0,
        }
    }

    /// c·s, keeping ∞ fixed. Requires s > 0.
    pub fn scaled(self, s: f64) -> Screening {
        match self {
            Screening::Finite(c) => Screening::Finite(c * s),
            Screening::Infinite => Screening::Infinite,
        }
    }
}

impl fmt::Display for Screening {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Screening::Finite(c) => write!(f, "{c}"),
            Screening::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Screening {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Screening::Finite(c) => s.serialize_f64(*c),
            Screening::Infinite => s.serialize_str("inf"),
        }
    }
}

/// The pair of screening masses (a, b).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelParams {
    pub a: Screening,
    pub b: Screening,
}

impl KernelParams {
    /// Pure Newtonian attraction, K = -1/r.
    pub const CHOQUARD: KernelParams = KernelParams {
        a: Screening::Infinite,
        b: Screening::Infinite,
    };
    /// K ≡ 0.
    pub const ZERO: KernelParams = KernelParams {
        a: Screening::ZERO,
        b: Screening::ZERO,
    };

    pub fn new(a: f64, b: f64) -> Result<Self> {
        Ok(KernelParams {
            a: Screening::new(a)?,
            b: Screening::new(b)?,
        })
    }

    /// (a·s, b·s).
    pub fn scaled(&self, s: f64) -> KernelParams {
        KernelParams {
            a: self.a.scaled(s),
            b: self.b.scaled(s),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    /// Both masses finite, as floats.
    pub fn finite(&self) -> Option<(f64, f64)> {
        Some((self.a.finite()?, self.b.finite()?))
    }
}

impl fmt::Display for KernelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(a={}, b={})", self.a, self.b)
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "kernel radius must be positive and finite, got {r}"
        )))
    }
}

/// k_{a,b}(r).
pub fn eval_kernel(p: KernelParams, r: f64) -> Result<f64> {
    check_radius(r)?;
    Ok(kernel_value(p, r))
}

pub(crate) fn kernel_value(p: KernelParams, r: f64) -> f64 {
    // (4/3)e^{-br} - (1/3)e^{-ar} - 1 written with e^{-cr} - 1 terms so that
    // small radii do not cancel.
    ((4.0 / 3.0) * p.b.decay_m1(r) - (1.0 / 3.0) * p.a.decay_m1(r)) / r
}

/// e^{-x} - 1 + x, accurate near zero.
fn phi(x: f64) -> f64 {
    if x < 1e-2 {
        let x2 = x * x;
        x2 * (0.5 - x / 6.0 + x2 / 24.0 - x2 * x / 120.0 + x2 * x2 / 720.0)
    } else {
        (-x).exp_m1() + x
    }
}

/// The numerator f of k' = f/(3r²) for finite a, b:
/// f(r) = r(ae^{-ar} - 4be^{-br}) + 3 + e^{-ar} - 4e^{-br}.
fn derivative_numerator(a: f64, b: f64, r: f64) -> f64 {
    let pa = phi(a * r);
    let pb = phi(b * r);
    pa - 4.0 * pb + r * (a * pa - 4.0 * b * pb) - r * r * (a * a - 4.0 * b * b)
}

/// dk_{a,b}/dr.
pub fn kernel_derivative(p: KernelParams, r: f64) -> Result<f64> {
    check_radius(r)?;
    Ok(kernel_derivative_value(p, r))
}

fn kernel_derivative_value(p: KernelParams, r: f64) -> f64 {
    if let Some((a, b)) = p.finite() {
        return derivative_numerator(a, b, r) / (3.0 * r * r);
    }
    let big_f = (4.0 / 3.0) * p.b.decay_m1(r) - (1.0 / 3.0) * p.a.decay_m1(r);
    let big_f_prime = -(4.0 / 3.0) * p.b.rate_decay(r) + (1.0 / 3.0) * p.a.rate_decay(r);
    (big_f_prime * r - big_f) / (r * r)
}

/// sin(x)/x.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// 1 - e^{-x}(1 + x), accurate near zero.
fn one_minus_exp_poly(x: f64) -> f64 {
    if x < 1e-2 {
        // Σ_{n≥2} (-1)^{n+1}(n-1)xⁿ/n!
        let mut term = 1.0;
        let mut sum = 0.0;
        for n in 1..=8u32 {
            term *= x / n as f64;
            if n >= 2 {
                let sign = if n % 2 == 0 { -1.0 } else { 1.0 };
                sum += -sign * (n - 1) as f64 * term;
            }
        }
        sum
    } else {
        -(-x).exp_m1() - x * (-x).exp()
    }
}

/// Fourier transform of e^{-c|x|}/|x| restricted to |x| ≤ l, at wavenumber k.
pub fn screened_block(c: Screening, k: f64, l: f64) -> f64 {
    assert!(l > 0.0, "truncation radius must be positive");
    let k = k.abs();
    match c {
        Screening::Infinite => 0.0,
        Screening::Finite(0.0) => {
            // 4π(1 - cos kl)/k² = 2πl²·sinc²(kl/2)
            let s = sinc(0.5 * k * l);
            2.0 * PI * l * l * s * s
        }
        Screening::Finite(c) => {
            let bracket = if k == 0.0 {
                one_minus_exp_poly(c * l)
            } else {
                1.0 - (-c * l).exp() * ((k * l).cos() + c * l * sinc(k * l))
            };
            4.0 * PI / (c * c + k * k) * bracket
        }
    }
}

/// Fourier transform of K_{a,b}·1_{|x| ≤ l} at wavenumber k.
pub fn kernel_multiplier(p: KernelParams, k: f64, l: f64) -> f64 {
    if p.is_zero() {
        return 0.0;
    }
    (4.0 / 3.0) * screened_block(p.b, k, l)
        - (1.0 / 3.0) * screened_block(p.a, k, l)
        - screened_block(Screening::ZERO, k, l)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum KernelSign {
    IdenticallyZero,
    Negative,
    Positive,
    SignChanging,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Monotonicity {
    NotApplicable,
    StrictlyIncreasing,
    StrictlyDecreasing,
    NotMonotonous,
}

/// The eight parameter regions with distinct qualitative behaviour.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// a = b = 0
    BothZero,
    /// 0 ≤ a ≤ 2b = ∞
    InfiniteB,
    /// 0 ≤ a ≤ 2b < ∞, not both zero
    ShallowA,
    /// 0 < 2b < a ≤ 4b < ∞
    ModerateA,
    /// 0 < 4b < a < ∞
    SteepA,
    /// 0 < 4b < a = ∞
    SteepInfiniteA,
    /// 0 = 4b < a < ∞
    ZeroB,
    /// 0 = 4b < a = ∞
    ZeroBInfiniteA,
}

impl Regime {
    pub const ALL: [Regime; 8] = [
        Regime::BothZero,
        Regime::InfiniteB,
        Regime::ShallowA,
        Regime::ModerateA,
        Regime::SteepA,
        Regime::SteepInfiniteA,
        Regime::ZeroB,
        Regime::ZeroBInfiniteA,
    ];

    /// Row of the classification table, 1 through 8.
    pub fn row(self) -> u8 {
        Regime::ALL.iter().position(|&r| r == self).unwrap() as u8 + 1
    }

    /// Defining inequality, in ASCII.
    pub fn condition(self) -> &'static str {
        match self {
            Regime::BothZero => "a=b=0",
            Regime::InfiniteB => "0<=a<=2b=inf",
            Regime::ShallowA => "0<=a<=2b<inf",
            Regime::ModerateA => "0<2b<a<=4b<inf",
            Regime::SteepA => "0<4b<a<inf",
            Regime::SteepInfiniteA => "0<4b<a=inf",
            Regime::ZeroB => "0=4b<a<inf",
            Regime::ZeroBInfiniteA => "0=4b<a=inf",
        }
    }

    pub fn class(self) -> KernelClass {
        use KernelSign as S;
        use Monotonicity as M;
        let (sign, monotonicity, gradient_energy_finite) = match self {
            Regime::BothZero => (S::IdenticallyZero, M::NotApplicable, true),
            Regime::InfiniteB => (S::Negative, M::StrictlyIncreasing, false),
            Regime::ShallowA => (S::Negative, M::StrictlyIncreasing, true),
            Regime::ModerateA => (S::Negative, M::NotMonotonous, true),
            Regime::SteepA => (S::SignChanging, M::NotMonotonous, true),
            Regime::SteepInfiniteA => (S::SignChanging, M::NotMonotonous, false),
            Regime::ZeroB => (S::Positive, M::StrictlyDecreasing, true),
            Regime::ZeroBInfiniteA => (S::Positive, M::StrictlyDecreasing, false),
        };
        KernelClass {
            regime: self,
            sign,
            monotonicity,
            gradient_energy_finite,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct KernelClass {
    pub regime: Regime,
    pub sign: KernelSign,
    pub monotonicity: Monotonicity,
    /// Whether ∫|∇K_{a,b}|² is finite.
    pub gradient_energy_finite: bool,
}

pub fn regime(p: KernelParams) -> Regime {
    use Screening::{Finite, Infinite};
    match (p.a, p.b) {
        (_, Infinite) => Regime::InfiniteB,
        (Finite(0.0), Finite(0.0)) => Regime::BothZero,
        (Finite(_), Finite(0.0)) => Regime::ZeroB,
        (Infinite, Finite(0.0)) => Regime::ZeroBInfiniteA,
        (Infinite, Finite(_)) => Regime::SteepInfiniteA,
        (Finite(a), Finite(b)) if a <= 2.0 * b => Regime::ShallowA,
        (Finite(a), Finite(b)) if a <= 4.0 * b => Regime::ModerateA,
        (Finite(_), Finite(_)) => Regime::SteepA,
    }
}

pub fn classify_kernel(p: KernelParams) -> KernelClass {
    regime(p).class()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelGeometryReport {
    /// Radii where k'_{a,b} = 0.
    pub critical_points: Vec<f64>,
    /// Positive radius where the numerator f of k' = f/(3r²) is stationary,
    /// r = log(a²/(4b²))/(a - b), when it exists.
    pub numerator_stationary_point: Option<f64>,
    /// lim_{r→0} k = (a - 4b)/3.
    pub value_at_zero: f64,
    /// lim_{r→0} k' = (4b² - a²)/6.
    pub slope_at_zero: f64,
    /// Radius where k changes sign (present iff 4b < a).
    pub sign_change_radius: Option<f64>,
}

const SCAN_POINTS: usize = 10_000;

fn log_grid(lo: f64, hi: f64) -> Vec<f64> {
    let (la, lb) = (lo.ln(), hi.ln());
    (0..SCAN_POINTS)
        .map(|i| (la + (lb - la) * i as f64 / (SCAN_POINTS - 1) as f64).exp())
        .collect()
}

fn bisect(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-3 * tol || mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// All sign changes of `f` on the grid, refined by bisection.
fn roots(f: &dyn Fn(f64) -> f64, grid: &[f64], tol: f64) -> Vec<f64> {
    let vals: Vec<f64> = grid.iter().map(|&r| f(r)).collect();
    let mut out = Vec::new();
    for i in 0..grid.len() - 1 {
        let (v0, v1) = (vals[i], vals[i + 1]);
        if v0 == 0.0 {
            out.push(grid[i]);
        } else if v0 * v1 < 0.0 {
            out.push(bisect(f, grid[i], grid[i + 1], tol));
        }
    }
    out
}

/// Locate the critical points, Taylor data and sign change of k_{a,b}.
pub fn analyze_geometry(p: KernelParams, tol: f64) -> Result<KernelGeometryReport> {
    let (a, b) = p
        .finite()
        .ok_or_else(|| Error::Domain(format!("geometry requires finite a and b, got {p}")))?;
    if a == 0.0 && b == 0.0 {
        return Err(Error::DegenerateKernel);
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let smallest = [a, b]
        .into_iter()
        .filter(|&c| c > 0.0)
        .fold(f64::INFINITY, f64::min);
    let scale = (1.0 / smallest).max(1.0);
    let grid = log_grid(1e-6 * scale, 1e3 * scale);

    let dk = |r: f64| derivative_numerator(a, b, r);
    let critical_points = roots(&dk, &grid, tol);

    let df = |r: f64| 4.0 * b * b * (-b * r).exp() - a * a * (-a * r).exp();
    let numerator_stationary_point = if a > 0.0 && b > 0.0 && a != b {
        roots(&df, &grid, tol).into_iter().next()
    } else {
        None
    };

    let sign_change_radius = if 4.0 * b < a {
        let k = |r: f64| kernel_value(p, r);
        roots(&k, &grid, tol).into_iter().next()
    } else {
        None
    };

    Ok(KernelGeometryReport {
        critical_points,
        numerator_stationary_point,
        value_at_zero: (a - 4.0 * b) / 3.0,
        slope_at_zero: (4.0 * b * b - a * a) / 6.0,
        sign_change_radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kp(a: f64, b: f64) -> KernelParams {
        KernelParams::new(a, b).unwrap()
    }

    #[test]
    fn singular_closed_forms() {
        let inf = f64::INFINITY;
        let r = 1.7;
        let e = |c: f64| (-c * r).exp();
        let cases = [
            (0.0, 0.0, 0.0),
            (0.0, 2.0, -4.0 / (3.0 * r) * (1.0 - e(2.0))),
            (0.0, inf, -4.0 / (3.0 * r)),
            (0.5, inf, -(1.0 + e(0.5) / 3.0) / r),
            (inf, inf, -1.0 / r),
            (inf, 0.7, (4.0 / 3.0 * e(0.7) - 1.0) / r),
            (inf, 0.0, 1.0 / (3.0 * r)),
            (1.3, 0.0, (1.0 - e(1.3)) / (3.0 * r)),
        ];
        for (a, b, want) in cases {
            let got = eval_kernel(kp(a, b), r).unwrap();
            assert!(
                (got - want).abs() <= 1e-15 * want.abs().max(1.0),
                "{a} {b}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn rejects_bad_radius() {
        assert!(eval_kernel(KernelParams::CHOQUARD, 0.0).is_err());
        assert!(eval_kernel(KernelParams::CHOQUARD, -1.0).is_err());
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        for (a, b) in [
            (6.0, 1.0),
            (1.0, 2.0),
            (0.0, 3.0),
            (f64::INFINITY, 1.0),
            (0.3, f64::INFINITY),
        ] {
            let p = kp(a, b);
            for r in [0.01, 0.3, 1.0, 4.0] {
                let h = 1e-6 * r;
                let fd = (kernel_value(p, r + h) - kernel_value(p, r - h)) / (2.0 * h);
                let d = kernel_derivative(p, r).unwrap();
                assert!(
                    (fd - d).abs() < 1e-6 * d.abs().max(1e-3),
                    "{p} r={r}: {fd} vs {d}"
                );
            }
        }
    }

    #[test]
    fn block_limits() {
        // k → 0 continuity for both the c = 0 and c > 0 blocks.
        for c in [Screening::ZERO, Screening::Finite(0.7)] {
            let g0 = screened_block(c, 0.0, 5.0);
            let g1 = screened_block(c, 1e-7, 5.0);
            assert!((g0 - g1).abs() < 1e-9 * g0);
        }
        assert_eq!(screened_block(Screening::ZERO, 0.0, 3.0), 2.0 * PI * 9.0);
        assert_eq!(screened_block(Screening::Infinite, 0.3, 3.0), 0.0);
        // small c·l series against the direct form
        let x: f64 = 0.02;
        let direct = -(-x).exp_m1() - x * (-x).exp();
        assert!((one_minus_exp_poly(x) - direct).abs() < 1e-15);
        let x: f64 = 0.0099;
        let direct = -(-x).exp_m1() - x * (-x).exp();
        assert!((one_minus_exp_poly(x) - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn regime_rows() {
        let inf = f64::INFINITY;
        let cases = [
            ((0.0, 0.0), 1),
            ((inf, inf), 2),
            ((0.0, inf), 2),
            ((1.0, 2.0), 3),
            ((2.0, 1.0), 3),
            ((0.0, 1.0), 3),
            ((3.0, 1.0), 4),
            ((4.0, 1.0), 4),
            ((5.0, 1.0), 5),
            ((inf, 1.0), 6),
            ((1.0, 0.0), 7),
            ((inf, 0.0), 8),
        ];
        for ((a, b), row) in cases {
            assert_eq!(regime(kp(a, b)).row(), row, "({a},{b})");
        }
    }

    #[test]
    fn degenerate_geometry() {
        assert!(matches!(
            analyze_geometry(KernelParams::ZERO, 1e-10),
            Err(Error::DegenerateKernel)
        ));
        assert!(analyze_geometry(KernelParams::CHOQUARD, 1e-10).is_err());
    }
}

//! Free-space convolution with radially truncated kernels.
//!
//! The kernel is truncated at radius `l_trunc` (at least the box diagonal),
//! so convolving box-supported densities on a grid doubled per axis has no
//! periodic images. The padded-grid multiplier is obtained once per kernel
//! by transforming the analytic truncated Fourier transform to real space on
//! a 4x oversampled frequency lattice, then back onto the padded grid.
//! Both steps are separable cosine sums over the folded (even) octant.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, LazyLock, Mutex};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::grid::Grid3;
use crate::kernel::{kernel_multiplier, screened_block, KernelParams, Screening};
use crate::par;

/// Which radial kernel to convolve with.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConvKernel {
    /// e^{-c r}/r
    Block(Screening),
    /// K_{a,b}
    Pair(KernelParams),
}

impl ConvKernel {
    fn multiplier(&self, k: f64, l: f64) -> f64 {
        match self {
            ConvKernel::Block(c) => screened_block(*c, k, l),
            ConvKernel::Pair(p) => kernel_multiplier(*p, k, l),
        }
    }

    /// True when the kernel vanishes identically.
    pub fn is_zero(&self) -> bool {
        match self {
            ConvKernel::Block(c) => c.is_infinite(),
            ConvKernel::Pair(p) => p.is_zero(),
        }
    }

    fn key(&self) -> [u64; 3] {
        let bits = |s: &Screening| s.finite().map(f64::to_bits).unwrap_or(u64::MAX);
        match self {
            ConvKernel::Block(c) => [0, bits(c), 0],
            ConvKernel::Pair(p) => [1, bits(&p.a), bits(&p.b)],
        }
    }
}

type CacheKey = ([u64; 3], usize, u64, u64);

static OPERATORS: LazyLock<Mutex<HashMap<CacheKey, Arc<FreeSpaceOperator>>>> =
    LazyLock::new(Default::default);

/// Convolution with a truncated radial kernel for densities supported in the box.
pub struct FreeSpaceOperator {
    grid: Grid3,
    kernel: ConvKernel,
    l_trunc: f64,
    /// Padded-grid multiplier on the folded octant, (n+1)³ entries.
    folded: Vec<f64>,
    fft: Arc<Fft3>,
}

/// `dst = M ·_axis src` for a 3-D array `src` of shape `dims` (first index
/// fastest); `mat` has `out` rows of length `dims[axis]`.
pub(crate) fn contract(
    src: &[f64],
    dims: [usize; 3],
    axis: usize,
    mat: &[f64],
    out: usize,
) -> (Vec<f64>, [usize; 3]) {
    let inn = dims[axis];
    let mut nd = dims;
    nd[axis] = out;
    let mut dst = vec![0.0; nd[0] * nd[1] * nd[2]];
    match axis {
        2 => {
            let slab = dims[0] * dims[1];
            par::for_each_chunk(&mut dst, slab, |o, d| {
                for j in 0..inn {
                    let w = mat[o * inn + j];
                    for (x, s) in d.iter_mut().zip(&src[j * slab..(j + 1) * slab]) {
                        *x += w * s;
                    }
                }
            });
        }
        1 => {
            let (s0, s1) = (dims[0], dims[1]);
            par::for_each_chunk(&mut dst, s0 * out, |i2, d| {
                let base = &src[i2 * s0 * s1..(i2 + 1) * s0 * s1];
                for o in 0..out {
                    let row = &mut d[o * s0..(o + 1) * s0];
                    for j in 0..inn {
                        let w = mat[o * inn + j];
                        for (x, s) in row.iter_mut().zip(&base[j * s0..(j + 1) * s0]) {
                            *x += w * s;
                        }
                    }
                }
            });
        }
        _ => {
            let s0 = dims[0];
            let rows = dims[1] * dims[2];
            par::for_each_chunk(&mut dst, out * dims[1], |c, d| {
                for r in 0..dims[1] {
                    let row = c * dims[1] + r;
                    debug_assert!(row < rows);
                    let s = &src[row * s0..(row + 1) * s0];
                    for o in 0..out {
                        d[r * out + o] = mat[o * inn..(o + 1) * inn]
                            .iter()
                            .zip(s)
                            .map(|(w, v)| w * v)
                            .sum();
                    }
                }
            });
        }
    }
    (dst, nd)
}

fn contract_all(src: &[f64], side: usize, mat: &[f64], out: usize) -> Vec<f64> {
    let (t, d) = contract(src, [side; 3], 2, mat, out);
    let (t, d) = contract(&t, d, 1, mat, out);
    contract(&t, d, 0, mat, out).0
}

impl FreeSpaceOperator {
    /// Operator for `kernel` on `grid`, shared through a process-wide cache.
    pub fn get(grid: Grid3, l_trunc: f64, kernel: ConvKernel) -> Result<Arc<Self>> {
        if l_trunc < grid.diagonal() * (1.0 - 1e-12) || l_trunc > 3.0 * grid.box_length() {
            return Err(Error::Domain(format!(
                "truncation radius {l_trunc} must lie between the box diagonal {} and 3L",
                grid.diagonal()
            )));
        }
        let key = (
            kernel.key(),
            grid.n(),
            grid.box_length().to_bits(),
            l_trunc.to_bits(),
        );
        if let Some(op) = OPERATORS.lock().unwrap().get(&key) {
            return Ok(op.clone());
        }
        let op = Arc::new(Self::build(grid, l_trunc, kernel));
        Ok(OPERATORS.lock().unwrap().entry(key).or_insert(op).clone())
    }

    fn build(grid: Grid3, l_trunc: f64, kernel: ConvKernel) -> Self {
        let n = grid.n();
        let h = grid.spacing();
        let fft = Fft3::cached(2 * n);
        if kernel.is_zero() {
            return FreeSpaceOperator {
                grid,
                kernel,
                l_trunc,
                folded: vec![0.0; (n + 1).pow(3)],
                fft,
            };
        }
        // Real-space kernel on the octant of offsets [0, n]³, from the
        // analytic multiplier sampled on a lattice of period 4L.
        let nf = 2 * n + 1;
        let period = 4.0 * n as f64 * h;
        let dk = 2.0 * PI / period;
        let w = |j: usize| if j == 0 || j == 2 * n { 1.0 } else { 2.0 };
        // The multiplier depends on j0² + j1² + j2² only.
        let table = par::map(3 * (nf - 1) * (nf - 1) + 1, |s| {
            kernel.multiplier(dk * (s as f64).sqrt(), l_trunc)
        });
        let samples: Vec<f64> = par::map(nf * nf * nf, |i| {
            let (j0, j1, j2) = (i % nf, (i / nf) % nf, i / (nf * nf));
            table[j0 * j0 + j1 * j1 + j2 * j2] * w(j0) * w(j1) * w(j2)
        });
        let cos1: Vec<f64> = (0..=n)
            .flat_map(|d| (0..nf).map(move |j| (2.0 * PI * (j * d) as f64 / (4 * n) as f64).cos()))
            .collect();
        let real = contract_all(&samples, nf, &cos1, n + 1);
        // Even extension onto the padded grid and its transform, h³ included.
        let scale = h.powi(3) / period.powi(3);
        let cos2: Vec<f64> = (0..=n)
            .flat_map(|q| (0..=n).map(move |d| w2(d, n) * (PI * (q * d) as f64 / n as f64).cos()))
            .collect();
        let folded = contract_all(&real, n + 1, &cos2, n + 1)
            .into_iter()
            .map(|v| v * scale)
            .collect();
        FreeSpaceOperator {
            grid,
            kernel,
            l_trunc,
            folded,
            fft,
        }
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn kernel(&self) -> ConvKernel {
        self.kernel
    }

    pub fn l_trunc(&self) -> f64 {
        self.l_trunc
    }

    /// Multiplier at padded-grid frequency indices (each in `0..2n`).
    pub fn multiplier_at(&self, q: [usize; 3]) -> f64 {
        let n = self.grid.n();
        let f = |i: usize| if i <= n { i } else { 2 * n - i };
        self.folded[f(q[0]) + (n + 1) * (f(q[1]) + (n + 1) * f(q[2]))]
    }

    /// `(K * ρ)` at the box points.
    pub fn potential(&self, rho: &[f64], ws: &mut PaddedWorkspace) -> Vec<f64> {
        let n = self.grid.n();
        let nn = 2 * n;
        ws.load(rho, None);
        self.fft.forward_z_major(&mut ws.data, &mut ws.spec, n);
        par::for_each_chunk(&mut ws.spec, nn * nn, |y, slab| {
            for x in 0..nn {
                for z in 0..nn {
                    slab[z + nn * x] *= self.multiplier_at([x, y, z]);
                }
            }
        });
        self.fft.inverse_z_major(&mut ws.spec, &mut ws.data, n);
        ws.crop().0
    }

    /// h³·Σ ρ(K * ρ).
    pub fn energy(&self, rho: &[f64], ws: &mut PaddedWorkspace) -> f64 {
        let phi = self.potential(rho, ws);
        self.grid.cell_volume() * par::sum(rho.len(), |i| rho[i] * phi[i])
    }
}

fn w2(d: usize, n: usize) -> f64 {
    if d == 0 || d == n {
        1.0
    } else {
        2.0
    }
}

/// Scratch buffers on the doubled grid. Not shared between concurrent calls.
pub struct PaddedWorkspace {
    n: usize,
    data: Vec<Complex64>,
    spec: Vec<Complex64>,
}

impl PaddedWorkspace {
    pub fn new(grid: &Grid3) -> Self {
        let m = (2 * grid.n()).pow(3);
        PaddedWorkspace {
            n: grid.n(),
            data: vec![Complex64::default(); m],
            spec: vec![Complex64::default(); m],
        }
    }

    /// Write `re + i·im` into the low octant; the rest of the first n planes
    /// is cleared. Planes z ≥ n are never written and stay zero.
    fn load(&mut self, re: &[f64], im: Option<&[f64]>) {
        let n = self.n;
        let nn = 2 * n;
        assert_eq!(re.len(), n * n * n, "field does not match workspace grid");
        par::for_each_chunk(&mut self.data[..n * nn * nn], nn * nn, |z, plane| {
            plane.fill(Complex64::default());
            for y in 0..n {
                for x in 0..n {
                    let i = x + n * (y + n * z);
                    plane[x + nn * y] = Complex64::new(re[i], im.map_or(0.0, |v| v[i]));
                }
            }
        });
    }

    /// Real and imaginary parts of the low octant, divided by (2n)³.
    fn crop(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let nn = 2 * n;
        let s = 1.0 / (nn * nn * nn) as f64;
        let pick = |i: usize| {
            let (x, y, z) = (i % n, (i / n) % n, i / (n * n));
            self.data[x + nn * (y + nn * z)] * s
        };
        let vals: Vec<Complex64> = par::map(n * n * n, pick);
        (
            vals.iter().map(|c| c.re).collect(),
            vals.iter().map(|c| c.im).collect(),
        )
    }
}

/// `-Δu` with the Laplacian of the zero-padded field on the doubled grid,
/// and `K * u²` when an operator is given, from one forward and one inverse
/// transform of `u + i·u²`.
pub fn isolated_apply(
    grid: &Grid3,
    op: Option<&FreeSpaceOperator>,
    u: &[f64],
    ws: &mut PaddedWorkspace,
) -> (Vec<f64>, Option<Vec<f64>>) {
    let n = grid.n();
    let nn = 2 * n;
    let fft = Fft3::cached(nn);
    let rho: Vec<f64> = u.iter().map(|v| v * v).collect();
    ws.load(u, op.map(|_| rho.as_slice()));
    fft.forward_z_major(&mut ws.data, &mut ws.spec, n);

    let dk = 2.0 * PI / (2.0 * grid.box_length());
    let k2: Vec<f64> = (0..nn)
        .map(|i| (dk * Grid3::signed_index(i, nn) as f64).powi(2))
        .collect();
    let neg = |i: usize| (nn - i) % nn;
    let slabs: Vec<&mut [Complex64]> = ws.spec.chunks_mut(nn * nn).collect();
    let mut slabs: Vec<Option<&mut [Complex64]>> = slabs.into_iter().map(Some).collect();
    let mut pairs = Vec::new();
    for y in 0..=nn / 2 {
        let a = slabs[y].take().unwrap();
        let b = if neg(y) != y {
            slabs[neg(y)].take()
        } else {
            None
        };
        pairs.push((y, a, b));
    }
    // W(q) = ((k²+M)/2)Z(q) + ((k²-M)/2)conj Z(-q), which transforms back to
    // -Δu + i(K * u²).
    let coeffs = |x: usize, y: usize, z: usize| {
        let kk = k2[x] + k2[y] + k2[z];
        let m = op.map_or(0.0, |o| o.multiplier_at([x, y, z]));
        (0.5 * (kk + m), 0.5 * (kk - m))
    };
    let work = |(y, a, b): (usize, &mut [Complex64], Option<&mut [Complex64]>)| match b {
        Some(b) => {
            for x in 0..nn {
                for z in 0..nn {
                    let i = z + nn * x;
                    let j = neg(z) + nn * neg(x);
                    let (zq, zm) = (a[i], b[j]);
                    let (al, be) = coeffs(x, y, z);
                    a[i] = zq * al + zm.conj() * be;
                    b[j] = zm * al + zq.conj() * be;
                }
            }
        }
        None => {
            for x in 0..nn {
                for z in 0..nn {
                    let i = z + nn * x;
                    let j = neg(z) + nn * neg(x);
                    if j < i {
                        continue;
                    }
                    let (zq, zm) = (a[i], a[j]);
                    let (al, be) = coeffs(x, y, z);
                    a[i] = zq * al + zm.conj() * be;
                    if j != i {
                        a[j] = zm * al + zq.conj() * be;
                    }
                }
            }
        }
    };
    let items: Vec<_> = pairs.into_iter().map(Some).collect();
    par_each(items, work);
    fft.inverse_z_major(&mut ws.spec, &mut ws.data, n);
    let (lap, phi) = ws.crop();
    (lap, op.map(|_| phi))
}

fn par_each<T: Send>(mut items: Vec<Option<T>>, f: impl Fn(T) + Sync + Send) {
    par::for_each_chunk(&mut items, 1, |_, c| {
        if let Some(t) = c[0].take() {
            f(t)
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radial_energy(s: f64, k2_khat: impl Fn(f64) -> f64) -> f64 {
        // (2π)^{-3}∫|ρ̂|²K̂ d³k, given k²K̂(k) for ρ = e^{-r²/2s²}, composite Simpson in k.
        let (kmax, m) = (40.0 / s, 20000);
        let dk = kmax / m as f64;
        let f = |k: f64| {
            let rho_hat = (2.0 * PI * s * s).powf(1.5) * (-0.5 * k * k * s * s).exp();
            rho_hat * rho_hat * k2_khat(k)
        };
        let mut acc = f(0.0) + f(kmax);
        for i in 1..m {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * dk);
        }
        acc * dk / 3.0 / (2.0 * PI * PI)
    }

    #[test]
    fn screened_difference_matches_radial_quadrature() {
        // (1 - e^{-r})/r is the difference of the c = 0 and c = 1 blocks, with
        // transform 4π/(k²(k²+1)).
        let grid = Grid3::new(32, 16.0).unwrap();
        let l = grid.diagonal();
        let s = 1.2;
        let rho: Vec<f64> = (0..grid.len())
            .map(|i| {
                let p = grid.position(i);
                (-(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) / (2.0 * s * s)).exp()
            })
            .collect();
        let mut ws = PaddedWorkspace::new(&grid);
        let d0 = FreeSpaceOperator::get(grid, l, ConvKernel::Block(Screening::ZERO))
            .unwrap()
            .energy(&rho, &mut ws);
        let d1 = FreeSpaceOperator::get(grid, l, ConvKernel::Block(Screening::Finite(1.0)))
            .unwrap()
            .energy(&rho, &mut ws);
        let exact0 = radial_energy(s, |_| 4.0 * PI);
        let exact = radial_energy(s, |k| 4.0 * PI / (1.0 + k * k));
        assert!((d0 - exact0).abs() < 1e-8 * exact0, "{d0} vs {exact0}");
        assert!(
            ((d0 - d1) - exact).abs() < 1e-8 * exact,
            "{} vs {exact}",
            d0 - d1
        );
    }

    #[test]
    fn packed_apply_matches_separate_potential() {
        let grid = Grid3::new(8, 10.0).unwrap();
        let u: Vec<f64> = (0..grid.len())
            .map(|i| {
                let p = grid.position(i);
                (-(p[0] * p[0] + 2.0 * p[1] * p[1] + (p[2] - 0.5).powi(2)) / 4.0).exp()
            })
            .collect();
        let rho: Vec<f64> = u.iter().map(|v| v * v).collect();
        let op = FreeSpaceOperator::get(
            grid,
            grid.diagonal(),
            ConvKernel::Pair(KernelParams::CHOQUARD),
        )
        .unwrap();
        let mut ws = PaddedWorkspace::new(&grid);
        let phi = op.potential(&rho, &mut ws);
        let (lap, phi2) = isolated_apply(&grid, Some(&op), &u, &mut ws);
        let phi2 = phi2.unwrap();
        for (a, b) in phi.iter().zip(&phi2) {
            assert!((a - b).abs() < 1e-12 * phi.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
        let (lap_only, none) = isolated_apply(&grid, None, &u, &mut ws);
        assert!(none.is_none());
        for (a, b) in lap.iter().zip(&lap_only) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

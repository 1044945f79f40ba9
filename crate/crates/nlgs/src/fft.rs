//! Cubic 3-D complex FFT built from rustfft line transforms.
//!
//! Arrays are stored x-fastest: `idx = x + n*(y + n*z)`. The convolution
//! routines keep spectra in a z-major layout, `idx = z + n*(x + n*y)`, which
//! saves one transpose in each direction, and they skip lines that are known
//! to be zero (zero-padded input) or not needed (cropped output).

use std::collections::HashMap;
use std::sync::{Arc, LazyLock, Mutex};

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::par;

pub struct Fft3 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

static PLANS: LazyLock<Mutex<HashMap<usize, Arc<Fft3>>>> = LazyLock::new(Default::default);

impl Fft3 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft3 {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    /// Shared plan for size `n`.
    pub fn cached(n: usize) -> Arc<Fft3> {
        let mut plans = PLANS.lock().unwrap();
        plans
            .entry(n)
            .or_insert_with(|| Arc::new(Fft3::new(n)))
            .clone()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn plan(&self, dir: FftDirection) -> &Arc<dyn Fft<f64>> {
        match dir {
            FftDirection::Forward => &self.fwd,
            FftDirection::Inverse => &self.inv,
        }
    }

    /// x and y line transforms on the first `planes` z-planes. Only rows
    /// `y < rows` take part in the x transform.
    fn xy_pass(&self, data: &mut [Complex64], dir: FftDirection, rows: usize, planes: usize) {
        let n = self.n;
        let plan = self.plan(dir);
        par::for_each_chunk(&mut data[..planes * n * n], n * n, |_, plane| {
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            let mut cols = vec![Complex64::default(); n * n];
            let x_lines = |plane: &mut [Complex64], scratch: &mut [Complex64]| {
                plan.process_with_scratch(&mut plane[..rows * n], scratch);
            };
            if dir == FftDirection::Forward {
                x_lines(plane, &mut scratch);
            }
            for y in 0..n {
                for x in 0..n {
                    cols[x * n + y] = plane[x + n * y];
                }
            }
            plan.process_with_scratch(&mut cols, &mut scratch);
            for y in 0..n {
                for x in 0..n {
                    plane[x + n * y] = cols[x * n + y];
                }
            }
            if dir == FftDirection::Inverse {
                x_lines(plane, &mut scratch);
            }
        });
    }

    /// `zmaj[z + n*(x + n*y)] = data[x + n*(y + n*z)]`.
    fn to_z_major(&self, data: &[Complex64], zmaj: &mut [Complex64]) {
        let n = self.n;
        par::for_each_chunk(zmaj, n * n, |y, slab| {
            for z in 0..n {
                let row = &data[n * (y + n * z)..n * (y + n * z) + n];
                for (x, v) in row.iter().enumerate() {
                    slab[z + n * x] = *v;
                }
            }
        });
    }

    /// Inverse of [`Self::to_z_major`] for the first `planes` z-planes.
    fn scatter_z_major(&self, zmaj: &[Complex64], data: &mut [Complex64], planes: usize) {
        let n = self.n;
        par::for_each_chunk(&mut data[..planes * n * n], n * n, |z, plane| {
            for y in 0..n {
                for x in 0..n {
                    plane[x + n * y] = zmaj[z + n * (x + n * y)];
                }
            }
        });
    }

    fn z_pass(&self, zmaj: &mut [Complex64], dir: FftDirection) {
        let n = self.n;
        let plan = self.plan(dir);
        par::for_each_chunk(zmaj, n * n, |_, slab| {
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            plan.process_with_scratch(slab, &mut scratch);
        });
    }

    /// Forward transform of `data` into `zmaj` (z-major layout). Entries of
    /// `data` with `y >= active` or `z >= active` must be zero; `data` is
    /// overwritten with intermediate values in its first `active` planes.
    pub fn forward_z_major(&self, data: &mut [Complex64], zmaj: &mut [Complex64], active: usize) {
        assert_eq!(data.len(), self.len());
        assert_eq!(zmaj.len(), self.len());
        self.xy_pass(data, FftDirection::Forward, active, active);
        self.to_z_major(data, zmaj);
        self.z_pass(zmaj, FftDirection::Forward);
    }

    /// Unnormalized inverse transform of the z-major spectrum `zmaj` into
    /// `data`. Only entries with `y < keep` and `z < keep` of `data` are
    /// valid afterwards; planes `z >= keep` are left untouched. `zmaj` is
    /// destroyed.
    pub fn inverse_z_major(&self, zmaj: &mut [Complex64], data: &mut [Complex64], keep: usize) {
        assert_eq!(data.len(), self.len());
        assert_eq!(zmaj.len(), self.len());
        self.z_pass(zmaj, FftDirection::Inverse);
        self.scatter_z_major(zmaj, data, keep);
        self.xy_pass(data, FftDirection::Inverse, keep, keep);
    }

    /// In-place forward transform in the standard layout.
    pub fn forward(&self, data: &mut [Complex64]) {
        let mut zmaj = vec![Complex64::default(); self.len()];
        self.forward_z_major(data, &mut zmaj, self.n);
        self.scatter_z_major(&zmaj, data, self.n);
    }

    /// In-place inverse transform in the standard layout, scaled by 1/n³.
    pub fn inverse(&self, data: &mut [Complex64]) {
        let mut zmaj = vec![Complex64::default(); self.len()];
        self.to_z_major(data, &mut zmaj);
        self.inverse_z_major(&mut zmaj, data, self.n);
        let s = 1.0 / self.len() as f64;
        par::for_each_chunk(data, self.n * self.n, |_, c| {
            c.iter_mut().for_each(|v| *v *= s)
        });
    }
}

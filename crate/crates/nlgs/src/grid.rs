//! Cubic grids, real fields on them, spectral transforms and norms, and the
//! binary field format.
//!
//! The box is [-L/2, L/2)³ sampled at `x_i = -L/2 + i·h`, `h = L/n`.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid3 {
    n: usize,
    box_length: f64,
}

impl Grid3 {
    pub fn new(n: usize, box_length: f64) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "n must be even and at least 8, got {n}"
            )));
        }
        if !(box_length > 0.0 && box_length.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "box length must be positive, got {box_length}"
            )));
        }
        Ok(Grid3 { n, box_length })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    /// Number of grid points, n³.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Length of the box diagonal, √3·L.
    pub fn diagonal(&self) -> f64 {
        3f64.sqrt() * self.box_length
    }

    pub fn coord(&self, i: usize) -> f64 {
        -0.5 * self.box_length + i as f64 * self.spacing()
    }

    /// Signed frequency index of position `i` in a length-`n` transform.
    pub fn signed_index(i: usize, n: usize) -> i64 {
        if i <= n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// Angular wavenumber 2πm/L of spectral index `i`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        2.0 * PI * Self::signed_index(i, self.n) as f64 / self.box_length
    }

    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.n * (y + self.n * z)
    }

    pub fn position(&self, idx: usize) -> [f64; 3] {
        let n = self.n;
        [
            self.coord(idx % n),
            self.coord((idx / n) % n),
            self.coord(idx / (n * n)),
        ]
    }

    /// |k|² for every spectral index, in standard layout.
    pub fn k_squared(&self) -> Vec<f64> {
        let k2: Vec<f64> = (0..self.n).map(|i| self.wavenumber(i).powi(2)).collect();
        let n = self.n;
        (0..self.len())
            .map(|i| k2[i % n] + k2[(i / n) % n] + k2[i / (n * n)])
            .collect()
    }
}

/// A real function sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid3,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid3, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} grid points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("field value {v} is not finite")));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: Grid3) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    /// Sample `f(x, y, z)` at the grid points.
    pub fn from_fn(grid: Grid3, f: impl Fn([f64; 3]) -> f64 + Sync + Send) -> Self {
        let values = par::map(grid.len(), |i| f(grid.position(i)));
        Field { grid, values }
    }

    pub(crate) fn from_raw(grid: Grid3, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field { grid, values }
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// h³·Σ u².
    pub fn mass(&self) -> f64 {
        self.grid.cell_volume() * par::sum(self.values.len(), |i| self.values[i] * self.values[i])
    }

    /// L² inner product h³·Σ u·v.
    pub fn dot(&self, other: &Field) -> f64 {
        self.grid.cell_volume() * par::sum(self.values.len(), |i| self.values[i] * other.values[i])
    }

    pub fn scaled(&self, s: f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &Field) -> Field {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + s * b)
            .collect();
        Field {
            grid: self.grid,
            values,
        }
    }

    /// Copy rescaled to mass `mu`.
    pub fn normalized(&self, mu: f64) -> Field {
        let m = self.mass();
        self.scaled((mu / m).sqrt())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Grid index of the largest |u|, first one on ties.
    pub fn argmax_abs(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if v.abs() > self.values[best].abs() {
                best = i;
            }
        }
        best
    }

    /// Periodic shift by whole cells: the value at index `i` moves to `i + shift`.
    pub fn rolled(&self, shift: [i64; 3]) -> Field {
        let n = self.grid.n as i64;
        let w = |i: usize, s: i64| ((i as i64 - s).rem_euclid(n)) as usize;
        let values = (0..self.values.len())
            .map(|idx| {
                let (x, y, z) = (
                    idx % n as usize,
                    (idx / n as usize) % n as usize,
                    idx / (n * n) as usize,
                );
                self.values[self
                    .grid
                    .index(w(x, shift[0]), w(y, shift[1]), w(z, shift[2]))]
            })
            .collect();
        Field {
            grid: self.grid,
            values,
        }
    }

    /// Fraction of the mass within `cells` grid cells of the box faces.
    pub fn edge_mass_fraction(&self, cells: usize) -> f64 {
        let n = self.grid.n;
        let near = |i: usize| i < cells || i >= n - cells;
        let total: f64 = self.values.iter().map(|v| v * v).sum();
        let edge: f64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| near(i % n) || near((i / n) % n) || near(i / (n * n)))
            .map(|(_, v)| v * v)
            .sum();
        if total > 0.0 {
            edge / total
        } else {
            0.0
        }
    }

    /// ∫|x - c|²u² / ∫u² about the box centre.
    pub fn second_moment(&self) -> f64 {
        let g = self.grid;
        let num = par::sum(self.values.len(), |i| {
            let p = g.position(i);
            (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) * self.values[i] * self.values[i]
        });
        let den = par::sum(self.values.len(), |i| self.values[i] * self.values[i]);
        num / den
    }
}

/// Unnormalized DFT, `F_k = Σ_j f_j e^{-2πi k·j/n}`, in standard layout.
pub fn transform(f: &Field) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    Fft3::cached(f.grid.n).forward(&mut data);
    data
}

/// Inverse of [`transform`]; the imaginary part is discarded.
pub fn inverse_transform(grid: Grid3, spectrum: &[Complex64]) -> Result<Field> {
    if spectrum.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "{} coefficients for {} grid points",
            spectrum.len(),
            grid.len()
        )));
    }
    let mut data = spectrum.to_vec();
    Fft3::cached(grid.n).inverse(&mut data);
    Field::new(grid, data.into_iter().map(|c| c.re).collect())
}

/// (h³·Σ|f|^p)^{1/p}.
pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!(
            "norm exponent must be finite and >= 1, got {p}"
        )));
    }
    let s = par::sum(f.values.len(), |i| f.values[i].abs().powf(p));
    Ok((f.grid.cell_volume() * s).powf(1.0 / p))
}

/// h³/n³·Σ|F_k|², equal to the mass by Parseval.
pub fn spectral_mass(f: &Field) -> f64 {
    let spec = transform(f);
    f.grid.cell_volume() / f.grid.len() as f64 * spec.iter().map(|c| c.norm_sqr()).sum::<f64>()
}

/// Spectral ∫|∇f|² on the periodic box.
pub fn dirichlet_energy(f: &Field) -> f64 {
    let spec = transform(f);
    let k2 = f.grid.k_squared();
    let s: f64 = spec.iter().zip(&k2).map(|(c, k)| k * c.norm_sqr()).sum();
    f.grid.cell_volume() / f.grid.len() as f64 * s
}

/// Share of the spectral power at wavenumbers above half the Nyquist
/// frequency along any axis.
pub fn top_octave_fraction(f: &Field) -> f64 {
    let spec = transform(f);
    let n = f.grid.n;
    let high = |i: usize| Grid3::signed_index(i, n).unsigned_abs() as usize > n / 4;
    let mut top = 0.0;
    let mut total = 0.0;
    for (i, c) in spec.iter().enumerate() {
        let p = c.norm_sqr();
        total += p;
        if high(i % n) || high((i / n) % n) || high(i / (n * n)) {
            top += p;
        }
    }
    if total > 0.0 {
        top / total
    } else {
        0.0
    }
}

/// Mass share above which a field counts as unresolved.
pub const RESOLUTION_THRESHOLD: f64 = 0.01;

pub fn is_resolved(f: &Field) -> bool {
    top_octave_fraction(f) <= RESOLUTION_THRESHOLD
}

const MAGIC: &[u8; 4] = b"NLGS";
const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 32;

/// Binary encoding: 32-byte header (`NLGS`, u32 version, u64 n, f64 box
/// length, 8 zero bytes) followed by n³ little-endian f64 values, x fastest.
pub fn encode_field(f: &Field) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * f.values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(f.grid.n as u64).to_le_bytes());
    out.extend_from_slice(&f.grid.box_length.to_le_bytes());
    out.extend_from_slice(&[0u8; 8]);
    for v in &f.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_field(bytes: &[u8]) -> Result<Field> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing NLGS header".into()));
    }
    let word = |r: std::ops::Range<usize>| -> [u8; 8] { bytes[r].try_into().unwrap() };
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(word(8..16)) as usize;
    let box_length = f64::from_le_bytes(word(16..24));
    let grid = Grid3::new(n, box_length)?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 8 * grid.len() {
        return Err(Error::Format(format!(
            "expected {} value bytes, found {}",
            8 * grid.len(),
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Field::new(grid, values)
}

/// Write `bytes` to a sibling temp file, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_field(path: &Path, f: &Field) -> Result<()> {
    write_atomic(path, &encode_field(f))
}

pub fn read_field(path: &Path) -> Result<Field> {
    decode_field(&fs::read(path)?)
}

/// Spherical average of `f` about `center` in shells of width h.
/// Returns (mean radius, mean value) for every non-empty shell.
pub fn radial_profile(f: &Field, center: [f64; 3]) -> Vec<(f64, f64)> {
    let g = f.grid;
    let h = g.spacing();
    let shells = (g.diagonal() / h).ceil() as usize + 1;
    let mut acc = vec![(0.0, 0.0, 0usize); shells];
    for (i, v) in f.values.iter().enumerate() {
        let p = g.position(i);
        let r =
            ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2) + (p[2] - center[2]).powi(2))
                .sqrt();
        let s = ((r / h) as usize).min(shells - 1);
        acc[s].0 += r;
        acc[s].1 += v;
        acc[s].2 += 1;
    }
    acc.into_iter()
        .filter(|a| a.2 > 0)
        .map(|(r, v, c)| (r / c as f64, v / c as f64))
        .collect()
}

pub fn radial_profile_csv(profile: &[(f64, f64)]) -> String {
    let mut s = String::from("r,value\n");
    for (r, v) in profile {
        s.push_str(&format!("{r:.17e},{v:.17e}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid3::new(6, 1.0).is_err());
        assert!(Grid3::new(9, 1.0).is_err());
        assert!(Grid3::new(8, 0.0).is_err());
        assert!(Grid3::new(8, 1.0).is_ok());
    }

    #[test]
    fn roll_moves_values() {
        let g = Grid3::new(8, 8.0).unwrap();
        let mut v = vec![0.0; g.len()];
        v[g.index(1, 2, 3)] = 1.0;
        let f = Field::new(g, v).unwrap().rolled([2, -3, 7]);
        assert_eq!(f.argmax_abs(), g.index(3, 7, 2));
    }

    #[test]
    fn binary_round_trip() {
        let g = Grid3::new(8, 3.5).unwrap();
        let f = Field::from_fn(g, |p| p[0] - 2.0 * p[1] + p[2] * p[2]);
        let bytes = encode_field(&f);
        assert_eq!(bytes.len(), 32 + 8 * 512);
        assert_eq!(&bytes[..4], b"NLGS");
        assert_eq!(decode_field(&bytes).unwrap(), f);
        assert!(decode_field(&bytes[..100]).is_err());
    }
}

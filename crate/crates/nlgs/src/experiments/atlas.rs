//! Classification and geometry of K_{a,b} over a grid of (a, b).

use serde::Serialize;

use crate::error::Result;
use crate::kernel::{
    analyze_geometry, classify_kernel, KernelClass, KernelGeometryReport, KernelParams, Screening,
};
use crate::par;

/// Root tolerance used for the geometry of every cell.
pub const GEOMETRY_TOL: f64 = 1e-12;

pub const ATLAS_HEADER: &str = "a,b,regime,sign,monotonicity,grad_energy_finite,r1,value_at_zero,slope_at_zero,sign_change_radius,critical_points";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AtlasCell {
    pub params: KernelParams,
    pub class: KernelClass,
    /// Absent when a or b is infinite, or a = b = 0.
    pub geometry: Option<KernelGeometryReport>,
}

impl AtlasCell {
    pub fn csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.12e}")).unwrap_or_default();
        let g = self.geometry.as_ref();
        let crit = g
            .map(|g| {
                g.critical_points
                    .iter()
                    .map(|r| format!("{r:.12e}"))
                    .collect::<Vec<_>>()
                    .join(";")
            })
            .unwrap_or_default();
        format!(
            "{},{},{},{:?},{:?},{},{},{},{},{},{}",
            self.params.a,
            self.params.b,
            self.class.regime.condition(),
            self.class.sign,
            self.class.monotonicity,
            self.class.gradient_energy_finite,
            opt(g.and_then(|g| g.numerator_stationary_point)),
            opt(g.map(|g| g.value_at_zero)),
            opt(g.map(|g| g.slope_at_zero)),
            opt(g.and_then(|g| g.sign_change_radius)),
            crit,
        )
    }
}

pub fn atlas_cell(p: KernelParams) -> Result<AtlasCell> {
    let geometry = match p.finite() {
        Some((a, b)) if a > 0.0 || b > 0.0 => Some(analyze_geometry(p, GEOMETRY_TOL)?),
        _ => None,
    };
    Ok(AtlasCell {
        params: p,
        class: classify_kernel(p),
        geometry,
    })
}

/// Every (a, b) in the product of the two grids, a varying slowest.
pub fn atlas_sweep(a_grid: &[Screening], b_grid: &[Screening]) -> Result<Vec<AtlasCell>> {
    let cells: Vec<KernelParams> = a_grid
        .iter()
        .flat_map(|&a| b_grid.iter().map(move |&b| KernelParams { a, b }))
        .collect();
    par::map(cells.len(), |i| atlas_cell(cells[i]))
        .into_iter()
        .collect()
}

pub fn atlas_csv(cells: &[AtlasCell]) -> String {
    let mut s = String::from(ATLAS_HEADER);
    s.push('\n');
    for c in cells {
        s.push_str(&c.csv_row());
        s.push('\n');
    }
    s
}

/// One point inside each of the eight regions, then the two boundaries
/// a = 2b and a = 4b.
pub fn representative_points() -> Vec<KernelParams> {
    let inf = f64::INFINITY;
    [
        (0.0, 0.0),
        (1.0, inf),
        (1.0, 2.0),
        (3.0, 1.0),
        (5.0, 1.0),
        (inf, 1.0),
        (1.0, 0.0),
        (inf, 0.0),
        (2.0, 1.0),
        (4.0, 1.0),
    ]
    .into_iter()
    .map(|(a, b)| KernelParams::new(a, b).expect("valid representative"))
    .collect()
}

/// A default sweep grid: 0, a geometric ladder and ∞.
pub fn default_grid() -> Vec<Screening> {
    let mut g = vec![Screening::ZERO];
    g.extend([0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0].map(Screening::Finite));
    g.push(Screening::Infinite);
    g
}

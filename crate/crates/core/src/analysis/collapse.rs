use std::fmt;

use rayon::prelude::*;

use super::MetricFamily;
use crate::config::Constants;
use crate::error::{Error, Result};
use crate::field::{Region, ScalarField};
use crate::geom::Point;
use crate::metric::ConformalMetric;
use crate::norms::{jn_radius, Ladder};

/// The two alternatives for a sequence with bounded area and curvature:
/// the factors stay bounded, or they drift to `-∞` and the metric collapses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollapseVerdict {
    Bounded,
    Collapsing,
}

impl fmt::Display for CollapseVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CollapseVerdict::Bounded => "a",
            CollapseVerdict::Collapsing => "b",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseRow {
    pub k: u32,
    /// Mean of `u_k` over `D_{1/4}`.
    pub c: f64,
    /// `μ(D_r, g_k)` and `diam(D_r, g_k)`, filled in for verdict (b).
    pub area: Option<f64>,
    pub diameter: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollapseReport {
    pub verdict: CollapseVerdict,
    pub rows: Vec<CollapseRow>,
}

impl CollapseReport {
    pub const CSV_HEADER: &'static str = "k,verdict,c,area,diameter";

    pub fn csv_rows(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        self.rows.iter().map(|r| format!("{},{},{},{},{}", r.k, self.verdict, r.c, opt(r.area), opt(r.diameter))).collect()
    }
}

/// Classifies a family by the tail of `c_k = avg_{D_{1/4}} u_k`: bounded when
/// the last quarter of the members (at least three) spreads by at most the
/// configured amount.
pub fn classify_collapse(family: &MetricFamily, r: f64, c: &Constants) -> Result<CollapseReport> {
    if family.is_empty() {
        return Err(Error::InvalidArgument("empty family".into()));
    }
    let quarter = Region::disk(Point::ORIGIN, 0.25);
    let cs = family
        .members
        .iter()
        .map(|m| {
            let cells = m.metric.grid().cells_in(&quarter);
            if cells.is_empty() {
                return Err(Error::EmptyRegion);
            }
            Ok(cells.iter().map(|&i| m.metric.u().values()[i]).sum::<f64>() / cells.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = cs.len();
    let tail = &cs[n - n.div_ceil(4).max(3).min(n)..];
    let spread = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max) - tail.iter().copied().fold(f64::INFINITY, f64::min);
    let verdict = if spread <= c.bounded_tail_spread { CollapseVerdict::Bounded } else { CollapseVerdict::Collapsing };
    let region = Region::disk(Point::ORIGIN, r);
    let rows = family
        .members
        .par_iter()
        .zip(cs.par_iter())
        .map(|(m, &ck)| {
            let (area, diameter) = match verdict {
                CollapseVerdict::Bounded => (None, None),
                CollapseVerdict::Collapsing => {
                    (Some(m.metric.area(&region)?), Some(m.metric.diameter(&region, c.landmarks)?))
                }
            };
            Ok(CollapseRow { k: m.k, c: ck, area, diameter })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CollapseReport { verdict, rows })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JnFloor {
    pub value: f64,
    pub argmin: Point,
}

/// `min ρ(u, x, D, λ)` over the 17 × 17 lattice points of `D̄_{1/2}`
/// (ties go to the first point in row-major order).
pub fn jn_floor(m: &ConformalMetric, lambda: f64, c: &Constants) -> Result<JnFloor> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("λ must be positive, got {lambda}")));
    }
    let ladder = Ladder::for_grid(m.grid(), c);
    let points: Vec<Point> = (0..17)
        .flat_map(|j| (0..17).map(move |i| Point::new(-0.5 + i as f64 / 16.0, -0.5 + j as f64 / 16.0)))
        .filter(|p| p.norm() <= 0.5 + 1e-12)
        .collect();
    let radii: Vec<f64> = points.par_iter().map(|&x| jn_radius(m.u(), x, &Region::unit_disk(), lambda, ladder)).collect();
    let (k, &value) = radii.iter().enumerate().fold((0, &f64::INFINITY), |best, (k, r)| if r < best.1 { (k, r) } else { best });
    Ok(JnFloor { value, argmin: points[k] })
}

/// Least-squares affine fit `a x¹ + b x² + c` on `D_2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// `‖u - fit‖_{L¹(D_2)}`.
    pub residual: f64,
    /// `|(a, b)| > 10⁻³`.
    pub nontrivial: bool,
}

fn solve3(m: [[f64; 3]; 3], r: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(m);
    if d.abs() < 1e-300 {
        return None;
    }
    let mut out = [0.0; 3];
    for (col, slot) in out.iter_mut().enumerate() {
        let mut mc = m;
        for row in 0..3 {
            mc[row][col] = r[row];
        }
        *slot = det(mc) / d;
    }
    Some(out)
}

pub fn linear_blowup_check(rescaled: &ScalarField) -> Result<LinearFit> {
    let g = rescaled.grid();
    let cells = g.cells_in(&Region::disk(Point::ORIGIN, 2.0));
    if cells.len() < 3 {
        return Err(Error::EmptyRegion);
    }
    let v = rescaled.values();
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for &idx in &cells {
        let p = g.center(idx);
        let row = [p.x, p.y, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * v[idx];
        }
    }
    let [a, b, c] = solve3(ata, atb).ok_or_else(|| Error::InvalidArgument("degenerate fit window".into()))?;
    let residual = cells.iter().map(|&idx| (v[idx] - (a * g.center(idx).x + b * g.center(idx).y + c)).abs()).sum::<f64>() * g.cell_area();
    Ok(LinearFit { a, b, c, residual, nontrivial: a.hypot(b) > 1e-3 })
}

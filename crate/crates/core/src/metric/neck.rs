use std::f64::consts::PI;

use rayon::prelude::*;

use super::ConformalMetric;
use crate::error::{Error, Result};
use crate::field::{integrate, Region};
use crate::geom::Point;
use crate::pde::gauss_curvature;

const CIRCLE_NODES: usize = 256;
const ANGLES: usize = 16;
/// Ratios near the hole are sensitive to metrication, so they are measured on
/// the 96-neighbour stencil.
const NECK_STENCIL: i32 = 6;

/// Scale-normalized distance and area data of a metric on `D_4 \ D_{1/4}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeckReport {
    /// Mean of `u` over `∂D_{3/2}`.
    pub c: f64,
    /// Extremes of `d_g(e^{iθ}, 2e^{iθ'}) / e^c`.
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// `μ(D_2 \ D, g) / e^{2c}`.
    pub area_ratio: f64,
    /// `∫_{D_4 \ D_{1/2}} |K| dμ_g`.
    pub curvature_energy: f64,
}

impl NeckReport {
    pub const CSV_HEADER: &'static str = "c,ratio_min,ratio_max,area_ratio,curvature_energy";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{}", self.c, self.ratio_min, self.ratio_max, self.area_ratio, self.curvature_energy)
    }
}

pub fn neck_analysis(m: &ConformalMetric) -> Result<NeckReport> {
    let u = m.u();
    let dense = ConformalMetric::with_stencil(u.clone(), NECK_STENCIL);
    let mut c = 0.0;
    for k in 0..CIRCLE_NODES {
        let p = Point::polar(1.5, 2.0 * PI * k as f64 / CIRCLE_NODES as f64);
        c += u.sample(p).ok_or_else(|| Error::InvalidGrid(format!("grid does not cover {p}")))?;
    }
    c /= CIRCLE_NODES as f64;
    let angle = |k: usize| 2.0 * PI * k as f64 / ANGLES as f64;
    let rows: Vec<Vec<f64>> = (0..ANGLES)
        .into_par_iter()
        .map(|i| {
            let x = Point::polar(1.0, angle(i));
            let field = dense.distance_field(x)?;
            (0..ANGLES).map(|j| dense.distance_from_field(&field, x, Point::polar(2.0, angle(j)))).collect()
        })
        .collect::<Result<_>>()?;
    let scale = (-c).exp();
    let ratios = rows.iter().flatten().map(|d| d * scale);
    let ratio_min = ratios.clone().fold(f64::INFINITY, f64::min);
    let ratio_max = ratios.fold(0.0, f64::max);
    let area_ratio = m.area(&Region::annulus(1.0, 2.0))? * (-2.0 * c).exp();
    let density = gauss_curvature(u)?.density;
    let curvature_energy = integrate(&density.abs(), &Region::annulus(0.5, 4.0))?;
    Ok(NeckReport { c, ratio_min, ratio_max, area_ratio, curvature_energy })
}

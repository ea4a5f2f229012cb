use std::sync::Arc;

use super::round_factor;
use crate::error::{Error, Result};
use crate::field::{Grid, Region, ScalarField};
use crate::geom::Point;
use crate::metric::{dijkstra, ConformalMetric, Graph};
use crate::pde::gauss_curvature;

/// Radius of each stereographic chart disk.
pub const CHART_RADIUS: f64 = 2.5;
/// The equator `|x| = 2` splits the sphere between the two charts.
const EQUATOR: f64 = 2.0;
/// Cells this close to the equator are glued to the other chart.
const GLUE_BAND: f64 = 0.1;

/// The unit-sphere point of chart coordinate `x` (chart of the lower hemisphere).
pub fn sphere_point(x: Point) -> [f64; 3] {
    let y = 0.5 * x;
    let d = 1.0 + y.norm2();
    [2.0 * y.x / d, 2.0 * y.y / d, (y.norm2() - 1.0) / d]
}

/// A metric `e^{2φ} g_round` on the whole sphere, held on two stereographic
/// charts related by `x' = 4x/|x|²` and glued into one shortest-path graph.
#[derive(Debug, Clone)]
pub struct SphereAtlas {
    lower: ConformalMetric,
    upper: ConformalMetric,
    /// Gluing edges, indexed by global node (lower chart first).
    glue: Vec<Vec<(usize, f64)>>,
}

impl SphereAtlas {
    /// `phi` is evaluated on unit vectors of `ℝ³`; `n` cells span each chart diameter.
    pub fn new(phi: impl Fn([f64; 3]) -> f64 + Sync, n: usize) -> Result<Self> {
        let grid = Arc::new(Grid::disk(Point::ORIGIN, CHART_RADIUS, n)?);
        let lower = ConformalMetric::new(ScalarField::from_fn(grid.clone(), |x| phi(sphere_point(x)) + round_factor(x)));
        let upper = ConformalMetric::new(ScalarField::from_fn(grid.clone(), |x| {
            let [a, b, c] = sphere_point(x);
            phi([a, b, -c]) + round_factor(x)
        }));
        let offset = grid.len();
        let mut glue = vec![Vec::new(); 2 * offset];
        for idx in grid.cells_in(&Region::annulus(EQUATOR - GLUE_BAND, EQUATOR + GLUE_BAND)) {
            let x = grid.center(idx);
            let image = (4.0 / x.norm2()) * x;
            for (node, cost) in upper.attach(image)? {
                glue[idx].push((offset + node, cost));
                glue[offset + node].push((idx, cost));
            }
        }
        Ok(SphereAtlas { lower, upper, glue })
    }

    pub fn lower(&self) -> &ConformalMetric {
        &self.lower
    }

    pub fn upper(&self) -> &ConformalMetric {
        &self.upper
    }

    fn chart(&self, node: usize) -> (&ConformalMetric, usize) {
        let n = self.lower.grid().len();
        if node < n {
            (&self.lower, node)
        } else {
            (&self.upper, node - n)
        }
    }

    /// Nodes whose chart point lies in the closed hemisphere `|x| ≤ 2`.
    fn hemisphere_nodes(&self) -> Vec<usize> {
        let n = self.lower.grid().len();
        let cells = self.lower.grid().cells_in(&Region::disk(Point::ORIGIN, EQUATOR));
        cells.iter().copied().chain(cells.iter().map(|&i| i + n)).collect()
    }

    /// `μ(S², g)`, each chart integrated over its own hemisphere.
    pub fn area(&self) -> Result<f64> {
        let hemi = Region::disk(Point::ORIGIN, EQUATOR);
        Ok(self.lower.area(&hemi)? + self.upper.area(&hemi)?)
    }

    /// Farthest-point landmark estimate of the diameter.
    pub fn diameter(&self, landmarks: usize) -> Result<f64> {
        let nodes = self.hemisphere_nodes();
        let start = self.lower.grid().nearest_inside(Point::ORIGIN, &Region::Full).ok_or(Error::EmptyRegion)?;
        let mut nearest = vec![f64::INFINITY; nodes.len()];
        let mut best: f64 = 0.0;
        let mut current = start;
        for _ in 0..landmarks.max(1) {
            let d = dijkstra(self, &[(current, 0.0)], f64::INFINITY);
            let mut far = (f64::NEG_INFINITY, current);
            for (k, &node) in nodes.iter().enumerate() {
                if !d[node].is_finite() {
                    return Err(Error::Disconnected);
                }
                best = best.max(d[node]);
                nearest[k] = nearest[k].min(d[node]);
                if nearest[k] > far.0 {
                    far = (nearest[k], node);
                }
            }
            if far.0 <= 0.0 {
                break;
            }
            current = far.1;
        }
        Ok(best)
    }

    /// Smallest Gauss curvature over interior cells of both hemispheres.
    pub fn min_curvature(&self) -> Result<f64> {
        let hemi = Region::disk(Point::ORIGIN, EQUATOR);
        let mut lowest = f64::INFINITY;
        for chart in [&self.lower, &self.upper] {
            let k = gauss_curvature(chart.u())?.k;
            for idx in k.grid().cells_in(&hemi) {
                lowest = lowest.min(k.values()[idx]);
            }
        }
        Ok(lowest)
    }
}

impl Graph for SphereAtlas {
    fn node_count(&self) -> usize {
        2 * self.lower.grid().len()
    }

    fn for_each_edge(&self, node: usize, visit: &mut dyn FnMut(usize, f64)) {
        let (chart, local) = self.chart(node);
        let base = node - local;
        chart.for_each_edge(local, &mut |next, w| visit(base + next, w));
        for &(next, w) in &self.glue[node] {
            visit(next, w);
        }
    }
}

/// `e^{2φ} g_round` with `φ = -c + a z`, whose curvature
/// `e^{2c - 2az}(1 + 2az)` is at least 1 for suitable `(c, a)`.
pub fn height_perturbation(c: f64, a: f64) -> impl Fn([f64; 3]) -> f64 + Sync {
    move |p| -c + a * p[2]
}

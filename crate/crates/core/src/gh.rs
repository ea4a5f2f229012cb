//! Finite metric spaces sampled from conformal metrics and their
//! Gromov-Hausdorff distance: exact by exhaustive correspondence search for
//! tiny spaces, bracketed by bounds otherwise.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::Region;
use crate::geom::Point;
use crate::metric::{dijkstra, ConformalMetric};

/// Largest space size accepted by [`gh_exact`].
pub const EXACT_MAX_POINTS: usize = 7;

/// Relative tolerance for the metric axioms checked on construction.
const AXIOM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace {
    labels: Vec<Point>,
    dist: Vec<f64>,
}

impl FiniteMetricSpace {
    /// `dist` is the row-major `n × n` matrix for `n = labels.len()`.
    pub fn new(labels: Vec<Point>, dist: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::NotAMetric("empty space".into()));
        }
        if dist.len() != n * n {
            return Err(Error::NotAMetric(format!("expected {} entries, got {}", n * n, dist.len())));
        }
        let scale = dist.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1.0);
        let tol = AXIOM_TOL * scale;
        for i in 0..n {
            if dist[i * n + i] != 0.0 {
                return Err(Error::NotAMetric(format!("d({i},{i}) = {}", dist[i * n + i])));
            }
            for j in 0..n {
                let d = dist[i * n + j];
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::NotAMetric(format!("d({i},{j}) = {d}")));
                }
                if (d - dist[j * n + i]).abs() > tol {
                    return Err(Error::NotAMetric(format!("asymmetric at ({i},{j})")));
                }
                for k in 0..n {
                    if d > dist[i * n + k] + dist[k * n + j] + tol {
                        return Err(Error::NotAMetric(format!("triangle inequality fails at ({i},{k},{j})")));
                    }
                }
            }
        }
        Ok(FiniteMetricSpace { labels, dist })
    }

    /// Points on the real line with `|a - b|` distances.
    pub fn on_line(xs: &[f64]) -> Result<Self> {
        let dist = xs.iter().flat_map(|a| xs.iter().map(move |b| (a - b).abs())).collect();
        Self::new(xs.iter().map(|&x| Point::new(x, 0.0)).collect(), dist)
    }

    /// Planar points with Euclidean distances.
    pub fn euclidean(points: &[Point]) -> Result<Self> {
        let dist = points.iter().flat_map(|a| points.iter().map(move |b| a.dist(*b))).collect();
        Self::new(points.to_vec(), dist)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[Point] {
        &self.labels
    }

    pub fn matrix(&self) -> &[f64] {
        &self.dist
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.len() + j]
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// The same points with every distance multiplied by `s > 0`.
    pub fn scaled(&self, s: f64) -> Self {
        FiniteMetricSpace { labels: self.labels.clone(), dist: self.dist.iter().map(|d| d * s).collect() }
    }

    /// `n` on the first line, then the `n²` entries row-major, one per line.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", self.len());
        for d in &self.dist {
            let _ = writeln!(out, "{d}");
        }
        out
    }

    /// Parses [`Self::to_csv`] output; labels are not stored and come back as the origin.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut it = text.split(['\n', ',']).map(str::trim).filter(|s| !s.is_empty());
        let n: usize = it
            .next()
            .ok_or_else(|| Error::Parse("empty input".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad size: {e}")))?;
        let dist = it
            .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("bad entry {s:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(vec![Point::ORIGIN; n], dist)
    }
}

fn farthest(values: impl Iterator<Item = (usize, f64)> + Clone) -> Option<(usize, f64)> {
    let top = values.clone().map(|(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
    // Near-ties go to the lowest index so that rescaled metrics pick the same points.
    values.filter(|&(_, v)| v >= top * (1.0 - 1e-9)).min_by_key(|&(i, _)| i).map(|(i, _)| (i, top))
}

/// Farthest-point sample of `n` cell centers of `R`, seeded at the cell
/// nearest the region's center, with graph distances between them.
pub fn sample_space(m: &ConformalMetric, region: &Region, n: usize) -> Result<FiniteMetricSpace> {
    let g = m.grid();
    let cells = g.cells_in(region);
    if n == 0 || n > cells.len() {
        return Err(Error::InvalidArgument(format!("cannot sample {n} of {} cells", cells.len())));
    }
    let seed = match region.center() {
        Some(c) => g.nearest_inside(c, region).unwrap_or(cells[0]),
        None => cells[0],
    };
    let mut chosen = vec![seed];
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut nearest = vec![f64::INFINITY; cells.len()];
    loop {
        let d = dijkstra(m, &[(*chosen.last().unwrap(), 0.0)], f64::INFINITY);
        for (k, &idx) in cells.iter().enumerate() {
            nearest[k] = nearest[k].min(d[idx]);
        }
        rows.push(d);
        if chosen.len() == n {
            break;
        }
        let (k, far) = farthest(nearest.iter().copied().enumerate()).ok_or(Error::EmptyRegion)?;
        if !far.is_finite() {
            return Err(Error::Disconnected);
        }
        chosen.push(cells[k]);
    }
    pairwise(m, &chosen, &rows)
}

/// The sampled space at the cells holding `labels`, e.g. the points another
/// metric's [`sample_space`] chose, so two metrics can be compared point for point.
pub fn sample_at(m: &ConformalMetric, labels: &[Point]) -> Result<FiniteMetricSpace> {
    let g = m.grid();
    let chosen = labels
        .iter()
        .map(|&p| g.cell_of(p).filter(|&i| g.is_inside(i)).ok_or(Error::OutsideGrid(p.x, p.y)))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<f64>> = chosen.par_iter().map(|&c| dijkstra(m, &[(c, 0.0)], f64::INFINITY)).collect();
    pairwise(m, &chosen, &rows)
}

fn pairwise(m: &ConformalMetric, chosen: &[usize], rows: &[Vec<f64>]) -> Result<FiniteMetricSpace> {
    let n = chosen.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                dist[i * n + j] = 0.5 * (rows[i][chosen[j]] + rows[j][chosen[i]]);
            }
        }
    }
    if dist.iter().any(|d| !d.is_finite()) {
        return Err(Error::Disconnected);
    }
    FiniteMetricSpace::new(chosen.iter().map(|&i| m.grid().center(i)).collect(), dist)
}

/// Distortion of the correspondence `{(x, f(x))} ∪ {(g(y), y)}`.
fn distortion(x: &FiniteMetricSpace, y: &FiniteMetricSpace, f: &[usize], g: &[usize]) -> f64 {
    let pairs: Vec<(usize, usize)> = f.iter().enumerate().map(|(i, &j)| (i, j)).chain(g.iter().enumerate().map(|(j, &i)| (i, j))).collect();
    let mut worst: f64 = 0.0;
    for (a, &(i, j)) in pairs.iter().enumerate() {
        for &(k, l) in &pairs[a + 1..] {
            worst = worst.max((x.d(i, k) - y.d(j, l)).abs());
        }
    }
    worst
}

struct Search<'a> {
    x: &'a FiniteMetricSpace,
    y: &'a FiniteMetricSpace,
    pairs: Vec<(usize, usize)>,
    best: f64,
}

impl Search<'_> {
    /// Cost of adding `(i, j)` given the pairs chosen so far.
    fn added(&self, i: usize, j: usize) -> f64 {
        self.pairs.iter().map(|&(k, l)| (self.x.d(i, k) - self.y.d(j, l)).abs()).fold(0.0, f64::max)
    }

    fn assign_x(&mut self, i: usize, current: f64, covered: &mut Vec<bool>) {
        if i == self.x.len() {
            let open: Vec<usize> = (0..self.y.len()).filter(|&j| !covered[j]).collect();
            self.assign_y(&open, 0, current);
            return;
        }
        for j in 0..self.y.len() {
            let cost = current.max(self.added(i, j));
            if cost >= self.best {
                continue;
            }
            self.pairs.push((i, j));
            let was = covered[j];
            covered[j] = true;
            self.assign_x(i + 1, cost, covered);
            covered[j] = was;
            self.pairs.pop();
        }
    }

    fn assign_y(&mut self, open: &[usize], k: usize, current: f64) {
        if k == open.len() {
            self.best = current;
            return;
        }
        let j = open[k];
        for i in 0..self.x.len() {
            let cost = current.max(self.added(i, j));
            if cost >= self.best {
                continue;
            }
            self.pairs.push((i, j));
            self.assign_y(open, k + 1, cost);
            self.pairs.pop();
        }
    }
}

/// `½ min_R dis(R)` over all correspondences, by branch and bound. Every
/// correspondence contains one of the form `graph(f) ∪ graph(g)ᵀ` with no
/// larger distortion, so only those are searched.
pub fn gh_exact(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> Result<f64> {
    if x.len() > EXACT_MAX_POINTS || y.len() > EXACT_MAX_POINTS {
        return Err(Error::TooLarge(x.len(), y.len()));
    }
    let (_, upper) = gh_bounds(x, y);
    let mut search = Search { x, y, pairs: Vec::new(), best: 2.0 * upper + 1e-12 };
    search.assign_x(0, 0.0, &mut vec![false; y.len()]);
    Ok(0.5 * search.best.min(2.0 * upper))
}

fn profiles(x: &FiniteMetricSpace) -> Vec<Vec<f64>> {
    (0..x.len())
        .map(|i| {
            let mut row: Vec<f64> = (0..x.len()).map(|k| x.d(i, k)).collect();
            row.sort_by(f64::total_cmp);
            row
        })
        .collect()
}

/// One-sided Hausdorff distance between sorted reals.
fn directed_hausdorff(a: &[f64], b: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    let mut k = 0;
    for &v in a {
        while k + 1 < b.len() && b[k + 1] <= v {
            k += 1;
        }
        let mut near = (v - b[k]).abs();
        if k + 1 < b.len() {
            near = near.min((b[k + 1] - v).abs());
        }
        worst = worst.max(near);
    }
    worst
}

fn hausdorff(a: &[f64], b: &[f64]) -> f64 {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

/// Lower and upper bounds on the Gromov-Hausdorff distance.
///
/// If `(x, y)` lies in a correspondence of distortion `δ`, the distance sets
/// `{d(x, ·)}` and `{d(y, ·)}` are within Hausdorff distance `δ`; the lower
/// bound is half the largest such forced mismatch. The upper bound is half
/// the distortion of a correspondence matched on distance profiles (and on
/// labels), improved by single reassignments until no move helps.
pub fn gh_bounds(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> (f64, f64) {
    let (px, py) = (profiles(x), profiles(y));
    let h: Vec<Vec<f64>> = px.iter().map(|a| py.iter().map(|b| hausdorff(a, b)).collect()).collect();
    let row_min = h.iter().map(|r| r.iter().copied().fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
    let col_min = (0..y.len()).map(|j| h.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
    let lower = 0.5 * row_min.max(col_min).max((x.diameter() - y.diameter()).abs());

    let argmin = |it: &mut dyn Iterator<Item = (usize, f64)>| it.min_by(|a, b| a.1.total_cmp(&b.1)).map(|(i, _)| i).unwrap();
    let profile_f: Vec<usize> = (0..x.len()).map(|i| argmin(&mut h[i].iter().copied().enumerate())).collect();
    let profile_g: Vec<usize> = (0..y.len()).map(|j| argmin(&mut (0..x.len()).map(|i| (i, h[i][j])))).collect();
    let label_f: Vec<usize> =
        (0..x.len()).map(|i| argmin(&mut y.labels.iter().map(|q| q.dist(x.labels[i])).enumerate())).collect();
    let label_g: Vec<usize> =
        (0..y.len()).map(|j| argmin(&mut x.labels.iter().map(|p| p.dist(y.labels[j])).enumerate())).collect();
    let upper = [(profile_f, profile_g), (label_f, label_g)]
        .into_iter()
        .map(|(f, g)| improve(x, y, f, g))
        .fold(f64::INFINITY, f64::min);
    (lower, 0.5 * upper.max(2.0 * lower))
}

fn improve(x: &FiniteMetricSpace, y: &FiniteMetricSpace, mut f: Vec<usize>, mut g: Vec<usize>) -> f64 {
    let mut best = distortion(x, y, &f, &g);
    loop {
        let mut moved = false;
        for i in 0..x.len() {
            for j in 0..y.len() {
                let old = f[i];
                if old == j {
                    continue;
                }
                f[i] = j;
                let d = distortion(x, y, &f, &g);
                if d < best {
                    best = d;
                    moved = true;
                } else {
                    f[i] = old;
                }
            }
        }
        for j in 0..y.len() {
            for i in 0..x.len() {
                let old = g[j];
                if old == i {
                    continue;
                }
                g[j] = i;
                let d = distortion(x, y, &f, &g);
                if d < best {
                    best = d;
                    moved = true;
                } else {
                    g[j] = old;
                }
            }
        }
        if !moved {
            return best;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axioms_are_checked() {
        assert!(FiniteMetricSpace::new(vec![Point::ORIGIN; 2], vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(FiniteMetricSpace::new(vec![Point::ORIGIN; 2], vec![0.0, 1.0, 1.0, 0.5]).is_err());
        assert!(FiniteMetricSpace::new(vec![Point::ORIGIN; 3], vec![0.0, 1.0, 5.0, 1.0, 0.0, 1.0, 5.0, 1.0, 0.0]).is_err());
        assert!(FiniteMetricSpace::new(vec![], vec![]).is_err());
        assert!(FiniteMetricSpace::on_line(&[0.0, 1.0, 3.0]).is_ok());
    }

    #[test]
    fn csv_roundtrip() {
        let x = FiniteMetricSpace::on_line(&[0.0, 0.1, 2.5]).unwrap();
        let back = FiniteMetricSpace::from_csv(&x.to_csv()).unwrap();
        assert_eq!(back.matrix(), x.matrix());
        assert!(FiniteMetricSpace::from_csv("2\n0\n1\n").is_err());
    }

    #[test]
    fn closed_forms() {
        let a = FiniteMetricSpace::on_line(&[0.0, 1.0]).unwrap();
        let b = FiniteMetricSpace::on_line(&[0.0, 2.0]).unwrap();
        assert!((gh_exact(&a, &b).unwrap() - 0.5).abs() < 1e-12);
        let tri = FiniteMetricSpace::euclidean(&[Point::ORIGIN, Point::new(1.0, 0.0), Point::new(0.3, 0.8)]).unwrap();
        let pt = FiniteMetricSpace::on_line(&[0.0]).unwrap();
        assert!((gh_exact(&tri, &pt).unwrap() - tri.diameter() / 2.0).abs() < 1e-12);
        assert_eq!(gh_exact(&tri, &tri).unwrap(), 0.0);
        assert_eq!(gh_bounds(&tri, &tri), (0.0, 0.0));
        let big = FiniteMetricSpace::on_line(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]).unwrap();
        assert_eq!(gh_exact(&big, &pt), Err(Error::TooLarge(8, 1)));
    }

    #[test]
    fn scaled_copy_lower_bound() {
        let x = FiniteMetricSpace::euclidean(&[Point::ORIGIN, Point::new(1.0, 0.2), Point::new(-0.5, 0.7), Point::new(0.2, -0.9)]).unwrap();
        let (lower, upper) = gh_bounds(&x, &x.scaled(2.0));
        assert!(lower >= 0.25 * x.diameter() - 1e-12);
        assert!(lower <= upper);
    }
}

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use super::collapse::{linear_blowup_check, LinearFit};
use super::MetricFamily;
use crate::config::Constants;
use crate::error::{Error, Result};
use crate::field::{integrate, rescale_blowup, Grid, Region, ScalarField};
use crate::geom::Point;
use crate::metric::ConformalMetric;
use crate::pde::gauss_curvature;

/// Half-width of the rescaled window, in units of the concentration radius.
pub const WINDOW_HALF: f64 = 4.0;
/// Cells across the rescaled window.
pub const WINDOW_CELLS: usize = 128;

const CANDIDATES: usize = 8;
const REFINED: usize = 2;
const BISECTION_STEPS: usize = 40;

/// The curvature measure `|K| dμ_g = |Δu| dx` of one metric, with optional
/// masked-out disks, and its mass on disks.
///
/// Disk masses weight each cell by its antialiased coverage
/// `clamp(1/2 + (t - |c - x|)/h, 0, 1)`, so they are continuous and
/// nondecreasing in `t` and continuous in the center.
#[derive(Debug, Clone)]
pub struct CurvatureMass {
    grid: Arc<Grid>,
    density: Vec<f64>,
}

impl CurvatureMass {
    pub fn new(u: &ScalarField) -> Result<Self> {
        let d = gauss_curvature(u)?.density;
        let density = d.values().iter().map(|v| if v.is_nan() { 0.0 } else { v.abs() }).collect();
        Ok(CurvatureMass { grid: u.grid_arc().clone(), density })
    }

    pub fn total(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.grid.cell_area()
    }

    /// `∫_{D_t(x)} |K| dμ_g` over the unmasked cells.
    pub fn mass(&self, x: Point, t: f64) -> f64 {
        let g = &*self.grid;
        let h = g.h();
        let reach = t + h;
        let lo = |c: f64, o: f64| (((c - reach - o) / h).floor().max(0.0)) as usize;
        let (i0, j0) = (lo(x.x, g.origin().x), lo(x.y, g.origin().y));
        let i1 = ((((x.x + reach - g.origin().x) / h).ceil()).max(0.0) as usize).min(g.nx());
        let j1 = ((((x.y + reach - g.origin().y) / h).ceil()).max(0.0) as usize).min(g.ny());
        let mut acc = 0.0;
        for j in j0..j1 {
            for i in i0..i1 {
                let idx = g.index(i, j);
                let dens = self.density[idx];
                if dens == 0.0 {
                    continue;
                }
                let w = (0.5 + (t - g.center(idx).dist(x)) / h).clamp(0.0, 1.0);
                acc += w * dens;
            }
        }
        acc * g.cell_area()
    }

    /// `(sup{t : mass(x, t) ≤ ε/2}, capped)`, where the supremum is capped at
    /// the distance to the grid boundary and `capped` reports that the cap
    /// was reached without concentrating `ε/2`.
    pub fn radius(&self, x: Point, eps: f64) -> (f64, bool) {
        let half = 0.5 * eps;
        let cap = self.grid.boundary_distance(x).max(0.0);
        if self.mass(x, 0.0) > half {
            return (0.0, false);
        }
        // Bracket by doubling so that concentrated points only touch small disks.
        let (mut lo, mut hi) = (0.0, self.grid.h().min(cap));
        while self.mass(x, hi) <= half {
            if hi >= cap {
                return (cap, true);
            }
            lo = hi;
            hi = (2.0 * hi).min(cap);
        }
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if self.mass(x, mid) <= half {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo, false)
    }

    /// Removes the curvature inside `D_t(c)` from all later masses.
    pub fn mask_disk(&mut self, c: Point, t: f64) {
        for idx in self.grid.cells_in(&Region::disk(c, t)) {
            self.density[idx] = 0.0;
        }
    }

    fn inside(&self, p: Point) -> bool {
        self.grid.cell_of(p).is_some_and(|i| self.grid.is_inside(i))
    }

    /// The point of smallest concentration radius: seeded at the strongest
    /// local maxima of the density, the best seeds refined by a compass
    /// search to a fraction of a cell. `None` when no point concentrates `ε/2`.
    pub fn most_concentrated(&self, eps: f64) -> Option<(Point, f64)> {
        let g = &*self.grid;
        let mut peaks: Vec<usize> = g
            .inside_indices()
            .filter(|&idx| {
                let v = self.density[idx];
                if v == 0.0 {
                    return false;
                }
                let (i, j) = g.coords(idx);
                (-1..=1).all(|dj| {
                    (-1..=1).all(|di| {
                        g.inside_at(i as isize + di, j as isize + dj).is_none_or(|n| n == idx || self.density[n] <= v)
                    })
                })
            })
            .collect();
        peaks.sort_by(|&a, &b| self.density[b].total_cmp(&self.density[a]).then(a.cmp(&b)));
        peaks.truncate(CANDIDATES);
        let mut seeds: Vec<(usize, f64)> = peaks.par_iter().map(|&idx| (idx, self.radius(g.center(idx), eps).0)).collect();
        seeds.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        seeds.truncate(REFINED);
        let refined: Vec<(Point, f64, bool)> = seeds.par_iter().map(|&(idx, _)| self.refine(g.center(idx), eps)).collect();
        let (x, r) = refined.into_iter().filter(|r| !r.2).fold(None, |best: Option<(Point, f64)>, (p, r, _)| match best {
            Some((_, br)) if br <= r => best,
            _ => Some((p, r)),
        })?;
        Some(self.polish(x, r, eps))
    }

    /// The radius landmark is flat to within a fraction of a cell, so the
    /// final center is the curvature centroid of `D_{2r}`, iterated. Kept only
    /// if its radius stays within 1% of the compass optimum.
    fn polish(&self, x: Point, r: f64, eps: f64) -> (Point, f64) {
        let g = &*self.grid;
        let mut c = x;
        for _ in 0..4 {
            let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
            for idx in g.cells_in(&Region::disk(c, 2.0 * r)) {
                let w = self.density[idx];
                let p = g.center(idx);
                sx += w * p.x;
                sy += w * p.y;
                sw += w;
            }
            if sw == 0.0 {
                return (x, r);
            }
            c = Point::new(sx / sw, sy / sw);
        }
        if !self.inside(c) {
            return (x, r);
        }
        match self.radius(c, eps) {
            (rc, false) if rc <= 1.01 * r => (c, rc),
            _ => (x, r),
        }
    }

    fn refine(&self, start: Point, eps: f64) -> (Point, f64, bool) {
        let h = self.grid.h();
        let (mut x, (mut r, mut capped)) = (start, self.radius(start, eps));
        let mut step = h;
        let dirs = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];
        let mut iterations = 0;
        while step > h / 64.0 && iterations < 400 {
            iterations += 1;
            let mut moved = false;
            for (dx, dy) in dirs {
                let cand = x + Point::new(step * dx, step * dy);
                if !self.inside(cand) {
                    continue;
                }
                let (rc, cc) = self.radius(cand, eps);
                if rc < r - 1e-12 * h {
                    (x, r, capped) = (cand, rc, cc);
                    moved = true;
                    break;
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        (x, r, capped)
    }
}

/// `r(x) = sup{t : ∫_{D_t(x)} |K| dμ_g ≤ ε/2}`, capped at the distance to the
/// grid boundary. Found by bisection on the continuous mass profile.
pub fn concentration_radius(m: &ConformalMetric, x: Point, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("ε must be positive, got {eps}")));
    }
    Ok(CurvatureMass::new(m.u())?.radius(x, eps).0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Curvature concentrates and the rescaled metric keeps comparable area.
    Bubble,
    /// Curvature concentrates but the rescaled area vanishes against it.
    Collapse,
    /// The concentration radius stays at macroscopic scale.
    Converged,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Bubble => "bubble",
            Verdict::Collapse => "collapse",
            Verdict::Converged => "converged",
        })
    }
}

#[derive(Debug, Clone)]
pub struct BlowupRecord {
    pub center: Point,
    pub scale: f64,
    /// Additive constant of the rescaling, `log r_k`.
    pub shift: f64,
    /// Curvature mass in `D_{r_k}(x_k)` at selection time.
    pub mass: f64,
    /// `u(x_k + r_k y) + log r_k` on `|y| ≤ 4` (less near the boundary).
    pub rescaled: ScalarField,
    pub verdict: Verdict,
    pub linear_fit: LinearFit,
}

impl BlowupRecord {
    pub const CSV_HEADER: &'static str = "k,index,x,y,scale,shift,mass,verdict,fit_a,fit_b,fit_residual";

    pub fn csv_row(&self, k: u32, index: usize) -> String {
        format!(
            "{k},{index},{},{},{},{},{},{},{},{},{}",
            self.center.x,
            self.center.y,
            self.scale,
            self.shift,
            self.mass,
            self.verdict,
            self.linear_fit.a,
            self.linear_fit.b,
            self.linear_fit.residual
        )
    }
}

fn window(u: &ScalarField, center: Point, r: f64) -> Result<ScalarField> {
    let room = 0.999 * u.grid().boundary_distance(center) / r;
    rescale_blowup(u, center, r, true, WINDOW_HALF.min(room), WINDOW_CELLS)
}

fn extract_member(m: &ConformalMetric, eps: f64, c: &Constants) -> Result<Vec<BlowupRecord>> {
    let u = m.u();
    let mut cm = CurvatureMass::new(u)?;
    let depth = (cm.total() / (0.5 * eps)).ceil() as usize;
    let mut out = Vec::new();
    while out.len() < depth && cm.total() >= 0.5 * eps {
        let Some((x, r)) = cm.most_concentrated(eps) else { break };
        if r <= 0.0 {
            break;
        }
        let rescaled = window(u, x, r)?;
        let verdict = if r >= c.converged_scale {
            Verdict::Converged
        } else {
            let d2 = Region::disk(Point::ORIGIN, 2.0);
            let area = integrate(&rescaled.map(|v| (2.0 * v).exp()), &d2).unwrap_or(0.0);
            if area >= 0.5 * cm.mass(x, 2.0 * r) {
                Verdict::Bubble
            } else {
                Verdict::Collapse
            }
        };
        let linear_fit = linear_blowup_check(&rescaled)?;
        out.push(BlowupRecord { center: x, scale: r, shift: r.ln(), mass: cm.mass(x, r), rescaled, verdict, linear_fit });
        cm.mask_disk(x, c.bubble_mask_factor * r);
    }
    Ok(out)
}

/// Repeatedly picks the point of smallest concentration radius, records the
/// rescaled metric there and masks a neighbourhood of it, until less than
/// `ε/2` of curvature remains (at most `⌈total/(ε/2)⌉` records per member).
pub fn extract_bubble(family: &MetricFamily, eps: f64, c: &Constants) -> Result<Vec<(u32, Vec<BlowupRecord>)>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("ε must be positive, got {eps}")));
    }
    family.members.par_iter().map(|mem| Ok((mem.k, extract_member(&mem.metric, eps, c)?))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: Point,
    pub mass: f64,
    pub radius: f64,
}

/// Points of the last member where the curvature mass in the smallest ladder
/// disk exceeds `threshold`, grouped into 8-connected clusters; each atom is
/// reported at its cluster's heaviest cell.
pub fn detect_atoms(family: &MetricFamily, threshold: f64, c: &Constants) -> Result<Vec<Atom>> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be positive, got {threshold}")));
    }
    let Some(last) = family.last() else { return Ok(Vec::new()) };
    let cm = CurvatureMass::new(last.metric.u())?;
    let g = last.metric.grid();
    let t = c.ladder_min_cells * g.h();
    if cm.total() <= threshold {
        return Ok(Vec::new());
    }
    let mass: Vec<f64> =
        (0..g.len()).into_par_iter().map(|idx| if g.is_inside(idx) { cm.mass(g.center(idx), t) } else { 0.0 }).collect();
    let mut seen = vec![false; g.len()];
    let mut atoms = Vec::new();
    for start in 0..g.len() {
        if seen[start] || mass[start] <= threshold {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut best = start;
        while let Some(idx) = queue.pop_front() {
            if mass[idx] > mass[best] {
                best = idx;
            }
            let (i, j) = g.coords(idx);
            for dj in -1..=1 {
                for di in -1..=1 {
                    if let Some(n) = g.inside_at(i as isize + di, j as isize + dj) {
                        if !seen[n] && mass[n] > threshold {
                            seen[n] = true;
                            queue.push_back(n);
                        }
                    }
                }
            }
        }
        atoms.push(Atom { location: g.center(best), mass: mass[best], radius: t });
    }
    Ok(atoms)
}

/// A chart Möbius map `x ↦ center + scale · x` and the pulled-back factor.
#[derive(Debug, Clone)]
pub struct Mobius {
    pub center: Point,
    pub scale: f64,
    /// No point concentrates `ε/2`, so the identity is returned.
    pub identity: bool,
    pub renormalized: ScalarField,
}

/// Undoes concentration on a sphere chart: `(x_k, r_k)` minimize the
/// concentration radius at level `ε` and the result is
/// `u(x_k + r_k y) + log r_k`.
pub fn mobius_renormalize(m: &ConformalMetric, eps: f64) -> Result<Mobius> {
    let u = m.u();
    let cm = CurvatureMass::new(u)?;
    match cm.most_concentrated(eps) {
        Some((center, scale)) if scale > 0.0 => {
            Ok(Mobius { center, scale, identity: false, renormalized: window(u, center, scale)? })
        }
        _ => Ok(Mobius { center: Point::ORIGIN, scale: 1.0, identity: true, renormalized: u.clone() }),
    }
}

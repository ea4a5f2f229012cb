//! Masked uniform grids over planar domains and scalar fields living on them.
//!
//! Cell `(i, j)` of a grid with origin `(x0, y0)` and spacing `h` covers
//! `[x0 + i h, x0 + (i+1) h] × [y0 + j h, y0 + (j+1) h]`; its flat index is
//! `j * nx + i` and values are sampled at cell centers. A cell belongs to the
//! domain iff its center does (staircase approximation of curved boundaries).

use std::collections::VecDeque;
use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geom::Point;

/// A subset of the plane used for integration and as a PDE domain.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    /// Every inside cell of whatever grid it is applied to.
    Full,
    Disk { center: Point, radius: f64 },
    Annulus { center: Point, inner: f64, outer: f64 },
    Rect { min: Point, max: Point },
    /// Explicit per-cell selection on one particular grid (e.g. a geodesic ball).
    Cells(Arc<Vec<bool>>),
}

impl Region {
    pub fn disk(center: Point, radius: f64) -> Self {
        Region::Disk { center, radius }
    }

    pub fn unit_disk() -> Self {
        Region::disk(Point::ORIGIN, 1.0)
    }

    pub fn annulus(inner: f64, outer: f64) -> Self {
        Region::Annulus { center: Point::ORIGIN, inner, outer }
    }

    /// Point membership for the analytic shapes. `Full` and `Cells` accept every point.
    pub fn contains(&self, p: Point) -> bool {
        match self {
            Region::Full | Region::Cells(_) => true,
            Region::Disk { center, radius } => p.dist(*center) <= *radius,
            Region::Annulus { center, inner, outer } => {
                let r = p.dist(*center);
                r >= *inner && r <= *outer
            }
            Region::Rect { min, max } => p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y,
        }
    }

    /// Whether cell `idx` of `grid` is selected (the cell must also be inside the grid).
    pub fn selects(&self, grid: &Grid, idx: usize) -> bool {
        if !grid.mask[idx] {
            return false;
        }
        match self {
            Region::Cells(sel) => sel.get(idx).copied().unwrap_or(false),
            _ => self.contains(grid.center(idx)),
        }
    }

    fn bbox(&self) -> Option<(Point, Point)> {
        match self {
            Region::Disk { center, radius: r } | Region::Annulus { center, outer: r, .. } => {
                Some((Point::new(center.x - r, center.y - r), Point::new(center.x + r, center.y + r)))
            }
            Region::Rect { min, max } => Some((*min, *max)),
            _ => None,
        }
    }

    /// A representative interior point, when the shape has one.
    pub fn center(&self) -> Option<Point> {
        match self {
            Region::Disk { center, .. } | Region::Annulus { center, .. } => Some(*center),
            Region::Rect { min, max } => Some(0.5 * (*min + *max)),
            _ => None,
        }
    }

    /// Distance from an inside point `p` to the boundary of an analytic shape.
    pub fn boundary_distance(&self, p: Point) -> Option<f64> {
        match self {
            Region::Disk { center, radius } => Some((radius - p.dist(*center)).max(0.0)),
            Region::Annulus { center, inner, outer } => {
                let r = p.dist(*center);
                Some((outer - r).min(r - inner).max(0.0))
            }
            Region::Rect { min, max } => {
                Some((p.x - min.x).min(max.x - p.x).min(p.y - min.y).min(max.y - p.y).max(0.0))
            }
            _ => None,
        }
    }

    /// Distance travelled from `p` along the unit vector `dir` before leaving the
    /// shape, for analytic shapes.
    pub fn exit_distance(&self, p: Point, dir: Point) -> Option<f64> {
        match self {
            Region::Disk { center, radius } => Some(ray_exit_circle(p - *center, dir, *radius)),
            Region::Annulus { center, inner, outer } => {
                let q = p - *center;
                let out = ray_exit_circle(q, dir, *outer);
                let hit = ray_hit_circle(q, dir, *inner).unwrap_or(f64::INFINITY);
                Some(out.min(hit))
            }
            Region::Rect { min, max } => {
                let tx = if dir.x > 0.0 {
                    (max.x - p.x) / dir.x
                } else if dir.x < 0.0 {
                    (min.x - p.x) / dir.x
                } else {
                    f64::INFINITY
                };
                let ty = if dir.y > 0.0 {
                    (max.y - p.y) / dir.y
                } else if dir.y < 0.0 {
                    (min.y - p.y) / dir.y
                } else {
                    f64::INFINITY
                };
                Some(tx.min(ty).max(0.0))
            }
            _ => None,
        }
    }

    /// Whether the closed disk `D_t(c)` lies in an analytic shape.
    pub fn contains_disk(&self, c: Point, t: f64) -> Option<bool> {
        const SLACK: f64 = 1e-12;
        match self {
            Region::Disk { center, radius } => Some(c.dist(*center) + t <= radius + SLACK),
            Region::Annulus { center, inner, outer } => {
                let r = c.dist(*center);
                Some(r + t <= outer + SLACK && r - t >= inner - SLACK)
            }
            Region::Rect { .. } => self.boundary_distance(c).map(|d| self.contains(c) && t <= d + SLACK),
            _ => None,
        }
    }
}

fn ray_exit_circle(q: Point, d: Point, r: f64) -> f64 {
    let b = q.dot(d);
    let c = q.norm2() - r * r;
    let disc = (b * b - c).max(0.0);
    (-b + disc.sqrt()).max(0.0)
}

fn ray_hit_circle(q: Point, d: Point, r: f64) -> Option<f64> {
    let b = q.dot(d);
    let c = q.norm2() - r * r;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    (t >= 0.0).then_some(t)
}

impl fmt::Display for Region {
    /// Comma-free label, safe inside CSV cells.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::Full => write!(f, "full"),
            Region::Disk { center, radius } => write!(f, "disk[{} {};{}]", center.x, center.y, radius),
            Region::Annulus { center, inner, outer } => {
                write!(f, "annulus[{} {};{}..{}]", center.x, center.y, inner, outer)
            }
            Region::Rect { min, max } => write!(f, "rect[{} {};{} {}]", min.x, min.y, max.x, max.y),
            Region::Cells(sel) => write!(f, "cells[{}]", sel.iter().filter(|&&b| b).count()),
        }
    }
}

/// A uniform cell grid with an inside/outside mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    origin: Point,
    h: f64,
    mask: Vec<bool>,
    shape: Region,
}

impl Grid {
    /// Builds a grid from an explicit mask, checking that the inside cells are
    /// nonempty and 4-connected.
    pub fn from_mask(nx: usize, ny: usize, origin: Point, h: f64, mask: Vec<bool>, shape: Region) -> Result<Self> {
        let g = Grid::unchecked(nx, ny, origin, h, mask, shape)?;
        if !g.is_connected() {
            return Err(Error::InvalidGrid("inside cells are not 4-connected".into()));
        }
        Ok(g)
    }

    pub(crate) fn unchecked(nx: usize, ny: usize, origin: Point, h: f64, mask: Vec<bool>, shape: Region) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {h}")));
        }
        if nx == 0 || ny == 0 || mask.len() != nx * ny {
            return Err(Error::InvalidGrid(format!("mask of length {} does not match {nx}x{ny}", mask.len())));
        }
        if !mask.iter().any(|&b| b) {
            return Err(Error::InvalidGrid("mask has no inside cells".into()));
        }
        Ok(Grid { nx, ny, origin, h, mask, shape })
    }

    fn masked_by(nx: usize, ny: usize, origin: Point, h: f64, shape: Region) -> Result<Self> {
        let mut mask = vec![false; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let c = Point::new(origin.x + (i as f64 + 0.5) * h, origin.y + (j as f64 + 0.5) * h);
                mask[j * nx + i] = shape.contains(c);
            }
        }
        Grid::from_mask(nx, ny, origin, h, mask, shape)
    }

    /// `[-half, half]²` split into `n × n` cells, all inside.
    pub fn square(half: f64, n: usize) -> Self {
        let h = 2.0 * half / n as f64;
        let shape = Region::Rect { min: Point::new(-half, -half), max: Point::new(half, half) };
        Grid::unchecked(n, n, Point::new(-half, -half), h, vec![true; n * n], shape).expect("valid square grid")
    }

    /// Axis-aligned rectangle with spacing close to `h` (rounded so the cells tile it).
    pub fn rect(min: Point, max: Point, h: f64) -> Result<Self> {
        let nx = ((max.x - min.x) / h).round().max(1.0) as usize;
        let ny = ((max.y - min.y) / h).round().max(1.0) as usize;
        let hx = (max.x - min.x) / nx as f64;
        Grid::unchecked(nx, ny, min, hx, vec![true; nx * ny], Region::Rect { min, max: Point::new(min.x + nx as f64 * hx, min.y + ny as f64 * hx) })
    }

    /// Disk of radius `r` with `n` cells across its diameter.
    pub fn disk(center: Point, r: f64, n: usize) -> Result<Self> {
        let h = 2.0 * r / n as f64;
        Grid::masked_by(n, n, Point::new(center.x - r, center.y - r), h, Region::disk(center, r))
    }

    /// The default domain: the unit disk with `n` cells across.
    pub fn unit_disk(n: usize) -> Self {
        Grid::disk(Point::ORIGIN, 1.0, n).expect("unit disk grid")
    }

    /// Annulus `inner ≤ |x - center| ≤ outer` with `n` cells across the outer diameter.
    pub fn annulus(center: Point, inner: f64, outer: f64, n: usize) -> Result<Self> {
        let h = 2.0 * outer / n as f64;
        Grid::masked_by(n, n, Point::new(center.x - outer, center.y - outer), h, Region::Annulus { center, inner, outer })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn origin(&self) -> Point {
        self.origin
    }
    /// The analytic domain the mask was built from (`Full` when unknown).
    pub fn shape(&self) -> &Region {
        &self.shape
    }
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    #[inline]
    pub fn center(&self, idx: usize) -> Point {
        let (i, j) = self.coords(idx);
        Point::new(self.origin.x + (i as f64 + 0.5) * self.h, self.origin.y + (j as f64 + 0.5) * self.h)
    }

    #[inline]
    pub fn is_inside(&self, idx: usize) -> bool {
        self.mask[idx]
    }

    /// Inside cell at signed coordinates, if any.
    #[inline]
    pub fn inside_at(&self, i: isize, j: isize) -> Option<usize> {
        if i < 0 || j < 0 || i as usize >= self.nx || j as usize >= self.ny {
            return None;
        }
        let idx = self.index(i as usize, j as usize);
        self.mask[idx].then_some(idx)
    }

    pub fn inside_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn inside_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    /// The cell containing `p` (inside or not), if `p` is within the bounding box.
    pub fn cell_of(&self, p: Point) -> Option<usize> {
        let fi = ((p.x - self.origin.x) / self.h).floor();
        let fj = ((p.y - self.origin.y) / self.h).floor();
        if fi < 0.0 || fj < 0.0 || fi >= self.nx as f64 || fj >= self.ny as f64 {
            return None;
        }
        Some(self.index(fi as usize, fj as usize))
    }

    /// The inside cell whose center is nearest to `p` (ties by lowest index).
    pub fn nearest_inside(&self, p: Point, region: &Region) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for idx in self.cells_in(region) {
            let d = self.center(idx).dist(p);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, idx));
            }
        }
        best.map(|(_, i)| i)
    }

    /// Inside cells whose centers lie in `region`, in increasing index order.
    pub fn cells_in(&self, region: &Region) -> Vec<usize> {
        match region.bbox() {
            Some((lo, hi)) => {
                let (i0, i1) = self.clamp_range(lo.x, hi.x, self.origin.x, self.nx);
                let (j0, j1) = self.clamp_range(lo.y, hi.y, self.origin.y, self.ny);
                let mut out = Vec::new();
                for j in j0..j1 {
                    for i in i0..i1 {
                        let idx = self.index(i, j);
                        if self.mask[idx] && region.contains(self.center(idx)) {
                            out.push(idx);
                        }
                    }
                }
                out
            }
            None => (0..self.len()).filter(|&idx| region.selects(self, idx)).collect(),
        }
    }

    fn clamp_range(&self, lo: f64, hi: f64, o: f64, n: usize) -> (usize, usize) {
        let a = ((lo - o) / self.h - 0.5).floor().max(0.0) as usize;
        let b = (((hi - o) / self.h - 0.5).ceil() + 1.0).max(0.0) as usize;
        (a.min(n), b.min(n))
    }

    /// Cell with all four axis neighbours inside.
    #[inline]
    pub fn is_interior(&self, idx: usize) -> bool {
        if !self.mask[idx] {
            return false;
        }
        let (i, j) = self.coords(idx);
        let (i, j) = (i as isize, j as isize);
        self.inside_at(i + 1, j).is_some()
            && self.inside_at(i - 1, j).is_some()
            && self.inside_at(i, j + 1).is_some()
            && self.inside_at(i, j - 1).is_some()
    }

    /// Same geometry, mask restricted to interior cells.
    pub fn eroded(&self) -> Result<Grid> {
        let mask = (0..self.len()).map(|i| self.is_interior(i)).collect();
        Grid::unchecked(self.nx, self.ny, self.origin, self.h, mask, self.shape.clone())
    }

    /// Same geometry with a replacement mask (not checked for connectivity).
    pub fn with_mask(&self, mask: Vec<bool>) -> Result<Grid> {
        Grid::unchecked(self.nx, self.ny, self.origin, self.h, mask, Region::Full)
    }

    pub fn same_layout(&self, other: &Grid) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.origin == other.origin && self.h == other.h
    }

    pub fn is_connected(&self) -> bool {
        let Some(start) = self.inside_indices().next() else {
            return false;
        };
        let mut seen = vec![false; self.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut count = 1;
        while let Some(idx) = queue.pop_front() {
            let (i, j) = self.coords(idx);
            let (i, j) = (i as isize, j as isize);
            for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                if let Some(n) = self.inside_at(i + di, j + dj) {
                    if !seen[n] {
                        seen[n] = true;
                        count += 1;
                        queue.push_back(n);
                    }
                }
            }
        }
        count == self.inside_count()
    }

    /// Whether the closed disk `D_t(c)` lies in the grid's domain. Analytic
    /// shapes answer exactly; otherwise every cell whose center is in the disk
    /// must be inside and the disk must stay in the bounding box.
    pub fn contains_disk(&self, c: Point, t: f64) -> bool {
        if let Some(ans) = self.shape.contains_disk(c, t) {
            return ans;
        }
        let lo = self.origin;
        let hi = Point::new(lo.x + self.nx as f64 * self.h, lo.y + self.ny as f64 * self.h);
        if c.x - t < lo.x || c.y - t < lo.y || c.x + t > hi.x || c.y + t > hi.y {
            return false;
        }
        let (i0, i1) = self.clamp_range(c.x - t, c.x + t, lo.x, self.nx);
        let (j0, j1) = self.clamp_range(c.y - t, c.y + t, lo.y, self.ny);
        for j in j0..j1 {
            for i in i0..i1 {
                let idx = self.index(i, j);
                if !self.mask[idx] && self.center(idx).dist(c) <= t {
                    return false;
                }
            }
        }
        true
    }

    /// Distance from `p` to the domain boundary (analytic when possible,
    /// otherwise the distance to the nearest outside cell center or box edge).
    pub fn boundary_distance(&self, p: Point) -> f64 {
        if let Some(d) = self.shape.boundary_distance(p) {
            return d;
        }
        let lo = self.origin;
        let mut d = (p.x - lo.x)
            .min(p.y - lo.y)
            .min(lo.x + self.nx as f64 * self.h - p.x)
            .min(lo.y + self.ny as f64 * self.h - p.y)
            .max(0.0);
        for idx in 0..self.len() {
            if !self.mask[idx] {
                d = d.min(self.center(idx).dist(p));
            }
        }
        d
    }
}

/// Real values on the inside cells of a grid; outside cells hold `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    /// Wraps raw values, checking they are finite on every inside cell.
    pub fn new(grid: Arc<Grid>, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!("{} values for {} cells", values.len(), grid.len())));
        }
        for (idx, v) in values.iter_mut().enumerate() {
            if grid.mask[idx] {
                if !v.is_finite() {
                    return Err(Error::InvalidArgument(format!("non-finite value {v} at cell {idx}")));
                }
            } else {
                *v = f64::NAN;
            }
        }
        Ok(ScalarField { grid, values })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(Point) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|idx| if grid.mask[idx] { f(grid.center(idx)) } else { f64::NAN })
            .collect();
        ScalarField { grid, values }
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        ScalarField::from_fn(grid, |_| c)
    }

    pub(crate) fn from_raw(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Raw values, `NaN` on outside cells.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, idx: usize) -> Option<f64> {
        self.grid.mask[idx].then(|| self.values[idx])
    }

    pub fn at(&self, p: Point) -> Option<f64> {
        self.grid.cell_of(p).and_then(|idx| self.get(idx))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| if self.grid.mask[i] { f(v) } else { f64::NAN })
            .collect();
        ScalarField { grid: self.grid.clone(), values }
    }

    /// Pointwise combination on the cells inside both fields; the result lives
    /// on `self`'s grid restricted to the common cells.
    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        if !self.grid.same_layout(&other.grid) {
            return Err(Error::InvalidArgument("fields live on different grids".into()));
        }
        if self.grid.mask == other.grid.mask {
            let values = self
                .values
                .iter()
                .zip(&other.values)
                .enumerate()
                .map(|(i, (&a, &b))| if self.grid.mask[i] { f(a, b) } else { f64::NAN })
                .collect();
            return Ok(ScalarField { grid: self.grid.clone(), values });
        }
        let mask: Vec<bool> = self.grid.mask.iter().zip(&other.grid.mask).map(|(&a, &b)| a && b).collect();
        let grid = Arc::new(Grid::unchecked(self.grid.nx, self.grid.ny, self.grid.origin, self.grid.h, mask, self.grid.shape.clone())?);
        let values = (0..grid.len())
            .map(|i| if grid.mask[i] { f(self.values[i], other.values[i]) } else { f64::NAN })
            .collect();
        Ok(ScalarField { grid, values })
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add_constant(&self, c: f64) -> ScalarField {
        self.map(|v| v + c)
    }

    pub fn abs(&self) -> ScalarField {
        self.map(f64::abs)
    }

    /// The same values viewed on a smaller mask of the same layout.
    pub fn restrict(&self, grid: Arc<Grid>) -> Result<ScalarField> {
        if !self.grid.same_layout(&grid) {
            return Err(Error::InvalidArgument("restriction to a different layout".into()));
        }
        let mut values = vec![f64::NAN; grid.len()];
        for idx in grid.inside_indices() {
            if !self.grid.mask[idx] {
                return Err(Error::InvalidArgument("restriction mask is not a subset".into()));
            }
            values[idx] = self.values[idx];
        }
        Ok(ScalarField { grid, values })
    }

    pub fn max_abs(&self) -> f64 {
        self.grid.inside_indices().map(|i| self.values[i].abs()).fold(0.0, f64::max)
    }

    /// Bilinear interpolation between the (up to four) inside cell centers
    /// surrounding `p`. `None` when the cell containing `p` is not inside.
    pub fn sample(&self, p: Point) -> Option<f64> {
        let g = &*self.grid;
        let home = g.cell_of(p)?;
        if !g.mask[home] {
            return None;
        }
        let s = (p.x - g.origin.x) / g.h - 0.5;
        let t = (p.y - g.origin.y) / g.h - 0.5;
        let i0 = s.floor();
        let j0 = t.floor();
        let fx = s - i0;
        let fy = t - j0;
        let (i0, j0) = (i0 as isize, j0 as isize);
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for (di, dj, w) in [(0, 0, (1.0 - fx) * (1.0 - fy)), (1, 0, fx * (1.0 - fy)), (0, 1, (1.0 - fx) * fy), (1, 1, fx * fy)] {
            if w == 0.0 {
                continue;
            }
            if let Some(idx) = g.inside_at(i0 + di, j0 + dj) {
                acc += w * self.values[idx];
                wsum += w;
            }
        }
        if wsum < 1e-12 {
            Some(self.values[home])
        } else {
            Some(acc / wsum)
        }
    }

    /// Serializes as CONFGRID v1.
    pub fn write_confgrid<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let g = &*self.grid;
        writeln!(w, "{} {} {} {} {}", g.nx, g.ny, g.origin.x, g.origin.y, g.h)?;
        let mut line = String::new();
        for j in 0..g.ny {
            line.clear();
            for i in 0..g.nx {
                if i > 0 {
                    line.push(' ');
                }
                let idx = g.index(i, j);
                if g.mask[idx] {
                    line.push_str(&format!("{}", self.values[idx]));
                } else {
                    line.push_str("nan");
                }
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn to_confgrid_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_confgrid(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    /// Parses CONFGRID v1. `nan` marks outside cells; the domain shape of the
    /// result is `Full`.
    pub fn read_confgrid<R: BufRead>(r: R) -> Result<ScalarField> {
        let mut text = String::new();
        for line in r.lines() {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            text.push_str(&line);
            text.push('\n');
        }
        ScalarField::parse_confgrid(&text)
    }

    pub fn parse_confgrid(text: &str) -> Result<ScalarField> {
        let mut tok = text.split_whitespace();
        let mut next = |what: &str| tok.next().ok_or_else(|| Error::Parse(format!("missing {what}")));
        let nx: usize = next("nx")?.parse().map_err(|_| Error::Parse("bad nx".into()))?;
        let ny: usize = next("ny")?.parse().map_err(|_| Error::Parse("bad ny".into()))?;
        let x0: f64 = next("x0")?.parse().map_err(|_| Error::Parse("bad x0".into()))?;
        let y0: f64 = next("y0")?.parse().map_err(|_| Error::Parse("bad y0".into()))?;
        let h: f64 = next("h")?.parse().map_err(|_| Error::Parse("bad h".into()))?;
        let n = nx.checked_mul(ny).ok_or_else(|| Error::Parse("grid too large".into()))?;
        let mut values = Vec::with_capacity(n);
        for k in 0..n {
            let t = next("value")?;
            let v: f64 = if t.eq_ignore_ascii_case("nan") {
                f64::NAN
            } else {
                t.parse().map_err(|_| Error::Parse(format!("bad value {t:?} at position {k}")))?
            };
            values.push(v);
        }
        if tok.next().is_some() {
            return Err(Error::Parse("trailing data after grid values".into()));
        }
        let mask = values.iter().map(|v| !v.is_nan()).collect();
        let grid = Grid::unchecked(nx, ny, Point::new(x0, y0), h, mask, Region::Full)?;
        ScalarField::new(Arc::new(grid), values)
    }
}

/// Midpoint-rule integral `Σ f h²` over inside cells whose centers lie in `region`.
pub fn integrate(f: &ScalarField, region: &Region) -> Result<f64> {
    let cells = f.grid.cells_in(region);
    if cells.is_empty() {
        return Err(Error::EmptyRegion);
    }
    Ok(cells.iter().map(|&i| f.values[i]).sum::<f64>() * f.grid.cell_area())
}

/// 5-point Laplacian. The result lives on the interior cells (all four axis
/// neighbours inside); boundary-adjacent cells only admit one-sided stencils
/// and are left out.
pub fn laplacian(f: &ScalarField) -> Result<ScalarField> {
    let g = &*f.grid;
    let inner = Arc::new(g.eroded().map_err(|_| Error::InvalidArgument("field has no interior cells".into()))?);
    let h2 = g.h * g.h;
    let nx = g.nx;
    let v = &f.values;
    let values = (0..g.len())
        .map(|idx| {
            if inner.mask[idx] {
                (v[idx + 1] + v[idx - 1] + v[idx + nx] + v[idx - nx] - 4.0 * v[idx]) / h2
            } else {
                f64::NAN
            }
        })
        .collect();
    Ok(ScalarField { grid: inner, values })
}

/// Gradient by centered differences, falling back to one-sided differences
/// where one neighbour is missing (zero when both are).
pub fn gradient(f: &ScalarField) -> (ScalarField, ScalarField) {
    let g = &*f.grid;
    let v = &f.values;
    let mut gx = vec![f64::NAN; g.len()];
    let mut gy = vec![f64::NAN; g.len()];
    let diff = |a: Option<usize>, b: Option<usize>, c: usize| -> f64 {
        match (a, b) {
            (Some(p), Some(m)) => (v[p] - v[m]) / (2.0 * g.h),
            (Some(p), None) => (v[p] - v[c]) / g.h,
            (None, Some(m)) => (v[c] - v[m]) / g.h,
            (None, None) => 0.0,
        }
    };
    for idx in g.inside_indices() {
        let (i, j) = g.coords(idx);
        let (i, j) = (i as isize, j as isize);
        gx[idx] = diff(g.inside_at(i + 1, j), g.inside_at(i - 1, j), idx);
        gy[idx] = diff(g.inside_at(i, j + 1), g.inside_at(i, j - 1), idx);
    }
    (ScalarField::from_raw(f.grid.clone(), gx), ScalarField::from_raw(f.grid.clone(), gy))
}

pub fn gradient_magnitude(f: &ScalarField) -> ScalarField {
    let (gx, gy) = gradient(f);
    gx.zip_with(&gy, f64::hypot).expect("same grid")
}

/// Blowup rescaling `x ↦ f(center + r x) + log r` (the shift only when
/// `log_shift`) sampled onto the square `[-half, half]²` with `n` cells a side.
///
/// With the shift, `e^{2 f'} |dx|²` is the pullback of `e^{2 f} |dy|²` under
/// `y = center + r x`, so curvature is preserved pointwise.
pub fn rescale_blowup(f: &ScalarField, center: Point, r: f64, log_shift: bool, half: f64, n: usize) -> Result<ScalarField> {
    rescale_onto(f, center, r, log_shift, &Grid::square(half, n))
}

/// Same as [`rescale_blowup`] onto an arbitrary target layout. Target cells
/// whose preimage falls outside the source domain are masked.
pub fn rescale_onto(f: &ScalarField, center: Point, r: f64, log_shift: bool, target: &Grid) -> Result<ScalarField> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!("blowup scale must be positive, got {r}")));
    }
    let shift = if log_shift { r.ln() } else { 0.0 };
    let mut values = vec![f64::NAN; target.len()];
    let mut mask = vec![false; target.len()];
    for idx in target.inside_indices() {
        if let Some(v) = f.sample(center + r * target.center(idx)) {
            values[idx] = v + shift;
            mask[idx] = true;
        }
    }
    if !mask.iter().any(|&b| b) {
        return Err(Error::WindowOutside);
    }
    let shape = if mask == target.mask { target.shape.clone() } else { Region::Full };
    let grid = Grid::unchecked(target.nx, target.ny, target.origin, target.h, mask, shape)?;
    Ok(ScalarField { grid: Arc::new(grid), values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit(n: usize) -> Arc<Grid> {
        Arc::new(Grid::unit_disk(n))
    }

    #[test]
    fn disk_area_and_odd_moment() {
        let g = unit(512);
        let one = ScalarField::constant(g.clone(), 1.0);
        let a = integrate(&one, &Region::unit_disk()).unwrap();
        assert!((a / PI - 1.0).abs() < 5e-3, "{a}");
        let x = ScalarField::from_fn(g, |p| p.x);
        assert!(integrate(&x, &Region::unit_disk()).unwrap().abs() < 1e-10);
    }

    #[test]
    fn sphere_factor_has_area_four_pi() {
        let g = Arc::new(Grid::disk(Point::ORIGIN, 100.0, 800).unwrap());
        let e2u = ScalarField::from_fn(g, |p| (-2.0 * (1.0 + p.norm2() / 4.0).ln()).exp());
        let a = integrate(&e2u, &Region::disk(Point::ORIGIN, 100.0)).unwrap();
        assert!((a / (4.0 * PI) - 1.0).abs() < 0.01, "{a}");
    }

    #[test]
    fn empty_region_is_an_error() {
        let f = ScalarField::constant(unit(32), 1.0);
        assert_eq!(integrate(&f, &Region::disk(Point::new(5.0, 5.0), 0.1)), Err(Error::EmptyRegion));
    }

    #[test]
    fn laplacian_exact_on_quadratics() {
        let g = unit(64);
        let harm = ScalarField::from_fn(g.clone(), |p| p.x * p.x - p.y * p.y + 3.0 * p.x - p.y);
        assert!(laplacian(&harm).unwrap().max_abs() < 1e-9);
        let q = ScalarField::from_fn(g, |p| p.norm2() / 4.0);
        let l = laplacian(&q).unwrap();
        for idx in l.grid().inside_indices() {
            assert!((l.values()[idx] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn laplacian_of_sphere_factor() {
        let g = Arc::new(Grid::disk(Point::ORIGIN, 2.0, 256).unwrap());
        let u = ScalarField::from_fn(g, |p| -(1.0 + p.norm2() / 4.0).ln());
        let l = laplacian(&u).unwrap();
        for idx in l.grid().inside_indices() {
            let e2u = (2.0 * u.values()[idx]).exp();
            assert!((l.values()[idx] + e2u).abs() < 1e-3);
        }
    }

    #[test]
    fn interior_excludes_boundary_ring() {
        let g = unit(32);
        let l = laplacian(&ScalarField::constant(g.clone(), 0.0)).unwrap();
        assert!(l.grid().inside_count() < g.inside_count());
        for idx in l.grid().inside_indices() {
            assert!(g.is_interior(idx));
        }
    }

    #[test]
    fn rescale_identity_and_shift() {
        let g = Arc::new(Grid::square(1.0, 40));
        let f = ScalarField::from_fn(g.clone(), |p| p.x * p.y + p.x);
        let same = rescale_onto(&f, Point::ORIGIN, 1.0, false, &g).unwrap();
        for idx in g.inside_indices() {
            assert!((same.values()[idx] - f.values()[idx]).abs() < 1e-12);
        }
        let zero = ScalarField::constant(g.clone(), 0.0);
        let s = rescale_blowup(&zero, Point::ORIGIN, 0.5, true, 1.0, 16).unwrap();
        for idx in s.grid().inside_indices() {
            assert!((s.values()[idx] - 0.5f64.ln()).abs() < 1e-12);
        }
        let x = ScalarField::from_fn(g, |p| p.x);
        let r = 0.3;
        let s = rescale_blowup(&x, Point::ORIGIN, r, true, 1.0, 16).unwrap();
        for idx in s.grid().inside_indices() {
            let p = s.grid().center(idx);
            assert!((s.values()[idx] - (r * p.x + r.ln())).abs() < 1e-12);
        }
    }

    #[test]
    fn rescale_window_outside_fails() {
        let f = ScalarField::constant(unit(32), 0.0);
        let err = rescale_blowup(&f, Point::new(10.0, 0.0), 0.1, true, 1.0, 8).unwrap_err();
        assert_eq!(err, Error::WindowOutside);
    }

    #[test]
    fn confgrid_roundtrip_preserves_bits() {
        let f = ScalarField::from_fn(unit(24), |p| (p.x * 7.3).sin() / 3.0);
        let text = f.to_confgrid_string();
        let back = ScalarField::parse_confgrid(&text).unwrap();
        assert!(back.grid().same_layout(f.grid()));
        assert_eq!(back.grid().mask(), f.grid().mask());
        for idx in f.grid().inside_indices() {
            assert_eq!(back.values()[idx].to_bits(), f.values()[idx].to_bits());
        }
        assert!(text.lines().next().unwrap().split_whitespace().count() == 5);
    }

    #[test]
    fn confgrid_rejects_garbage() {
        assert!(ScalarField::parse_confgrid("2 2 0 0 1\n1 2 3").is_err());
        assert!(ScalarField::parse_confgrid("2 2 0 0 1\nnan nan nan nan").is_err());
        assert!(ScalarField::parse_confgrid("2 1 0 0 1\n1 x").is_err());
    }

    #[test]
    fn disconnected_mask_rejected() {
        let mask = vec![true, false, true];
        assert!(Grid::from_mask(3, 1, Point::ORIGIN, 1.0, mask, Region::Full).is_err());
    }
}

//! Sequences of conformal metrics and the diagnostics run on them:
//! concentration radii, bubble extraction, atoms of the curvature measure,
//! collapse classification, John-Nirenberg floors, linear blowups, Möbius
//! renormalization and the two-chart sphere atlas.

mod collapse;
mod concentration;
mod sphere;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use collapse::{classify_collapse, jn_floor, linear_blowup_check, CollapseReport, CollapseRow, CollapseVerdict, JnFloor, LinearFit};
pub use concentration::{
    concentration_radius, detect_atoms, extract_bubble, mobius_renormalize, Atom, BlowupRecord, CurvatureMass, Mobius, Verdict,
};
pub use sphere::{height_perturbation, sphere_point, SphereAtlas, CHART_RADIUS};

use crate::field::{integrate, Grid, Region, ScalarField};
use crate::geom::Point;
use crate::metric::ConformalMetric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Collapse,
    Bubble,
    Neck,
    Mobius,
    Custom,
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FamilyKind::Collapse => "collapse",
            FamilyKind::Bubble => "bubble",
            FamilyKind::Neck => "neck",
            FamilyKind::Mobius => "mobius",
            FamilyKind::Custom => "custom",
        })
    }
}

/// One metric of a family; `param` is the generator's own parameter
/// (scale, perturbation size, ...).
#[derive(Debug, Clone)]
pub struct Member {
    pub k: u32,
    pub param: f64,
    pub metric: ConformalMetric,
}

#[derive(Debug, Clone)]
pub struct MetricFamily {
    pub kind: FamilyKind,
    pub members: Vec<Member>,
}

impl MetricFamily {
    pub fn custom(members: Vec<(u32, ScalarField)>) -> Self {
        MetricFamily {
            kind: FamilyKind::Custom,
            members: members.into_iter().map(|(k, u)| Member { k, param: k as f64, metric: ConformalMetric::new(u) }).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn last(&self) -> Option<&Member> {
        self.members.last()
    }
}

/// The round unit-sphere factor in the chart `x ↦ x/2` of stereographic projection.
pub fn round_factor(p: Point) -> f64 {
    -(1.0 + p.norm2() / 4.0).ln()
}

/// A round sphere concentrated at `center` with scale `scale`:
/// `u = -log(1 + |x - p|²/(4s²)) - log s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bubble {
    pub center: Point,
    pub scale: f64,
}

impl Bubble {
    pub fn factor(&self, p: Point) -> f64 {
        round_factor((1.0 / self.scale) * (p - self.center)) - self.scale.ln()
    }
}

/// `u_k = k x¹ - log a_k` with `a_k² = ∫ e^{2k x¹}` over the grid, so every
/// member has unit area.
pub fn gen_collapse_family(ks: &[u32], grid: Arc<Grid>) -> MetricFamily {
    let members = ks
        .iter()
        .map(|&k| {
            let kf = k as f64;
            let e = ScalarField::from_fn(grid.clone(), |p| (2.0 * kf * p.x).exp());
            let a2 = integrate(&e, &Region::Full).expect("grid has inside cells");
            let shift = 0.5 * a2.ln();
            Member { k, param: kf, metric: ConformalMetric::new(ScalarField::from_fn(grid.clone(), |p| kf * p.x - shift)) }
        })
        .collect();
    MetricFamily { kind: FamilyKind::Collapse, members }
}

/// Member `k` superposes the bubbles of `members[k-1]` (the Laplacian is
/// linear, so each carries its own curvature mass `4π`).
pub fn gen_bubble_family(members: &[Vec<Bubble>], grid: Arc<Grid>) -> MetricFamily {
    let members = members
        .iter()
        .enumerate()
        .map(|(i, bubbles)| {
            let u = ScalarField::from_fn(grid.clone(), |p| bubbles.iter().map(|b| b.factor(p)).sum());
            let param = bubbles.iter().map(|b| b.scale).fold(f64::INFINITY, f64::min);
            Member { k: i as u32 + 1, param, metric: ConformalMetric::new(u) }
        })
        .collect();
    MetricFamily { kind: FamilyKind::Bubble, members }
}

/// Round factors concentrated at `x_k` with scale `r_k`, i.e. the round chart
/// metric pulled back by `x ↦ (x - x_k)/r_k`.
pub fn gen_mobius_family(params: &[(Point, f64)], grid: Arc<Grid>) -> MetricFamily {
    let members = params
        .iter()
        .enumerate()
        .map(|(i, &(center, scale))| {
            let b = Bubble { center, scale };
            Member { k: i as u32 + 1, param: scale, metric: ConformalMetric::new(ScalarField::from_fn(grid.clone(), |p| b.factor(p))) }
        })
        .collect();
    MetricFamily { kind: FamilyKind::Mobius, members }
}

/// The harmonic function used to perturb flat annuli.
pub fn neck_perturbation(p: Point) -> f64 {
    (p.x * p.x - p.y * p.y) / 8.0 + p.x / 4.0 + p.norm().ln() / 4.0
}

/// Flat annulus plus `t · h` for each size `t`, with `h` from [`neck_perturbation`].
pub fn gen_neck_family(sizes: &[f64], grid: Arc<Grid>) -> MetricFamily {
    let members = sizes
        .iter()
        .enumerate()
        .map(|(i, &t)| Member {
            k: i as u32 + 1,
            param: t,
            metric: ConformalMetric::new(ScalarField::from_fn(grid.clone(), |p| t * neck_perturbation(p))),
        })
        .collect();
    MetricFamily { kind: FamilyKind::Neck, members }
}

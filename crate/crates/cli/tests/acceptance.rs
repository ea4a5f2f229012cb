//! End-to-end acceptance checks. Each test prints one `criterion N ...: PASS`
//! or `FAIL` line on stdout (written past the harness capture) and fails on
//! any violated bound.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use confgeo::field::{gradient_magnitude, integrate};
use confgeo::norms::{jn_radius, weak_l2_norm, Ladder};
use confgeo::pde::{gauss_curvature, solve_poisson_dirichlet};
use confgeo::{Constants, ConformalMetric, Grid, Point, Region, ScalarField};
use confgeo_cli::{Experiment, ExperimentConfig, Row};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Collects violated bounds for one criterion.
#[derive(Default)]
struct Checks(Vec<String>);

impl Checks {
    fn le(&mut self, what: &str, value: f64, bound: f64) {
        if !(value <= bound) {
            self.0.push(format!("{what}: {value} > {bound}"));
        }
    }

    fn ge(&mut self, what: &str, value: f64, bound: f64) {
        if !(value >= bound) {
            self.0.push(format!("{what}: {value} < {bound}"));
        }
    }

    fn near(&mut self, what: &str, value: f64, want: f64, rel: f64) {
        if !((value / want - 1.0).abs() <= rel) {
            self.0.push(format!("{what}: {value} not within {rel} of {want}"));
        }
    }

    fn truth(&mut self, what: &str, ok: bool) {
        if !ok {
            self.0.push(what.to_string());
        }
    }

    fn finish(self, n: u32, title: &str) {
        let status = if self.0.is_empty() { "PASS" } else { "FAIL" };
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "criterion {n:>2} {title}: {status}");
        for f in &self.0 {
            let _ = writeln!(out, "    {f}");
        }
        assert!(self.0.is_empty(), "criterion {n} failed: {:#?}", self.0);
    }
}

/// Runs an experiment into a scratch directory and returns its rows by check name.
fn run(experiment: Experiment, tweak: impl FnOnce(&mut ExperimentConfig)) -> BTreeMap<String, Row> {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig { experiment, out: dir.path().to_path_buf(), ..Default::default() };
    tweak(&mut cfg);
    let summary = confgeo_cli::run(&cfg).unwrap();
    summary.rows.into_iter().map(|r| (r.check(), r)).collect()
}

/// Rows of family members named `name`, in increasing `k`.
fn members<'a>(rows: &'a BTreeMap<String, Row>, name: &str) -> Vec<&'a Row> {
    let mut out: Vec<&Row> = rows.values().filter(|r| r.k.is_some() && r.name == name).collect();
    out.sort_by_key(|r| r.k);
    out
}

fn value(rows: &BTreeMap<String, Row>, check: &str) -> f64 {
    rows.get(check).unwrap_or_else(|| panic!("missing row {check}")).value
}

#[test]
fn criterion_01_euclidean_recovery() {
    let mut c = Checks::default();
    let m = ConformalMetric::new(ScalarField::constant(Arc::new(Grid::unit_disk(256)), 0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..100 {
        let x = Point::polar(rng.gen_range(0.02..0.95), rng.gen_range(0.0..2.0 * PI));
        c.near(&format!("d(0, {x})"), m.distance(Point::ORIGIN, x).unwrap(), x.norm(), 0.015);
    }
    c.near("area(D_1/2)", m.area(&Region::disk(Point::ORIGIN, 0.5)).unwrap(), PI / 4.0, 0.005);
    c.finish(1, "euclidean recovery");
}

#[test]
fn criterion_02_poisson_oracle() {
    let mut c = Checks::default();
    let grid = Arc::new(Grid::unit_disk(256));
    let v = solve_poisson_dirichlet(&ScalarField::constant(grid.clone(), 4.0), &Region::unit_disk()).unwrap();
    let err = grid.inside_indices().map(|i| (v.values()[i] - (1.0 - grid.center(i).norm2())).abs()).fold(0.0, f64::max);
    c.le("max |v - (1 - |x|²)|", err, 1e-3);
    let weak = weak_l2_norm(&gradient_magnitude(&v), &Region::unit_disk()).unwrap();
    c.near("weak L2 of |grad v|", weak, PI.sqrt(), 0.03);
    c.finish(2, "poisson oracle");
}

#[test]
fn criterion_03_brezis_merle() {
    let mut c = Checks::default();
    let rows = run(Experiment::BrezisMerle, |cfg| cfg.trials = 20);
    let exp: Vec<&Row> = members(&rows, "exp_integral");
    c.truth(&format!("expected 20 trials, found {}", exp.len()), exp.len() == 20);
    for r in exp {
        c.le(&r.check(), r.value, 16.0);
    }
    c.finish(3, "brezis-merle exponential bound");
}

#[test]
fn criterion_04_sphere_identities() {
    let mut c = Checks::default();
    let round = |p: Point| -(1.0 + p.norm2() / 4.0).ln();
    let chart = ScalarField::from_fn(Arc::new(Grid::disk(Point::ORIGIN, 2.5, 256).unwrap()), round);
    let k = gauss_curvature(&chart).unwrap().k;
    for i in k.grid().cells_in(&Region::disk(Point::ORIGIN, 2.0)) {
        c.le(&format!("|K - 1| at {}", k.grid().center(i)), (k.values()[i] - 1.0).abs(), 1e-2);
    }
    let wide = ScalarField::from_fn(Arc::new(Grid::disk(Point::ORIGIN, 100.0, 800).unwrap()), round);
    c.near("area over D_100", integrate(&wide.map(|u| (2.0 * u).exp()), &Region::Full).unwrap(), 4.0 * PI, 0.01);
    let ratio = ConformalMetric::new(chart).ball_volume_ratio(Point::ORIGIN, 1.0).unwrap();
    c.le("ball volume ratio at r = 1", ratio, 1.02);
    c.finish(4, "sphere identities");
}

#[test]
fn criterion_05_jn_closed_forms() {
    let mut c = Checks::default();
    let grid = Arc::new(Grid::unit_disk(256));
    let ladder = Ladder::for_grid(&grid, &Constants::default());
    let d = Region::unit_disk();
    let x = ScalarField::from_fn(grid.clone(), |p| p.x);
    for lambda in [0.1, 0.3, 0.5, 1.0] {
        let want = (3.0 * PI * lambda / 4.0).min(1.0);
        c.near(&format!("rho(x1) at lambda {lambda}"), jn_radius(&x, Point::ORIGIN, &d, lambda, ladder), want, 0.05);
    }
    let s = ScalarField::from_fn(grid, |p| p.x.signum());
    c.truth("rho(sign x1) at lambda 1/2 is not 0", jn_radius(&s, Point::ORIGIN, &d, 0.5, ladder) == 0.0);
    c.finish(5, "john-nirenberg radius closed forms");
}

#[test]
fn criterion_06_collapse() {
    let mut c = Checks::default();
    let lambda = Constants::default().lambda;
    let rows = run(Experiment::Collapse, |cfg| cfg.kmax = Some(20));
    let ks: Vec<u32> = members(&rows, "area_err").iter().filter_map(|r| r.k).collect();
    c.truth(&format!("members {ks:?}"), ks == [2, 4, 8, 16, 20]);
    for r in members(&rows, "area_err") {
        c.le(&r.check(), r.value, 0.005);
    }
    let floors: Vec<&Row> = members(&rows, "jn_floor");
    for (i, r) in floors.iter().enumerate() {
        let k = r.k.unwrap() as f64;
        c.le(&r.check(), r.value, (3.0 * PI * lambda / (4.0 * k)).min(1.0) * 1.05);
        if i > 0 {
            c.truth(&format!("{} not below k{}", r.check(), floors[i - 1].k.unwrap()), r.value < floors[i - 1].value);
        }
    }
    c.ge("volume ratio of e^(2x1) at r = 20", value(&rows, "volume_ratio_r20"), 10.0);
    c.truth("verdict is not (b)", value(&rows, "verdict_b") == 1.0);
    for name in ["area_half", "diameter_half"] {
        let v: Vec<f64> = members(&rows, name).iter().map(|r| r.value).collect();
        c.truth(&format!("{name} has {} members", v.len()), v.len() == 5);
        c.truth(&format!("{name} not strictly decreasing: {v:?}"), v.windows(2).all(|w| w[1] < w[0]));
    }
    c.finish(6, "collapse counterexample");
}

#[test]
fn criterion_07_neck() {
    let mut c = Checks::default();
    let rows = run(Experiment::Neck, |cfg| cfg.kmax = Some(10));
    c.ge("flat ratio_min", value(&rows, "flat.ratio_min"), 0.98);
    c.le("flat ratio_max", value(&rows, "flat.ratio_max"), 3.06);
    c.le("flat area ratio error", value(&rows, "flat.area_ratio_err"), 0.01);
    c.le("shift covariance drift", value(&rows, "shift_covariance"), 1e-9);
    let lo: Vec<&Row> = members(&rows, "ratio_min");
    let hi: Vec<&Row> = members(&rows, "ratio_max");
    c.truth("expected 10 perturbed members", lo.len() == 10 && hi.len() == 10);
    for r in lo {
        c.ge(&r.check(), r.value, confgeo_cli::experiments::NECK_RATIO_FLOOR);
    }
    for r in hi {
        c.le(&r.check(), r.value, confgeo_cli::experiments::NECK_RATIO_CEILING);
    }
    c.finish(7, "neck estimate");
}

#[test]
fn criterion_08_gromov_hausdorff() {
    let mut c = Checks::default();
    let rows = run(Experiment::GhConverge, |cfg| cfg.kmax = Some(32));
    c.le("self distance", value(&rows, "self_distance"), 0.0);
    c.le("point vs space error", value(&rows, "point_vs_space_err"), 1e-12);
    c.le("bracket misses over 50 pairs", value(&rows, "bracket_misses"), 0.0);
    let uppers: Vec<&Row> = members(&rows, "gh_upper");
    c.truth("upper bounds not decreasing", uppers.windows(2).all(|w| w[1].value < w[0].value));
    match uppers.last() {
        Some(r) => {
            c.truth(&format!("last member is k{:?}", r.k), r.k == Some(32));
            c.le("gh upper at k = 32", r.value, 0.05);
        }
        None => c.truth("no members", false),
    }
    c.finish(8, "gromov-hausdorff convergence");
}

#[test]
fn criterion_09_bubbles() {
    let mut c = Checks::default();
    let rows = run(Experiment::Bubble, |_| {});
    c.truth("two-bubble member did not give 2 records", value(&rows, "k1.record_count") == 1.0);
    for b in ["b0", "b1"] {
        c.le(&format!("{b} center offset (cells)"), value(&rows, &format!("k1.{b}.center_cells")), 2.0);
        c.le(&format!("{b} scale factor"), value(&rows, &format!("k1.{b}.scale_factor")), 2.0);
        c.le(&format!("{b} profile L1(D_2)"), value(&rows, &format!("k1.{b}.profile_l1")), 0.1);
    }
    c.le("smallest atom mass error", value(&rows, "atom_mass_err"), 0.05);
    c.finish(9, "bubble machinery");
}

#[test]
fn criterion_10_mobius() {
    let mut c = Checks::default();
    let rows = run(Experiment::SpherePinch, |cfg| cfg.kmax = Some(2));
    // Member k has scale 0.1/k, so k = 2 is the r* = 0.05 pullback.
    c.truth("not concentrated", value(&rows, "k2.concentrated") == 1.0);
    c.le("scale factor", value(&rows, "k2.scale_factor"), 2.0);
    c.le("center offset (cells)", value(&rows, "k2.center_cells"), 2.0);
    c.le("L2 distance to round on |x| < 4", value(&rows, "k2.l2_to_round"), 0.05);
    c.finish(10, "mobius renormalization");
}

#[test]
fn criterion_11_k_ge_1() {
    let mut c = Checks::default();
    let rows = run(Experiment::KGe1, |_| {});
    let n = members(&rows, "diameter").len();
    c.truth("no members", n > 0);
    for r in members(&rows, "diameter") {
        c.le(&r.check(), r.value, PI * 1.03);
    }
    for r in members(&rows, "area") {
        c.le(&r.check(), r.value, 4.0 * PI * PI * 1.03);
    }
    c.finish(11, "curvature at least one");
}

#[test]
fn criterion_12_determinism() {
    let mut c = Checks::default();
    let mut reports = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig { experiment: Experiment::GhConverge, out: dir.path().to_path_buf(), ..Default::default() };
        confgeo_cli::run(&cfg).unwrap();
        reports.push(std::fs::read(dir.path().join("report.csv")).unwrap());
    }
    c.truth("report.csv differs between runs", reports[0] == reports[1]);
    c.finish(12, "determinism");
}

use std::hint::black_box;
use std::sync::Arc;

use confgeo::analysis::{gen_bubble_family, Bubble, CurvatureMass};
use confgeo::gh::{gh_bounds, gh_exact};
use confgeo::pde::{gauss_curvature, solve_poisson_dirichlet};
use confgeo::{ConformalMetric, FiniteMetricSpace, Grid, Point, Region, ScalarField};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn disk(n: usize) -> Arc<Grid> {
    Arc::new(Grid::unit_disk(n))
}

fn poisson(c: &mut Criterion) {
    let mut group = c.benchmark_group("poisson");
    group.sample_size(10);
    for n in [64, 128, 256] {
        let f = ScalarField::constant(disk(n), 4.0);
        group.bench_with_input(BenchmarkId::from_parameter(n), &f, |b, f| {
            b.iter(|| solve_poisson_dirichlet(black_box(f), &Region::unit_disk()).unwrap())
        });
    }
    group.finish();
}

fn curvature(c: &mut Criterion) {
    let u = ScalarField::from_fn(disk(256), |p| -(1.0 + p.norm2() / 4.0).ln());
    c.bench_function("gauss_curvature/256", |b| b.iter(|| gauss_curvature(black_box(&u)).unwrap()));
}

fn distance(c: &mut Criterion) {
    let mut group = c.benchmark_group("distance_field");
    group.sample_size(10);
    for n in [64, 128, 256] {
        let m = ConformalMetric::new(ScalarField::from_fn(disk(n), |p| 0.5 * p.x));
        group.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| b.iter(|| m.distance_field(black_box(Point::ORIGIN)).unwrap()));
    }
    group.finish();
}

fn concentration(c: &mut Criterion) {
    let grid = Arc::new(Grid::square(0.6, 256));
    let family = gen_bubble_family(&[vec![Bubble { center: Point::new(0.1, -0.05), scale: 0.02 }]], grid);
    let mass = CurvatureMass::new(family.members[0].metric.u()).unwrap();
    c.bench_function("most_concentrated/256", |b| b.iter(|| mass.most_concentrated(black_box(8.0 * std::f64::consts::PI / 5.0))));
}

fn random_space(rng: &mut ChaCha8Rng, n: usize) -> FiniteMetricSpace {
    let pts: Vec<Point> = (0..n).map(|_| Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    FiniteMetricSpace::euclidean(&pts).unwrap()
}

fn gromov_hausdorff(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // 24 points is the landmark count of the convergence experiment.
    let (x, y) = (random_space(&mut rng, 24), random_space(&mut rng, 24));
    c.bench_function("gh_bounds/24", |b| b.iter(|| gh_bounds(black_box(&x), black_box(&y))));
    let (x, y) = (random_space(&mut rng, 6), random_space(&mut rng, 6));
    c.bench_function("gh_exact/6", |b| b.iter(|| gh_exact(black_box(&x), black_box(&y)).unwrap()));
}

criterion_group!(benches, poisson, curvature, distance, concentration, gromov_hausdorff);
criterion_main!(benches);

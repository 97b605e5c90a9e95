use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kslimit::dynamics::{init_state, step, Bump, InitPreset, SimConfig};
use kslimit::mesh::{chemotaxis_divergence, laplacian, Field, FluxMode, Grid, HelmholtzOperator};
use kslimit::theory::verify::{run_suite, Formulas, VerifyConfig};
use kslimit::theory::ChiParams;
use std::hint::black_box;

fn grids() -> Vec<(&'static str, Grid)> {
    vec![
        ("1d-512", Grid::line(1.0, 512).unwrap()),
        ("1d-4096", Grid::line(1.0, 4096).unwrap()),
        ("2d-64x64", Grid::rect(1.0, 1.0, 64, 64).unwrap()),
        ("2d-128x128", Grid::rect(1.0, 1.0, 128, 128).unwrap()),
    ]
}

fn bump(g: Grid) -> Field {
    Field::from_fn(g, |x| {
        1.0 + (-((x[0] - 0.4).powi(2) + (x[1] - 0.5).powi(2)) / 0.02).exp()
    })
}

fn helmholtz(c: &mut Criterion) {
    let mut group = c.benchmark_group("helmholtz_solve");
    for (name, g) in grids() {
        let op = HelmholtzOperator::new(g, 1e3).unwrap();
        let rhs = bump(g);
        group.bench_with_input(BenchmarkId::from_parameter(name), &rhs, |b, rhs| {
            b.iter(|| op.solve(black_box(rhs), 1e-10).unwrap())
        });
    }
    group.finish();
}

fn operators(c: &mut Criterion) {
    let chi = ChiParams::new(2.0, 1.0, 2.0).unwrap();
    let mut group = c.benchmark_group("operators");
    for (name, g) in grids() {
        let (u, v) = (bump(g), Field::from_fn(g, |x| 1.0 + 0.5 * x[0]));
        group.bench_function(BenchmarkId::new("laplacian", name), |b| {
            b.iter(|| laplacian(&g, black_box(&u)).unwrap())
        });
        for mode in [FluxMode::Centered, FluxMode::Upwind] {
            group.bench_function(BenchmarkId::new(format!("divergence-{}", mode.as_str()), name), |b| {
                b.iter(|| chemotaxis_divergence(&g, black_box(&u), &v, &chi, mode).unwrap())
            });
        }
    }
    group.finish();
}

fn time_step(c: &mut Criterion) {
    let chi = ChiParams::new(2.0, 1.0, 2.0).unwrap();
    let init = InitPreset::GaussianBump {
        u: Bump::gaussian(0.1, 5.0, 0.05),
        v: Bump::constant(1.0),
    };
    let mut group = c.benchmark_group("step");
    for (name, g) in grids() {
        for lambda in [0.0, 0.01] {
            let cfg = SimConfig::new(g, chi, lambda, 1e-4, 1.0, init);
            let s = init_state(&cfg).unwrap();
            group.bench_function(BenchmarkId::new(format!("lambda-{lambda}"), name), |b| {
                b.iter(|| step(black_box(&s), &cfg).unwrap())
            });
        }
    }
    group.finish();
}

fn verify_suite(c: &mut Criterion) {
    let mut group = c.benchmark_group("verify");
    group.sample_size(10);
    group.bench_function("default-suite", |b| {
        b.iter(|| run_suite(black_box(&VerifyConfig::default()), &Formulas::default()))
    });
    group.finish();
}

criterion_group!(benches, helmholtz, operators, time_step, verify_suite);
criterion_main!(benches);

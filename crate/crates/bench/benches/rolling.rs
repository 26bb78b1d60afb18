use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::{DMatrix, DVector};
use symroll::homogeneous::intrinsic_roll;
use symroll::integrate::reproject;
use symroll::linalg_semi::se_compose;
use symroll::{CartanModel, CurveInput, RigidMotion, SignatureForm};
use symroll_bench::{control, sphere_rolling, stiefel_rolling};

fn se_algebra(c: &mut Criterion) {
    let form = SignatureForm::from_pq(3, 2);
    let x = DMatrix::from_fn(5, 5, |i, j| if i < j { 0.1 * (i + 2 * j) as f64 } else { 0.0 });
    let r = form.apply_rows(&(&x - x.transpose())).exp();
    let g = RigidMotion::from_parts(r.clone(), DVector::from_element(5, 0.5)).unwrap();
    c.bench_function("se_compose_5", |b| b.iter(|| se_compose(black_box(&g), black_box(&g)).unwrap()));
    let noisy = &r + DMatrix::from_element(5, 5, 1e-7);
    c.bench_function("reproject_5", |b| b.iter(|| reproject(black_box(&noisy), &form).unwrap()));
}

fn extrinsic(c: &mut Criterion) {
    let mut group = c.benchmark_group("extrinsic");
    group.sample_size(10);
    for n in [250, 1000] {
        group.bench_with_input(BenchmarkId::new("sphere", n), &n, |b, &n| b.iter(|| sphere_rolling(n)));
        group.bench_with_input(BenchmarkId::new("stiefel_4_2", n), &n, |b, &n| b.iter(|| stiefel_rolling(4, 2, n)));
    }
    let rolled = sphere_rolling(1000);
    group.bench_function("residual_suite_sphere_1000", |b| b.iter(|| rolled.residuals().unwrap()));
    group.finish();
}

fn intrinsic(c: &mut Criterion) {
    let mut group = c.benchmark_group("intrinsic");
    group.sample_size(10);
    for name in ["hyperbolic_disc", "so_2_2"] {
        let model = CartanModel::resolve(name).unwrap();
        let input = CurveInput::Control(control(model.manifold_dim(), 500));
        group.bench_function(name, |b| b.iter(|| intrinsic_roll(&model, &input).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, se_algebra, extrinsic, intrinsic);
criterion_main!(benches);

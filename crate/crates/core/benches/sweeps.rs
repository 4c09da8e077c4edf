use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use serde_json::Value;

use convlab::convexity::{sample_directions, scc_check};
use convlab::jacobi::conjugate_radius;
use convlab::models::get_model;
use convlab::par;

fn sweeps(c: &mut Criterion) {
    let m = get_model("ellipsoid", &Value::Null).unwrap().manifold;
    let p = m.point(&[0.9, 0.7]).unwrap();
    let dirs = sample_directions(&m, &p, 32, 0).unwrap();
    let mut group = c.benchmark_group("sweeps");
    group.sample_size(10);
    for sequential in [false, true] {
        let label = if sequential { "sequential" } else { "parallel" };
        group.bench_with_input(BenchmarkId::new("conjugate_radii", label), &sequential, |b, &seq| {
            par::set_sequential(seq);
            b.iter(|| par::map(&dirs, |v| conjugate_radius(&m, &p, v, 4.0).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("scc_sphere", label), &sequential, |b, &seq| {
            par::set_sequential(seq);
            b.iter(|| scc_check(&m, &p, 1.0, 32, 0).unwrap())
        });
    }
    par::set_sequential(false);
    group.finish();
}

criterion_group!(benches, sweeps);
criterion_main!(benches);

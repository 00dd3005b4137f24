use criterion::{criterion_group, criterion_main, Criterion};
use scpp_core::limits::draw_limit;
use scpp_core::LimitKind;

fn limit_paths(c: &mut Criterion) {
    let mut g = c.benchmark_group("draw_limit");
    for (name, kind) in [
        ("two_sided_1_4", LimitKind::TwoSided { a: 1.0, b: 4.0 }),
        ("rho_8", LimitKind::Rho { rho: 8.0 }),
        ("rho_0.1", LimitKind::Rho { rho: 0.1 }),
    ] {
        let mut i = 0u64;
        g.bench_function(name, |b| {
            b.iter(|| {
                i += 1;
                draw_limit(kind, 7, i).unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, limit_paths);
criterion_main!(benches);

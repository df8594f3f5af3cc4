use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use towerzeta::count::count_places_with;
use towerzeta::curve::curve_from_id;

fn count(c: &mut Criterion) {
    let mut g = c.benchmark_group("count");
    g.sample_size(10);
    for (id, k) in [("T4", 6u32), ("Q5u0", 6), ("Q6u0s1", 6), ("T6", 5)] {
        let curve = curve_from_id(id).unwrap();
        g.throughput(Throughput::Elements(1 << (2 * k)));
        g.bench_function(format!("{id} k={k}"), |b| b.iter(|| count_places_with(&curve, k, true).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, count);
criterion_main!(benches);

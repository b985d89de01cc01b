use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use netfx_bench::random_pair;
use netfx_core::{
    brute_force_te_oracle, shuffle_surrogate_threshold, transfer_entropy, HistoryConfig, LogBase,
};

fn estimator(c: &mut Criterion) {
    let mut group = c.benchmark_group("transfer_entropy");
    for n in [184, 3650, 100_000] {
        let (dest, src) = random_pair(n, 3, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| transfer_entropy(black_box(&dest), black_box(&src), HistoryConfig::default()))
        });
    }
    group.finish();

    let (dest, src) = random_pair(3650, 3, 2);
    let deep = HistoryConfig::new(3, 3, LogBase::Bits).unwrap();
    c.bench_function("transfer_entropy/k3_l3", |b| {
        b.iter(|| transfer_entropy(black_box(&dest), black_box(&src), deep))
    });
    c.bench_function("oracle/k3_l3", |b| {
        b.iter(|| brute_force_te_oracle(black_box(&dest), black_box(&src), deep))
    });
}

fn surrogates(c: &mut Criterion) {
    let (dest, src) = random_pair(184, 3, 3);
    c.bench_function("surrogate/184x200", |b| {
        b.iter(|| shuffle_surrogate_threshold(&dest, &src, HistoryConfig::default(), 200, 7))
    });
}

criterion_group!(benches, estimator, surrogates);
criterion_main!(benches);

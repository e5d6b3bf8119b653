use criterion::{criterion_group, criterion_main, Criterion};

use costa_sos::certify::verify;
use costa_sos::dimension::Dimension;
use costa_sos::pipeline::{prepare, prove, Conjecture, ProveOutcome};
use costa_sos_bench::quick_instances;

fn bench_prove(c: &mut Criterion) {
    let mut group = c.benchmark_group("prove");
    group.sample_size(10);
    for (label, req) in quick_instances() {
        group.bench_function(label, |b| b.iter(|| prove(&req).unwrap()));
    }
    group.finish();
}

fn bench_prepare(c: &mut Criterion) {
    let mut group = c.benchmark_group("prepare");
    group.sample_size(10);
    group.bench_function("C3(4,2)", |b| b.iter(|| prepare(Conjecture::C3, 4, Dimension::Concrete(2), true).unwrap()));
    group.bench_function("C3(3,3)", |b| b.iter(|| prepare(Conjecture::C3, 3, Dimension::Concrete(3), true).unwrap()));
    group.finish();
}

fn bench_verify(c: &mut Criterion) {
    let mut group = c.benchmark_group("verify");
    for (label, req) in quick_instances() {
        let ProveOutcome::Proved { certificate, .. } = prove(&req).unwrap() else { continue };
        group.bench_function(label, |b| b.iter(|| verify(&certificate).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bench_prove, bench_prepare, bench_verify);
criterion_main!(benches);

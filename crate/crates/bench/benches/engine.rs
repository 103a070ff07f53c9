use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion, Throughput};

use cma_bench::{note, populated};
use cma_core::{PrincipalId, RecallQuery};

fn recall(c: &mut Criterion) {
    let mut g = c.benchmark_group("recall");
    for n in [1_000, 10_000] {
        let (e, citizen, _) = populated(n);
        let q = RecallQuery { terms: Some(vec!["ledger".into(), "flood".into()]), ..Default::default() };
        g.throughput(Throughput::Elements(n as u64));
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| e.recall(&citizen.citizen_id, &q).unwrap())
        });
    }
    g.finish();
}

fn verify_chain(c: &mut Criterion) {
    let mut g = c.benchmark_group("verify_chain");
    for n in [1_000, 10_000] {
        let (e, _, _) = populated(n);
        g.throughput(Throughput::Elements(n as u64 + 1));
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| e.verify_chain(0, None).unwrap()));
    }
    g.finish();
}

fn append(c: &mut Criterion) {
    let me = PrincipalId::new("ada-1");
    c.bench_function("append/in_memory", |b| {
        b.iter_batched(
            || populated(100),
            |(mut e, citizen, _)| {
                for i in 0..100 {
                    e.append(&citizen.citizen_id, &note(100 + i), &me).unwrap();
                }
            },
            BatchSize::LargeInput,
        )
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = recall, verify_chain, append
}
criterion_main!(benches);

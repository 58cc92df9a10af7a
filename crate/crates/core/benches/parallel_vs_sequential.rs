use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use capflp::bench::{run_bench, BenchConfig};
use capflp::instance::{generate_euclidean, CapacityProfile, GeneratorParams, OpenSet};
use capflp::oracle::exact_optimum_with;
use capflp::search::{best_improving_move, SearchContext, SearchParams, Variant};
use capflp::Execution;

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn move_scan(c: &mut Criterion) {
    let mut group = c.benchmark_group("move_scan");
    for (variant, capacity) in [
        (Variant::Uniform, CapacityProfile::Uniform { capacity: 25 }),
        (Variant::Nonuniform, CapacityProfile::Random { lo: 5, hi: 40 }),
    ] {
        let params = GeneratorParams {
            n_facilities: 14,
            n_clients: 30,
            capacity,
            ..GeneratorParams::default()
        };
        let inst = generate_euclidean(&params, 7).unwrap();
        for (name, exec) in MODES {
            let sp = SearchParams {
                execution: exec,
                ..SearchParams::default()
            };
            let ctx = SearchContext::new(&inst, &sp).unwrap();
            let state = ctx.state(OpenSet::from_indices([0, 3, 6, 9])).unwrap();
            group.bench_function(BenchmarkId::new(format!("{variant:?}"), name), |b| {
                b.iter(|| black_box(best_improving_move(&ctx, variant, &state, 1)))
            });
        }
    }
    group.finish();
}

fn oracle(c: &mut Criterion) {
    let mut group = c.benchmark_group("oracle");
    group.sample_size(10);
    let params = GeneratorParams {
        n_facilities: 11,
        n_clients: 20,
        ..GeneratorParams::default()
    };
    let inst = generate_euclidean(&params, 3).unwrap();
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| black_box(exact_optimum_with(&inst, 16, exec).unwrap()))
        });
    }
    group.finish();
}

fn bench_batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("ratio_batch");
    group.sample_size(10);
    for (name, exec) in MODES {
        let mut cfg = BenchConfig::new(Variant::Nonuniform, 16);
        cfg.params.execution = exec;
        group.bench_function(name, |b| b.iter(|| black_box(run_bench(&cfg).unwrap())));
    }
    group.finish();
}

criterion_group!(benches, move_scan, oracle, bench_batch);
criterion_main!(benches);

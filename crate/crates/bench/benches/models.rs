use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use loopforge_bench::instance;
use loopforge_core::cliques::{generate_loop_candidates, CandidateOptions};
use loopforge_core::geometry::build_neighbourhood_graph;
use loopforge_core::{generate_instance, solve, GenerationConfig, ModelKind, ReferenceProfiles, SolveOptions};

fn generation(c: &mut Criterion) {
    let profiles = ReferenceProfiles::synthetic(2022);
    let mut group = c.benchmark_group("generate");
    for n in [10, 50] {
        let config = GenerationConfig::reference(1, n, 7);
        group.bench_with_input(BenchmarkId::from_parameter(n), &config, |b, config| {
            b.iter(|| generate_instance(config, &profiles).unwrap())
        });
    }
    group.finish();
}

fn candidates(c: &mut Criterion) {
    let inst = instance(3, 30, 1, true);
    let graph = build_neighbourhood_graph(&inst).unwrap();
    c.bench_function("candidates/clustered_30", |b| {
        b.iter(|| generate_loop_candidates(&inst, &graph, CandidateOptions::default()).unwrap())
    });
}

fn models(c: &mut Criterion) {
    let uniform = instance(0, 10, 1, false);
    let clustered = instance(0, 15, 1, true);
    let options = SolveOptions::default();
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    for kind in [ModelKind::SlCpct, ModelKind::SlExt] {
        group.bench_function(BenchmarkId::new(kind.name(), "uniform_10x1d"), |b| {
            b.iter(|| solve(kind, &uniform, &options).unwrap())
        });
    }
    for kind in [ModelKind::MlCol, ModelKind::MlColExt, ModelKind::MlCpct] {
        group.bench_function(BenchmarkId::new(kind.name(), "clustered_15x1d"), |b| {
            b.iter(|| solve(kind, &clustered, &options).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, generation, candidates, models);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vulnprop_bench::ecosystem;
use vulnprop_core::synth::generate_corpus;
use vulnprop_core::*;

fn build(c: &mut Criterion) {
    let mut group = c.benchmark_group("build");
    group.sample_size(10);
    for libraries in [500, 2_000] {
        let params = SynthParams {
            library_count: libraries,
            max_versions_per_library: 20,
            dependency_probability: 3.0 / libraries as f64,
            vulnerability_count: 20,
            fix_release_probability: 0.7,
            seed: 1,
        };
        let corpus = generate_corpus(&params).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(libraries), &corpus, |b, corpus| {
            b.iter(|| {
                let built = build_graph(corpus.inputs.clone(), &corpus.metadata).unwrap();
                match_vulnerabilities(&built.graph, &corpus.vulns)
            })
        });
    }
    group.finish();
}

fn propagation(c: &mut Criterion) {
    let mut group = c.benchmark_group("propagation");
    for libraries in [500, 2_000] {
        let g = ecosystem(libraries, 20, 2);
        group.bench_with_input(BenchmarkId::new("shortest", libraries), &g, |b, g| {
            b.iter(|| propagation_histogram(g, HistogramMode::ShortestPerLibrary, Stratify::Severity))
        });
        group.bench_with_input(BenchmarkId::new("all_levels", libraries), &g, |b, g| {
            b.iter(|| propagation_histogram(g, HistogramMode::AllLevels, Stratify::None))
        });
        group.bench_with_input(BenchmarkId::new("stats", libraries), &g, |b, g| {
            b.iter(|| ecosystem_stats(g))
        });
    }
    group.finish();
}

fn upgrades(c: &mut Criterion) {
    let mut group = c.benchmark_group("upgrades");
    group.sample_size(20);
    for libraries in [500, 2_000] {
        let g = ecosystem(libraries, 20, 3);
        for (name, mode) in [("strict", FixMode::StrictVersion), ("vuln_aware", FixMode::VulnAware)] {
            group.bench_with_input(BenchmarkId::new(name, libraries), &g, |b, g| {
                b.iter(|| fixability_report(g, Grouping::Level, Scope::AllVersions, mode))
            });
        }
    }
    group.finish();
}

fn persistence(c: &mut Criterion) {
    let g = ecosystem(1_000, 20, 4);
    let mut buf = Vec::new();
    save_graph(&g, &mut buf).unwrap();
    c.bench_function("persist/save", |b| {
        b.iter(|| {
            let mut out = Vec::with_capacity(buf.len());
            save_graph(&g, &mut out).unwrap();
            out
        })
    });
    c.bench_function("persist/load", |b| b.iter(|| load_graph(buf.as_slice()).unwrap()));
}

criterion_group!(benches, build, propagation, upgrades, persistence);
criterion_main!(benches);

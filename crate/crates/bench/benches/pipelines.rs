use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use wsi_bench::{neighbour_graph, partition, sparse_nodes, world, MethodTwoInputs, LEMMA};
use wsi_core::clustering::{build_sparse_positive_graph, chinese_whispers, DEFAULT_MAX_ITERATIONS};
use wsi_core::evaluation::{bcubed_scores, Weighting};
use wsi_core::method_two::{cluster_representatives, MethodTwoParams};

fn neighbours(c: &mut Criterion) {
    let store = world(2, 20).store().unwrap();
    c.bench_function("nearest_neighbors/floor_0.4", |b| {
        b.iter(|| {
            store
                .nearest_neighbors(black_box(LEMMA), usize::MAX, Some(0.4))
                .unwrap()
        })
    });
}

fn chinese_whispers_bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("chinese_whispers");
    for senses in [2, 4] {
        let graph = neighbour_graph(&world(senses, 20).store().unwrap());
        group.bench_with_input(
            BenchmarkId::new("neighbour_graph", graph.node_count()),
            &graph,
            |b, g| b.iter(|| chinese_whispers(g, DEFAULT_MAX_ITERATIONS, black_box(7))),
        );
    }
    group.finish();
}

fn method_two(c: &mut Criterion) {
    let mut group = c.benchmark_group("method_two");
    group.sample_size(20);
    for per_sense in [20, 50] {
        let inputs = MethodTwoInputs::new(world(2, per_sense));
        let params = MethodTwoParams::default();
        let vectors = inputs.vectors(&params);
        let nodes = sparse_nodes(&vectors);
        group.bench_with_input(BenchmarkId::new("sparse_graph", vectors.len()), &nodes, |b, n| {
            b.iter(|| build_sparse_positive_graph(n).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("cluster", vectors.len()), &vectors, |b, v| {
            b.iter(|| cluster_representatives(v, 1, DEFAULT_MAX_ITERATIONS).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("vectors", vectors.len()), &inputs, |b, i| {
            b.iter(|| i.vectors(&params))
        });
    }
    group.finish();
}

fn bcubed(c: &mut Criterion) {
    let mut group = c.benchmark_group("bcubed");
    for n in [50, 1000] {
        let p = partition(n, 6, 6);
        group.bench_with_input(BenchmarkId::new("n", n), &p, |b, p| {
            b.iter(|| bcubed_scores(p, Weighting::N).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("nc", n), &p, |b, p| {
            b.iter(|| bcubed_scores(p, Weighting::Nc).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, neighbours, chinese_whispers_bench, method_two, bcubed);
criterion_main!(benches);

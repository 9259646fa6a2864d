use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mfscope::localgeom::{nnk_diameters, GraphKind};
use mfscope::{estimate_sigma, knn_graph, nnk_graph, GeomConfig, GraphConfig, Graphs};
use mfscope_bench::{flat_cloud, swiss_roll};

fn knn(c: &mut Criterion) {
    let mut group = c.benchmark_group("knn_graph");
    group.sample_size(10);
    for n in [500, 2000] {
        let cloud = flat_cloud(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &cloud, |b, cloud| {
            b.iter(|| knn_graph(cloud, 30).unwrap())
        });
    }
    group.finish();
}

fn nnk(c: &mut Criterion) {
    let mut group = c.benchmark_group("nnk_graph");
    group.sample_size(10);
    for n in [500, 2000] {
        let cloud = swiss_roll(n);
        let knn = knn_graph(&cloud, 30).unwrap();
        let sigma = estimate_sigma(&knn, 15).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &cloud, |b, cloud| {
            b.iter(|| nnk_graph(cloud, &knn, sigma).unwrap())
        });
    }
    group.finish();
}

fn local_geometry(c: &mut Criterion) {
    let cloud = flat_cloud(2000);
    let graphs = Graphs::build(&cloud, &GraphConfig::default()).unwrap();
    let geom = GeomConfig::default();
    let mut group = c.benchmark_group("local_geometry");
    group.sample_size(10);
    group.bench_function("nnk_subspaces_2000", |b| {
        b.iter(|| graphs.subspaces(&cloud, GraphKind::Nnk, &geom))
    });
    group.bench_function("nnk_diameters_2000", |b| b.iter(|| nnk_diameters(&cloud, &graphs.nnk, true)));
    group.finish();
}

criterion_group!(benches, knn, nnk, local_geometry);
criterion_main!(benches);

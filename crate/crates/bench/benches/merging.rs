use criterion::{criterion_group, criterion_main, Criterion};
use mfscope::multiscale::MetricSelection;
use mfscope::{run_multiscale, GraphConfig, MergeConfig, MergePolicy};
use mfscope_bench::flat_cloud;

fn merge_scale(c: &mut Criterion) {
    let cloud = flat_cloud(1000);
    let mut group = c.benchmark_group("merge_200_of_1000");
    group.sample_size(10);
    for policy in [MergePolicy::Knn, MergePolicy::Nnk] {
        let mut cfg = MergeConfig::new(policy, 200, 1);
        cfg.graph = GraphConfig::with_k(30);
        cfg.metrics = MetricSelection {
            id: false,
            diameters: false,
            angles: false,
        };
        group.bench_function(policy.name(), |b| b.iter(|| run_multiscale(&cloud, &cfg).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, merge_scale);
criterion_main!(benches);

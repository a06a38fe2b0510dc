use adhist::datagen::{generate, SourceKind, SourceSpec};
use adhist::kernels::{
    adaptive_histogram, naive_histogram, reference_histogram, WorkerGroupConfig,
};
use adhist::pattern::compute_binning_pattern;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

const PIXELS: usize = 1 << 22;

fn kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("histogram");
    group.throughput(Throughput::Bytes(PIXELS as u64));
    group.sample_size(20);
    for (label, kind) in [
        ("random", SourceKind::UniformRandom),
        ("constant-127", SourceKind::Constant(127)),
    ] {
        let spec = SourceSpec::new(kind, 1, PIXELS);
        let chunk = generate(&spec).unwrap();
        let prior = reference_histogram(&generate(&spec.for_chunk(1)).unwrap());
        let pattern = compute_binning_pattern(&prior, 960, 8).unwrap();
        for (exec, cfg) in [
            ("parallel", WorkerGroupConfig::default()),
            ("sequential", WorkerGroupConfig::default().sequential()),
        ] {
            group.bench_with_input(
                BenchmarkId::new(format!("naive/{exec}"), label),
                &chunk,
                |b, ch| b.iter(|| naive_histogram(ch, &cfg).unwrap()),
            );
            group.bench_with_input(
                BenchmarkId::new(format!("adaptive/{exec}"), label),
                &chunk,
                |b, ch| b.iter(|| adaptive_histogram(ch, &pattern, &cfg).unwrap()),
            );
        }
    }
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);

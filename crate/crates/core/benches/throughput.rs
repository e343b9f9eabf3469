use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use microflow::pipeline::{process_sequence, FlowMode};
use microflow::synth::{generate, SequenceKind, SynthParams};
use microflow::{compute_flow, FlowParams, MeshEmbedding, OverlayStyle, TriangleRaster};

/// Runs `f` on the default pool and, with the `parallel` feature, on a
/// single-thread pool for comparison.
fn variants() -> Vec<(&'static str, Option<usize>)> {
    let mut v = vec![("default", None)];
    if cfg!(feature = "parallel") {
        v.push(("one_thread", Some(1)));
    }
    v
}

fn run_in<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        return pool.install(f);
    }
    let _ = threads;
    f()
}

fn bench(c: &mut Criterion) {
    let seq = generate(&SynthParams::new(SequenceKind::Rigid)).unwrap();
    let raster = TriangleRaster::new(&seq.model);
    let embedding = MeshEmbedding::new(&seq.landmarks.meshes[1], &seq.model).unwrap();
    let c0 = MeshEmbedding::new(&seq.landmarks.meshes[0], &seq.model)
        .unwrap()
        .warp(&seq.frames[0], &seq.model, &raster);
    let c1 = embedding.warp(&seq.frames[1], &seq.model, &raster);
    let params = FlowParams::default();
    let style = OverlayStyle::default();

    let mut group = c.benchmark_group("throughput");
    group.sample_size(10);
    for (name, threads) in variants() {
        group.bench_function(BenchmarkId::new("warp", name), |b| {
            b.iter(|| run_in(threads, || embedding.warp(&seq.frames[1], &seq.model, &raster)))
        });
        group.bench_function(BenchmarkId::new("compute_flow", name), |b| {
            b.iter(|| run_in(threads, || compute_flow(&c0, &c1, &params).unwrap()))
        });
        group.bench_function(BenchmarkId::new("sequence", name), |b| {
            b.iter(|| {
                run_in(threads, || {
                    process_sequence(
                        &seq.frames,
                        &seq.landmarks,
                        &seq.model,
                        FlowMode::Reference,
                        &params,
                        &style,
                    )
                    .unwrap()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use georeward_core::reward::{score, MetricKind, RewardConfig};
use georeward_core::synth::{corrupt, make_scene, CorruptionSpec, SceneSpec};

fn metrics(c: &mut Criterion) {
    let spec = SceneSpec { frames: 8, ..Default::default() };
    let scene = corrupt(&make_scene(&spec).unwrap(), &CorruptionSpec { track_sigma: 1.0, seed: 1, ..Default::default() }).unwrap();
    let mut group = c.benchmark_group("score");
    group.sample_size(20);
    for m in [MetricKind::Rpt, MetricKind::Epi, MetricKind::Rpx] {
        let cfg = RewardConfig::new(m);
        group.bench_with_input(BenchmarkId::from_parameter(m), &cfg, |b, cfg| b.iter(|| score(&scene, cfg).unwrap()));
    }
    group.finish();
}

fn scene_synthesis(c: &mut Criterion) {
    let spec = SceneSpec { frames: 8, ..Default::default() };
    c.bench_function("make_scene 8x96x128", |b| b.iter(|| make_scene(&spec).unwrap()));
}

criterion_group!(benches, metrics, scene_synthesis);
criterion_main!(benches);

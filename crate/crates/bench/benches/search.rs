use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use georeward_core::reward::WindowSpec;
use georeward_core::search::{beam_search, brute_force, SearchConfig};
use georeward_core::synth::{make_scene, toy_scene_spec, ToyConfig, ToyGenerator, ToyRptVerifier};

fn searches(c: &mut Criterion) {
    let gen = ToyGenerator::new(make_scene(&toy_scene_spec(6, 0)).unwrap(), ToyConfig::default());
    let v = ToyRptVerifier::default();
    let pool: Vec<u64> = (0..8).collect();
    let w = WindowSpec::new(2).unwrap();
    let mut group = c.benchmark_group("beam");
    for (k, s) in [(1, 4), (4, 1), (2, 2), (4, 4)] {
        let cfg = SearchConfig::new(k, s, 6, w);
        group.bench_with_input(BenchmarkId::from_parameter(format!("K{k}_S{s}")), &cfg, |b, cfg| {
            b.iter(|| beam_search(&gen, &v, &(), &pool, cfg).unwrap())
        });
    }
    group.finish();
    let cfg = SearchConfig::new(1, 2, 6, w).with_roots(1);
    c.bench_function("brute_force S2 N6", |b| b.iter(|| brute_force(&gen, &v, &(), &pool, &cfg).unwrap()));
}

criterion_group!(benches, searches);
criterion_main!(benches);

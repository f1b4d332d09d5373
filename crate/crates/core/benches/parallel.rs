use std::collections::BTreeMap;
use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use monosde::greeks::BelWeight;
use monosde::solver::estimate_sup_moment;
use monosde::{
    bel_gradient, zoo_lookup, BelConfig, DivergencePolicy, Engine, ModelSpec, SchemeChoice, TimeGrid,
};

fn model(name: &str) -> ModelSpec {
    zoo_lookup(name, &BTreeMap::new()).unwrap()
}

fn engines() -> Vec<(&'static str, Engine)> {
    // Without the `parallel` feature both entries run sequentially.
    vec![("sequential", Engine::sequential()), ("parallel", Engine::parallel(0))]
}

fn sup_moment(c: &mut Criterion) {
    let spec = model("ginzburg_landau");
    let grid = TimeGrid::new(1.0, 256).unwrap();
    let mut group = c.benchmark_group("sup_moment");
    for n_paths in [1_000usize, 10_000] {
        group.throughput(Throughput::Elements(n_paths as u64));
        for (name, engine) in engines() {
            group.bench_with_input(BenchmarkId::new(name, n_paths), &n_paths, |b, &n| {
                b.iter(|| {
                    estimate_sup_moment(&spec, &grid, &SchemeChoice::tamed(), 2.0, n, 1, &engine, DivergencePolicy::Fail)
                        .unwrap()
                })
            });
        }
    }
    group.finish();
}

fn bel(c: &mut Criterion) {
    let spec = model("ginzburg_landau");
    let grid = TimeGrid::new(1.0, 128).unwrap();
    let cfg = BelConfig {
        weight: BelWeight::Constant,
        payoff: Arc::new(|x: &[f64]| x[0].tanh()),
        t_index: 128,
    };
    let mut group = c.benchmark_group("bel_gradient");
    group.sample_size(20);
    let n = 5_000;
    group.throughput(Throughput::Elements(n as u64));
    for (name, engine) in engines() {
        group.bench_function(name, |b| {
            b.iter(|| {
                black_box(
                    bel_gradient(&spec, &grid, &SchemeChoice::tamed(), &cfg, n, 1, &engine, DivergencePolicy::Fail).unwrap(),
                )
            })
        });
    }
    group.finish();
}

criterion_group!(benches, sup_moment, bel);
criterion_main!(benches);

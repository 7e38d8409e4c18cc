use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use bundle_eq::equilibrium::find_equilibrium;
use bundle_eq::{best_direction, optimal_mechanism, presets, Direction, EquilibriumConfig, Menu, MenuOption, SearchConfig, ValueModel};

fn model(name: &str) -> ValueModel {
    ValueModel::new(presets::by_name(name).unwrap()).unwrap()
}

fn mechanism(c: &mut Criterion) {
    let m = model("fig4");
    let mut g = c.benchmark_group("optimal_mechanism");
    for (label, w) in [("vertical", [1.0, 1.0]), ("horizontal", [1.0, 0.0])] {
        let line = m.posterior_line(&Direction::new(w.to_vec()).unwrap()).unwrap();
        g.bench_function(label, |b| b.iter(|| optimal_mechanism(black_box(&line)).unwrap()));
    }
    g.finish();
}

fn learner(c: &mut Criterion) {
    let m = model("fig3");
    let menu = Menu::new(vec![
        MenuOption::bundle(2, &[1], 1.51),
        MenuOption::bundle(2, &[0, 1], 2.37),
    ])
    .unwrap();
    let cfg = SearchConfig::default();
    c.bench_function("best_direction/fig3", |b| {
        b.iter(|| best_direction(black_box(&m), black_box(&menu), &cfg).unwrap())
    });
}

fn equilibrium(c: &mut Criterion) {
    let m = model("fig3");
    let cfg = EquilibriumConfig {
        verify: false,
        ..Default::default()
    };
    let mut g = c.benchmark_group("equilibrium");
    g.sample_size(10);
    g.bench_function("fig3", |b| b.iter(|| find_equilibrium(black_box(&m), &cfg).unwrap()));
    g.finish();
}

criterion_group!(benches, mechanism, learner, equilibrium);
criterion_main!(benches);

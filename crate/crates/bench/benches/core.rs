use criterion::{black_box, criterion_group, criterion_main, Criterion};
use maslow_core::engine::{run_simulation, SimConfig};
use maslow_core::envgen::{make_adversarial, make_supportive};
use maslow_core::optimize::{ga_run, GaConfig};
use maslow_core::stats::fisher_exact;
use maslow_core::{EngagementScope, Objective};

fn simulation(c: &mut Criterion) {
    let supportive = make_supportive(1);
    let adversarial = make_adversarial(1, 0.25).unwrap();
    let cfg = SimConfig::with_seed(1);
    c.bench_function("run_simulation/supportive_5000", |b| {
        b.iter(|| run_simulation(black_box(&supportive), &cfg).unwrap())
    });
    c.bench_function("run_simulation/adversarial_5000", |b| {
        b.iter(|| run_simulation(black_box(&adversarial), &cfg).unwrap())
    });
}

fn ga_generation(c: &mut Criterion) {
    let cfg = GaConfig { population: 10, generations: 1, evals_per_candidate: 1, sim_steps: 1000, ..GaConfig::default() };
    let objective = Objective::Engagement(EngagementScope::AllNeeds);
    let mut group = c.benchmark_group("ga");
    group.sample_size(10);
    group.bench_function("one_generation_pop10_1000_steps", |b| b.iter(|| ga_run(&objective, black_box(&cfg), 7).unwrap()));
    group.finish();
}

fn fisher(c: &mut Criterion) {
    c.bench_function("fisher_exact/15x15", |b| b.iter(|| fisher_exact(black_box([[15, 0], [0, 15]])).unwrap()));
    c.bench_function("fisher_exact/500x500", |b| b.iter(|| fisher_exact(black_box([[260, 240], [230, 270]])).unwrap()));
}

criterion_group!(benches, simulation, ga_generation, fisher);
criterion_main!(benches);

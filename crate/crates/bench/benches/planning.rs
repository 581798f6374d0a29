use adtwin::bridge::{build_twin, BridgeConfig, Mode};
use adtwin::harness::run_episode;
use adtwin::inference::{infer_state, InferenceOptions, ObservationBundle};
use adtwin::planning::plan;
use adtwin::{Belief, Categorical, SimRng};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn belief() -> Belief {
    Belief::new(vec![
        Categorical::uniform(6),
        Categorical::new(vec![0.3, 0.2, 0.2, 0.1, 0.1, 0.05, 0.05]).unwrap(),
        Categorical::dirac(2, 1),
    ])
}

fn bench_plan(c: &mut Criterion) {
    let cfg = BridgeConfig::default();
    let model = build_twin(&cfg, &SimRng::new(0)).unwrap().model;
    let q = belief();
    let planner = cfg.planner();
    let actions = cfg.action_ids();
    c.bench_function("plan_bridge_h4_256_policies", |b| {
        b.iter(|| plan(black_box(&model), black_box(&q), &actions, &planner, None).unwrap())
    });
}

fn bench_infer(c: &mut Criterion) {
    let cfg = BridgeConfig::default();
    let model = build_twin(&cfg, &SimRng::new(0)).unwrap().model;
    let prior = model.propagate(&belief(), 0).unwrap();
    let obs = ObservationBundle::full(&[14, 0]);
    c.bench_function("infer_state_bridge", |b| {
        b.iter(|| {
            infer_state(
                black_box(&model),
                black_box(&prior),
                black_box(&obs),
                InferenceOptions::default(),
            )
            .unwrap()
        })
    });
}

fn bench_episode(c: &mut Criterion) {
    let cfg = BridgeConfig {
        episode_length: 10,
        ..BridgeConfig::with_mode(Mode::MixedLearning)
    };
    let mut group = c.benchmark_group("episode");
    group.sample_size(10);
    group.bench_function("mixed_learning_10_steps", |b| {
        b.iter(|| run_episode(black_box(&cfg)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_plan, bench_infer, bench_episode);
criterion_main!(benches);

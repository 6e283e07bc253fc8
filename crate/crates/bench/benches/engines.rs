use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hmdp::hierarchy::{
    enumerate_baseline, exact_results, flatten, suitable_region, SlotSource, DEFAULT_FLAT_CAP,
};
use hmdp::io::{parse_macro, parse_template, serialize_macro, serialize_template};
use hmdp::lifting::{bound_results_for_set, check_one, to_region};
use hmdp::numerics::{max_expected_reward, robust_value_bounds};
use hmdp::refine::{run, RefineConfig};
use hmdp::{SolverConfig, UncertainMacro};
use hmdp_bench::{grid, token};

fn value_iteration(c: &mut Criterion) {
    let cfg = SolverConfig::default();
    let mut g = c.benchmark_group("check_one");
    for len in [100, 1000, 10_000] {
        let m = grid(1, 1, len);
        let v = m.call_valuation(0).clone();
        g.bench_with_input(BenchmarkId::from_parameter(len), &len, |b, _| {
            b.iter(|| check_one(m.template(), black_box(&v), m.mode(), &cfg).unwrap())
        });
    }
    g.finish();
}

fn lifting(c: &mut Criterion) {
    let cfg = SolverConfig::default();
    let mut g = c.benchmark_group("bound_results_for_set");
    for len in [100, 1000] {
        let m = grid(4, 10, len);
        let region = to_region((0..m.num_calls()).map(|i| m.call_valuation(i))).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(len), &len, |b, _| {
            b.iter(|| {
                bound_results_for_set(m.template(), black_box(&region), m.mode(), &cfg).unwrap()
            })
        });
    }
    g.finish();
}

fn robust_macro(c: &mut Criterion) {
    let cfg = SolverConfig::default();
    let m = grid(50, 100, 20);
    let res = exact_results(&m, &cfg).unwrap();
    let a = suitable_region(m.num_calls(), |i| Some(SlotSource::Exact(&res[i]))).unwrap();
    let imdp = UncertainMacro::build(&m).to_interval_mdp(&a);
    c.bench_function("robust_value_bounds/5000_calls", |b| {
        b.iter(|| robust_value_bounds(black_box(&imdp), &cfg).unwrap())
    });
}

fn baselines(c: &mut Criterion) {
    let cfg = SolverConfig::default();
    let m = grid(8, 16, 200);
    c.bench_function("enumerate_baseline/128x200", |b| {
        b.iter(|| enumerate_baseline(black_box(&m), &cfg).unwrap())
    });
    c.bench_function("flatten_and_solve/128x200", |b| {
        b.iter(|| {
            let flat = flatten(black_box(&m), DEFAULT_FLAT_CAP, &cfg).unwrap();
            max_expected_reward(&flat, &cfg).unwrap()
        })
    });
}

fn refinement(c: &mut Criterion) {
    let t = token();
    c.bench_function("refine/token_eta_1", |b| {
        b.iter(|| {
            run(
                black_box(&t),
                RefineConfig {
                    eta: 1.0,
                    ..RefineConfig::default()
                },
                |_| {},
            )
            .unwrap()
        })
    });
    let m = grid(10, 50, 200);
    let mut g = c.benchmark_group("refine/500x200");
    g.sample_size(10);
    for eta in [0.8, 0.9, 0.95] {
        g.bench_with_input(BenchmarkId::from_parameter(eta), &eta, |b, &eta| {
            b.iter(|| {
                run(
                    &m,
                    RefineConfig {
                        eta,
                        ..RefineConfig::default()
                    },
                    |_| {},
                )
                .unwrap()
            })
        });
    }
    g.finish();
}

fn formats(c: &mut Criterion) {
    let m = grid(20, 50, 50);
    let template_text = serialize_template(m.template());
    let macro_text = serialize_macro(&m);
    let t = parse_template(&template_text).unwrap();
    c.bench_function("parse_macro/1000_calls", |b| {
        b.iter(|| parse_macro(black_box(&macro_text), &t).unwrap())
    });
}

criterion_group!(
    benches,
    value_iteration,
    lifting,
    robust_macro,
    baselines,
    refinement,
    formats
);
criterion_main!(benches);

use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qreservoir::learn::{gmm_fit, standardize_matrix, tsne, TsneConfig};
use qreservoir::pipeline::{run_sweep, Mode, SweepConfig};
use qreservoir::{
    build_hamiltonian, evolve, ground_state_global, lanczos_lowest, partial_reflection_invariant, sample_disorder,
    sector_basis, ModelParams, Partition, PulseConvention, SpinState,
};

fn scrambled(l: usize) -> SpinState {
    let p = sample_disorder(l, 0.5 * PI, 3, 11, PulseConvention::HalfAngle).unwrap();
    evolve(&SpinState::all_up(l).unwrap(), &p).unwrap()
}

fn hamiltonian(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply_hamiltonian");
    for l in [10, 12, 14] {
        let h = build_hamiltonian(&ModelParams::new(l, 1.0, 1.3, 0.5)).unwrap();
        let s = scrambled(l);
        group.bench_with_input(BenchmarkId::from_parameter(l), &l, |b, _| {
            b.iter(|| h.apply(black_box(&s)).unwrap())
        });
    }
    group.finish();
}

fn reservoir(c: &mut Criterion) {
    let mut group = c.benchmark_group("evolve_depth25");
    for l in [10, 12] {
        let p = sample_disorder(l, 0.96 * PI, 25, 0, PulseConvention::HalfAngle).unwrap();
        let s = scrambled(l);
        group.bench_with_input(BenchmarkId::from_parameter(l), &l, |b, _| {
            b.iter(|| evolve(black_box(&s), &p).unwrap())
        });
    }
    group.finish();
}

fn groundstate(c: &mut Criterion) {
    let mut group = c.benchmark_group("lanczos_sector0");
    group.sample_size(10);
    for l in [10, 12] {
        let h = build_hamiltonian(&ModelParams::new(l, 1.0, 1.3, 0.5)).unwrap();
        let basis = sector_basis(l, 0).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(l), &l, |b, _| {
            b.iter(|| lanczos_lowest(&h, &basis, 1e-8, 500, 0).unwrap())
        });
    }
    group.finish();
}

fn invariant(c: &mut Criterion) {
    let h = build_hamiltonian(&ModelParams::new(12, 1.0, 2.5, 0.5)).unwrap();
    let gs = ground_state_global(&h, 1e-8, 0).unwrap();
    let part = Partition::default_for(12).unwrap();
    c.bench_function("mbti_L12", |b| {
        b.iter(|| partial_reflection_invariant(black_box(&gs.state), &part).unwrap())
    });
}

fn learn(c: &mut Criterion) {
    let cfg = SweepConfig {
        n_sites: 8,
        delta_list: vec![0.5],
        mode: Mode::Identity,
        ..SweepConfig::default()
    };
    let x = standardize_matrix(&run_sweep(&cfg).unwrap().features.to_matrix());
    let tcfg = TsneConfig {
        perplexity: 10.0,
        learning_rate: 200.0,
        ..TsneConfig::default()
    };
    let mut group = c.benchmark_group("learn_61_points");
    group.sample_size(10);
    group.bench_function("tsne", |b| b.iter(|| tsne(black_box(&x), &tcfg).unwrap()));
    let points = tsne(&x, &tcfg).unwrap().points;
    group.bench_function("gmm_k3", |b| b.iter(|| gmm_fit(black_box(&points), 3, 0).unwrap()));
    group.finish();
}

criterion_group!(benches, hamiltonian, reservoir, groundstate, invariant, learn);
criterion_main!(benches);

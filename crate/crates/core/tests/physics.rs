//! Cross-module checks at desk scale (L = 12).

use std::f64::consts::PI;
use std::sync::OnceLock;

use qreservoir::learn::{pca, standardize_matrix};
use qreservoir::pipeline::{run_sweep_cached, GroundStateCache, SweepConfig, SweepOutput};
use qreservoir::{
    evolve, feature_vector, partial_reflection_invariant, record_dynamics, sample_disorder, ModelParams, Partition,
    PhaseLabel, PulseConvention, SpinState,
};

fn cache() -> &'static GroundStateCache {
    static CACHE: OnceLock<GroundStateCache> = OnceLock::new();
    CACHE.get_or_init(GroundStateCache::in_memory)
}

fn ground(delta: f64, jp: f64) -> SpinState {
    cache()
        .get_or_solve(&ModelParams::new(12, 1.0, jp, delta), 1e-8, 0)
        .unwrap()
        .state
        .clone()
}

fn desk_slice() -> &'static SweepOutput {
    static OUT: OnceLock<SweepOutput> = OnceLock::new();
    OUT.get_or_init(|| {
        let cfg = SweepConfig {
            delta_list: vec![0.5],
            ..SweepConfig::default()
        };
        run_sweep_cached(&cfg, cache()).unwrap()
    })
}

#[test]
fn dimerized_ground_states_have_unit_invariant() {
    let part = Partition::default_for(12).unwrap();
    let trivial = partial_reflection_invariant(&ground(0.5, 0.05), &part).unwrap();
    let spt = partial_reflection_invariant(&ground(0.5, 2.5), &part).unwrap();
    assert!((trivial.value - 1.0).abs() < 0.2, "{trivial:?}");
    assert!((spt.value + 1.0).abs() < 0.2, "{spt:?}");
}

#[test]
fn dtc_evolution_keeps_norm_and_moves_features() {
    let s = ground(0.5, 2.5);
    let p = sample_disorder(12, 0.96 * PI, 25, 0, PulseConvention::HalfAngle).unwrap();
    let out = evolve(&s, &p).unwrap();
    assert!((out.norm() - 1.0).abs() < 1e-10);
    let a = feature_vector(&s, false).values;
    let b = feature_vector(&out, false).values;
    let dist: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    assert!(dist > 0.0);
}

#[test]
fn dtc_even_cycles_keep_local_memory() {
    let s0 = SpinState::all_up(12).unwrap();
    let p = sample_disorder(12, 0.96 * PI, 50, 0, PulseConvention::HalfAngle).unwrap();
    let trace = record_dynamics(&s0, &p, false).unwrap().row(5);
    let weakest = trace.iter().step_by(2).map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    assert!(weakest > 0.4, "{weakest}");
}

#[test]
fn desk_slice_has_one_row_per_grid_point() {
    let out = desk_slice();
    assert!(out.failures.is_empty());
    assert_eq!(out.features.n_rows(), 61);
    assert_eq!(out.features.n_cols(), 23);
}

#[test]
fn trivial_rows_collapse_on_first_principal_component() {
    let out = desk_slice();
    let x = standardize_matrix(&out.features.to_matrix());
    let pc1 = pca(&x, 1).unwrap().projections.column(0).into_owned();
    let range = pc1.max() - pc1.min();
    let trivial: Vec<f64> = out
        .points
        .iter()
        .zip(pc1.iter())
        .filter(|(p, _)| p.label == PhaseLabel::Trivial)
        .map(|(_, v)| *v)
        .collect();
    assert!(trivial.len() > 5);
    let band = trivial.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - trivial.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(band < 0.1 * range, "band {band} of range {range}");
}

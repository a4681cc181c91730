//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use qreservoir::invariant::level_crossings;
use qreservoir::measurement::expect_z;
use qreservoir::pipeline::{
    run_experiment_cached, run_selftest, ComparisonRow, Experiment, GroundStateCache, Mode, SweepConfig,
};
use qreservoir::{
    partial_reflection_invariant, record_dynamics, sample_disorder, ModelParams, Partition, PulseConvention, SpinState,
};

const L: usize = 12;
const TRANSITION_TOL: f64 = 0.15;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn slice_config(delta: f64, mode: Mode, dir: &Path) -> SweepConfig {
    let mut cfg = SweepConfig {
        n_sites: L,
        delta_list: vec![delta],
        jp_min: 0.0,
        jp_max: 3.0,
        jp_step: 0.05,
        mode,
        output_dir: dir.to_path_buf(),
        ..SweepConfig::default()
    };
    if mode == Mode::Thermal {
        cfg.g = Some(0.5 * PI);
        cfg.depth = Some(5);
    }
    if mode == Mode::Dtc {
        cfg.g = Some(0.96 * PI);
        cfg.depth = Some(25);
    }
    cfg
}

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", parts.join(", "))
}

fn row(exp: &Experiment) -> &ComparisonRow {
    &exp.report.comparison[0]
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let report = run_selftest();
    let elapsed = start.elapsed();
    let failed: Vec<String> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}: {}", c.name, c.detail))
        .collect();
    let passed = failed.is_empty() && elapsed < Duration::from_secs(60);
    let detail = if failed.is_empty() {
        format!("{} checks passed in {:.1}s", report.checks.len(), elapsed.as_secs_f64())
    } else {
        format!("failed: {}", failed.join("; "))
    };
    outcome(passed, detail)
}

fn criterion_2(exp: &Experiment, elapsed: Duration) -> Outcome {
    let r = row(exp);
    let ok_shape = r.detected.len() == 1 && r.mbti_zero.len() == 1;
    let gap = if ok_shape {
        (r.detected[0] - r.mbti_zero[0]).abs()
    } else {
        f64::NAN
    };
    let passed = ok_shape && gap <= TRANSITION_TOL && elapsed < Duration::from_secs(600) && exp.succeeded();
    outcome(
        passed,
        format!(
            "k={} detected={} mbti_zero={} |diff|={gap:.3} (tol {TRANSITION_TOL}) runtime {:.1}s",
            r.k,
            fmt(&r.detected),
            fmt(&r.mbti_zero),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_3(exp: &Experiment) -> Outcome {
    let r = row(exp);
    let bounds = r.mbti_boundaries();
    let ok_shape = r.k == 3 && r.detected.len() == 2 && bounds.len() == 2;
    let gaps: Vec<f64> = if ok_shape {
        r.detected.iter().zip(&bounds).map(|(d, b)| (d - b).abs()).collect()
    } else {
        Vec::new()
    };
    let passed = ok_shape && gaps.iter().all(|&g| g <= TRANSITION_TOL) && exp.succeeded();
    outcome(
        passed,
        format!(
            "k={} detected={} mbti(+-0.5)={} |diff|={} (tol {TRANSITION_TOL})",
            r.k,
            fmt(&r.detected),
            fmt(&bounds),
            fmt(&gaps)
        ),
    )
}

fn mbti_at(delta: f64, jp: f64, cache: &GroundStateCache) -> f64 {
    let gs = cache
        .get_or_solve(&ModelParams::new(L, 1.0, jp, delta), 1e-8, 0)
        .unwrap();
    partial_reflection_invariant(&gs.state, &Partition::default_for(L).unwrap())
        .unwrap()
        .value
}

fn criterion_4(three_phase: &Experiment, cache: &GroundStateCache) -> Outcome {
    let trivial = mbti_at(0.5, 0.2, cache);
    let spt = mbti_at(0.5, 2.5, cache);
    // The SB plateau spans the two threshold crossings of the delta=3 scan.
    let (xs, ys): (Vec<f64>, Vec<f64>) = three_phase
        .sweep
        .points
        .iter()
        .map(|p| (p.grid.jp, p.mbti.value))
        .unzip();
    let upper = level_crossings(&xs, &ys, 0.5);
    let lower = level_crossings(&xs, &ys, -0.5);
    let (centre, sb) = match (upper.first(), lower.last()) {
        (Some(&a), Some(&b)) => {
            let c = 0.5 * (a + b);
            (c, mbti_at(3.0, c, cache))
        }
        _ => (f64::NAN, f64::NAN),
    };
    let passed = (trivial - 1.0).abs() <= 0.2 && (spt + 1.0).abs() <= 0.2 && sb.abs() < 0.3;
    outcome(
        passed,
        format!("Z(0.5,0.2)={trivial:.4} Z(0.5,2.5)={spt:.4} Z(3.0,{centre:.3})={sb:.4}"),
    )
}

fn silhouette_or_zero(exp: &Experiment) -> f64 {
    row(exp).silhouette.unwrap_or(0.0)
}

fn criterion_5(dtc: &Experiment, identity: &Experiment, thermal: &Experiment) -> Outcome {
    let s_dtc = row(dtc).silhouette;
    let s_id = silhouette_or_zero(identity);
    let s_th = silhouette_or_zero(thermal);
    let id_k = row(identity).k;
    let beats = s_dtc.is_some_and(|s| s > s_id && s - s_th > 0.0);
    let identity_ok = id_k != 3 || s_id < 0.3;
    outcome(
        beats && identity_ok,
        format!(
            "silhouette DTC={} IDENTITY={s_id:.3} (k={id_k}) THERMAL={s_th:.3} (k={})",
            s_dtc.map_or("none".into(), |s| format!("{s:.3}")),
            row(thermal).k
        ),
    )
}

fn criterion_6() -> Outcome {
    let site = L / 2 - 1;
    let s0 = SpinState::all_up(L).unwrap();
    let trace = |g: f64| -> Vec<f64> {
        let p = sample_disorder(L, g, 50, 0, PulseConvention::HalfAngle).unwrap();
        record_dynamics(&s0, &p, false).unwrap().row(site)
    };
    let dtc = trace(0.96 * PI);
    let dtc_min = dtc.iter().step_by(2).map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    let thermal = trace(0.5 * PI);
    let thermal_max = thermal.iter().skip(10).map(|v| v.abs()).fold(0.0, f64::max);

    let flip = sample_disorder(L, 0.5 * PI, 50, 0, PulseConvention::HalfAngle)
        .unwrap()
        .with_g(PI)
        .unwrap();
    let rec = record_dynamics(&s0, &flip, false).unwrap();
    let mut flip_err = 0.0f64;
    for t in 0..rec.n_cycles() {
        let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
        for i in 0..L {
            flip_err = flip_err.max((rec.entry(i, t) - sign * expect_z(&s0, i).unwrap()).abs());
        }
    }
    let passed = dtc_min > 0.4 && thermal_max < 0.1 && flip_err < 1e-12;
    outcome(
        passed,
        format!(
            "min even-cycle |Z| (g=0.96pi)={dtc_min:.3}, max |Z| t>=10 (g=0.5pi)={thermal_max:.3}, flip error (g=pi)={flip_err:.1e}"
        ),
    )
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

fn criterion_7(first_dir: &Path) -> Outcome {
    let second = tempfile::tempdir().unwrap();
    let cfg = slice_config(0.5, Mode::Dtc, second.path());
    run_experiment_cached(&cfg, &GroundStateCache::in_memory()).unwrap();
    let a = csv_files(first_dir);
    let b = csv_files(second.path());
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let passed = !a.is_empty() && a.len() == b.len() && differing.is_empty();
    outcome(
        passed,
        format!(
            "{} CSV files compared ({}); differing: {:?}",
            a.len(),
            names.join(", "),
            differing
        ),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |n: usize, name: &'static str, o: Outcome| {
        println!(
            "criterion {n} [{}] {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((n, name, o));
    };

    report(1, "oracle suite", criterion_1());

    let cache = GroundStateCache::in_memory();
    let run = |delta: f64, mode: Mode| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = slice_config(delta, mode, dir.path());
        let start = Instant::now();
        let exp = run_experiment_cached(&cfg, &cache).unwrap();
        (exp, start.elapsed(), dir)
    };

    let (two_phase, elapsed, two_phase_dir) = run(0.5, Mode::Dtc);
    report(2, "two-phase slice (delta=0.5)", criterion_2(&two_phase, elapsed));

    let (three_phase, _, _d3) = run(3.0, Mode::Dtc);
    report(3, "three-phase slice (delta=3.0)", criterion_3(&three_phase));

    report(4, "invariant deep-phase values", criterion_4(&three_phase, &cache));

    let (identity, _, _di) = run(3.0, Mode::Identity);
    let (thermal, _, _dt) = run(3.0, Mode::Thermal);
    report(
        5,
        "necessity of the DTC reservoir",
        criterion_5(&three_phase, &identity, &thermal),
    );

    report(6, "DTC memory", criterion_6());

    report(7, "determinism", criterion_7(two_phase_dir.path()));

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.passed).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria passed",
        results.len() - failed.len(),
        results.len()
    );
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

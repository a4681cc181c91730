//! Parameter sweeps, learning and reporting, either in one call
//! ([`run_experiment`]) or stage by stage through files in an output
//! directory.

pub mod analysis;
pub mod config;
pub mod io;
pub mod report;
pub mod selftest;
pub mod sweep;

use std::fs;
use std::path::Path;

pub use analysis::{analyze, analyze_slice, SliceAnalysis};
pub use config::{Mode, SweepConfig};
pub use io::{DynamicsSidecar, MbtiRow, SliceData, SliceSummary};
pub use report::{comparison_table, ComparisonRow, Report};
pub use selftest::{run_selftest, SelftestReport};
pub use sweep::{mbti_scan, run_sweep, run_sweep_cached, GroundStateCache, PointFailure, PointRecord, SweepOutput};

use crate::error::{Error, Result};
use crate::measurement::{record_dynamics, DynamicsRecord};
use crate::state::SpinState;

pub const CONFIG_JSON: &str = "config.json";

/// Writes `config.json`, `features.csv`, `mbti.csv` and `failures.csv`.
pub fn write_sweep_outputs(dir: &Path, cfg: &SweepConfig, out: &SweepOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(CONFIG_JSON), cfg.to_json()? + "\n")?;
    io::write_features(&dir.join(io::FEATURES_CSV), &out.features)?;
    let rows: Vec<MbtiRow> = out.points.iter().map(MbtiRow::from).collect();
    io::write_mbti(&dir.join(io::MBTI_CSV), &rows)?;
    io::write_failures(&dir.join(io::FAILURES_CSV), &out.failures)?;
    Ok(())
}

/// Sweep stage: compute and persist features and invariants.
pub fn sweep_stage(cfg: &SweepConfig, cache: &GroundStateCache) -> Result<SweepOutput> {
    let out = run_sweep_cached(cfg, cache)?;
    write_sweep_outputs(&cfg.output_dir, cfg, &out)?;
    Ok(out)
}

/// Learn stage from `features.csv` in the output directory.
pub fn learn_stage(cfg: &SweepConfig) -> Result<Vec<SliceData>> {
    cfg.validate()?;
    let dir = &cfg.output_dir;
    let features = io::read_features(&dir.join(io::FEATURES_CSV), cfg.include_zzz)?;
    let slices: Vec<SliceData> = analyze(&features, cfg)?.iter().map(SliceData::from).collect();
    io::write_learn_outputs(dir, &slices)?;
    Ok(slices)
}

fn count_failures(dir: &Path) -> Result<usize> {
    let path = dir.join(io::FAILURES_CSV);
    if !path.exists() {
        return Ok(0);
    }
    Ok(csv::Reader::from_path(path)?.records().count())
}

/// Report stage from the learn and sweep files in the output directory.
pub fn report_stage(cfg: &SweepConfig) -> Result<Report> {
    let dir = &cfg.output_dir;
    let slices = io::read_learn_outputs(dir)?;
    let mbti = io::read_mbti(&dir.join(io::MBTI_CSV))?;
    report::write_report(dir, cfg, &slices, &mbti, count_failures(dir)?)
}

/// In-memory results of a full run; the same files are on disk.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub sweep: SweepOutput,
    pub slices: Vec<SliceAnalysis>,
    pub report: Report,
}

impl Experiment {
    pub fn succeeded(&self) -> bool {
        self.sweep.failures.is_empty()
    }
}

pub fn run_experiment(cfg: &SweepConfig) -> Result<Experiment> {
    let cache = match &cfg.cache_dir {
        Some(dir) => GroundStateCache::with_dir(dir)?,
        None => GroundStateCache::in_memory(),
    };
    run_experiment_cached(cfg, &cache)
}

/// Sweep, learn and report, writing every artifact to `cfg.output_dir`.
pub fn run_experiment_cached(cfg: &SweepConfig, cache: &GroundStateCache) -> Result<Experiment> {
    let sweep = sweep_stage(cfg, cache)?;
    let slices = analyze(&sweep.features, cfg)?;
    let data: Vec<SliceData> = slices.iter().map(SliceData::from).collect();
    io::write_learn_outputs(&cfg.output_dir, &data)?;
    let mbti: Vec<MbtiRow> = sweep.points.iter().map(MbtiRow::from).collect();
    let report = report::write_report(&cfg.output_dir, cfg, &data, &mbti, sweep.failures.len())?;
    Ok(Experiment { sweep, slices, report })
}

/// Input state for [`run_dynamics`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DynamicsInput {
    /// `|00...0>`, every site `Z = +1`.
    Polarized,
    Ground {
        delta: f64,
        jp: f64,
    },
}

/// Feature trace over `0..=depth` cycles of the configured reservoir. Only
/// the model and reservoir settings are used, so chains too short for the
/// oracle partition are fine.
pub fn run_dynamics(cfg: &SweepConfig, input: DynamicsInput) -> Result<(DynamicsRecord, DynamicsSidecar)> {
    let p = cfg
        .reservoir()?
        .ok_or_else(|| Error::Config("dynamics need a reservoir with depth > 0".into()))?;
    let (state, label) = match input {
        DynamicsInput::Polarized => (SpinState::all_up(cfg.n_sites)?, "product".to_string()),
        DynamicsInput::Ground { delta, jp } => {
            let model = cfg.model(crate::measurement::GridPoint { delta, jp });
            let gs = GroundStateCache::in_memory().get_or_solve(&model, cfg.solver_tol, cfg.solver_seed)?;
            (gs.state.clone(), format!("ground delta={delta} jp={jp}"))
        }
    };
    let record = record_dynamics(&state, &p, cfg.include_zzz)?;
    let sidecar = DynamicsSidecar::new(&p, cfg.include_zzz, label);
    Ok((record, sidecar))
}

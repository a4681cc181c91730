//! Ground state -> reservoir -> features over a parameter grid.

use std::collections::HashMap;
use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use super::config::SweepConfig;
use crate::error::{Error, Result};
use crate::groundstate::{ground_state_global, GroundStateResult};
use crate::invariant::{classify_mbti, partial_reflection_invariant, MbtiResult, PhaseLabel};
use crate::measurement::{
    cycle_averaged_features, feature_vector, sample_shots, FeatureMatrix, FeatureVector, GridPoint,
};
use crate::operators::{build_hamiltonian, ModelParams};
use crate::reservoir::{evolve, FloquetParams};
use crate::state::SpinState;
use crate::Complex64;

const CACHE_MAGIC: &[u8; 8] = b"QRGSv001";

/// Exact-match key: the bit patterns of every model parameter plus the
/// solver seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CacheKey {
    n_sites: usize,
    j: u64,
    jp: u64,
    delta: u64,
    eps_pin: u64,
    seed: u64,
}

impl CacheKey {
    pub fn new(p: &ModelParams, seed: u64) -> Self {
        Self {
            n_sites: p.n_sites,
            j: p.j.to_bits(),
            jp: p.jp.to_bits(),
            delta: p.delta.to_bits(),
            eps_pin: p.eps_pin.to_bits(),
            seed,
        }
    }

    fn file_name(&self) -> String {
        format!(
            "gs_L{}_{:016x}_{:016x}_{:016x}_{:016x}_s{}.bin",
            self.n_sites, self.j, self.jp, self.delta, self.eps_pin, self.seed
        )
    }
}

/// Ground states shared between sweeps, optionally mirrored to disk.
#[derive(Debug, Default)]
pub struct GroundStateCache {
    dir: Option<PathBuf>,
    memory: Mutex<HashMap<CacheKey, Arc<GroundStateResult>>>,
}

impl GroundStateCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir: Some(dir),
            memory: Mutex::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.memory.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Returns the cached ground state or solves for it.
    pub fn get_or_solve(&self, p: &ModelParams, tol: f64, seed: u64) -> Result<Arc<GroundStateResult>> {
        let key = CacheKey::new(p, seed);
        if let Some(hit) = self.memory.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let path = self.dir.as_ref().map(|d| d.join(key.file_name()));
        let loaded = match &path {
            Some(p) if p.exists() => match read_ground_state(p) {
                Ok(gs) => Some(gs),
                Err(e) => {
                    log::warn!("ignoring unreadable cache file {}: {e}", p.display());
                    None
                }
            },
            _ => None,
        };
        let gs = match loaded {
            Some(gs) => gs,
            None => {
                let h = build_hamiltonian(p)?;
                let gs = ground_state_global(&h, tol, seed)?;
                if let Some(path) = &path {
                    write_ground_state(path, &gs)?;
                }
                gs
            }
        };
        let gs = Arc::new(gs);
        self.memory.lock().expect("cache lock").insert(key, Arc::clone(&gs));
        Ok(gs)
    }
}

/// Little-endian dump: magic, L, energy, sector, residual, iterations, amplitudes.
pub fn write_ground_state(path: &Path, gs: &GroundStateResult) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&(gs.state.n_sites() as u64).to_le_bytes())?;
        w.write_all(&gs.energy.to_le_bytes())?;
        w.write_all(&(gs.sector as i64).to_le_bytes())?;
        w.write_all(&gs.residual.to_le_bytes())?;
        w.write_all(&(gs.iterations as u64).to_le_bytes())?;
        for a in gs.state.amplitudes() {
            w.write_all(&a.re.to_le_bytes())?;
            w.write_all(&a.im.to_le_bytes())?;
        }
        w.flush()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}

pub fn read_ground_state(path: &Path) -> Result<GroundStateResult> {
    let mut r = BufReader::new(fs::File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(Error::InvalidInput(format!(
            "{} is not a ground-state dump",
            path.display()
        )));
    }
    let mut word = [0u8; 8];
    let mut next = |r: &mut BufReader<fs::File>| -> Result<[u8; 8]> {
        r.read_exact(&mut word)?;
        Ok(word)
    };
    let n_sites = u64::from_le_bytes(next(&mut r)?) as usize;
    if n_sites == 0 || n_sites > crate::state::MAX_SITES {
        return Err(Error::InvalidInput(format!("dump claims {n_sites} sites")));
    }
    let energy = f64::from_le_bytes(next(&mut r)?);
    let sector = i64::from_le_bytes(next(&mut r)?) as i32;
    let residual = f64::from_le_bytes(next(&mut r)?);
    let iterations = u64::from_le_bytes(next(&mut r)?) as usize;
    let mut amps = Vec::with_capacity(1 << n_sites);
    for _ in 0..1usize << n_sites {
        let re = f64::from_le_bytes(next(&mut r)?);
        let im = f64::from_le_bytes(next(&mut r)?);
        amps.push(Complex64::new(re, im));
    }
    Ok(GroundStateResult {
        energy,
        state: SpinState::new(n_sites, amps)?,
        sector,
        residual,
        iterations,
    })
}

/// Oracle data for one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRecord {
    pub grid: GridPoint,
    pub energy: f64,
    pub sector: i32,
    pub mbti: MbtiResult,
    pub label: PhaseLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointFailure {
    pub grid: GridPoint,
    pub stage: String,
    pub message: String,
}

/// Successful rows of `features` and `points` are aligned; failed grid
/// points appear only in `failures`.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub features: FeatureMatrix,
    pub points: Vec<PointRecord>,
    pub failures: Vec<PointFailure>,
}

fn mix(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Features of one processed state: exact, or from a shot table when
/// `shots > 0`.
pub fn measure(cfg: &SweepConfig, state: &SpinState, index: usize) -> Result<FeatureVector> {
    if cfg.shots == 0 {
        Ok(feature_vector(state, cfg.include_zzz))
    } else {
        let table = sample_shots(state, cfg.shots, mix(cfg.reservoir_seed, index as u64))?;
        Ok(table.feature_vector(cfg.include_zzz))
    }
}

fn oracle_point(
    cfg: &SweepConfig,
    cache: &GroundStateCache,
    point: GridPoint,
) -> std::result::Result<(Arc<GroundStateResult>, PointRecord), PointFailure> {
    let fail = |stage: &str, e: Error| PointFailure {
        grid: point,
        stage: stage.to_string(),
        message: e.to_string(),
    };
    let gs = cache
        .get_or_solve(&cfg.model(point), cfg.solver_tol, cfg.solver_seed)
        .map_err(|e| fail("groundstate", e))?;
    let partition = cfg.partition().map_err(|e| fail("invariant", e))?;
    let mbti = partial_reflection_invariant(&gs.state, &partition).map_err(|e| fail("invariant", e))?;
    let label = classify_mbti(mbti.value, &cfg.thresholds());
    let record = PointRecord {
        grid: point,
        energy: gs.energy,
        sector: gs.sector,
        mbti,
        label,
    };
    Ok((gs, record))
}

fn process_point(
    cfg: &SweepConfig,
    cache: &GroundStateCache,
    reservoir: Option<&FloquetParams>,
    index: usize,
    point: GridPoint,
) -> std::result::Result<(FeatureVector, PointRecord), PointFailure> {
    let (gs, record) = oracle_point(cfg, cache, point)?;
    let fail = |stage: &str, e: Error| PointFailure {
        grid: point,
        stage: stage.to_string(),
        message: e.to_string(),
    };
    let features = match reservoir {
        Some(p) if cfg.cycle_average => cycle_averaged_features(&gs.state, p, cfg.include_zzz),
        Some(p) => {
            let out = evolve(&gs.state, p).map_err(|e| fail("reservoir", e))?;
            measure(cfg, &out, index)
        }
        None => measure(cfg, &gs.state, index),
    }
    .map_err(|e| fail("measurement", e))?;
    Ok((features, record))
}

fn log_failure(e: &PointFailure) {
    log::warn!(
        "delta={} jp={}: {} failed: {}",
        e.grid.delta,
        e.grid.jp,
        e.stage,
        e.message
    );
}

/// Ground states and invariants over the grid, without the reservoir.
pub fn mbti_scan(cfg: &SweepConfig, cache: &GroundStateCache) -> Result<(Vec<PointRecord>, Vec<PointFailure>)> {
    cfg.validate()?;
    let results: Vec<_> = cfg
        .grid()
        .par_iter()
        .map(|&point| oracle_point(cfg, cache, point).map(|(_, r)| r))
        .collect();
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(p) => points.push(p),
            Err(e) => {
                log_failure(&e);
                failures.push(e);
            }
        }
    }
    Ok((points, failures))
}

/// Runs the sweep with a cache private to this call (or backed by
/// `cfg.cache_dir`).
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutput> {
    let cache = match &cfg.cache_dir {
        Some(dir) => GroundStateCache::with_dir(dir)?,
        None => GroundStateCache::in_memory(),
    };
    run_sweep_cached(cfg, &cache)
}

/// Grid points are processed in parallel; the output order is the grid
/// order regardless of the pool size.
pub fn run_sweep_cached(cfg: &SweepConfig, cache: &GroundStateCache) -> Result<SweepOutput> {
    cfg.validate()?;
    let grid = cfg.grid();
    let reservoir = cfg.reservoir()?;
    log::info!(
        "sweep: {} points, L={}, mode={}, depth={}",
        grid.len(),
        cfg.n_sites,
        cfg.mode,
        cfg.cycles()
    );
    let results: Vec<_> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &point)| process_point(cfg, cache, reservoir.as_ref(), i, point))
        .collect();
    let mut rows = Vec::new();
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok((f, p)) => {
                rows.push(f);
                points.push(p);
            }
            Err(e) => {
                log_failure(&e);
                failures.push(e);
            }
        }
    }
    let grid = points.iter().map(|p| p.grid).collect();
    Ok(SweepOutput {
        features: FeatureMatrix::new(rows, grid)?,
        points,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::config::Mode;

    fn small(mode: Mode) -> SweepConfig {
        SweepConfig {
            n_sites: 8,
            delta_list: vec![0.5],
            jp_min: 0.0,
            jp_max: 0.4,
            jp_step: 0.2,
            mode,
            ..SweepConfig::default()
        }
    }

    #[test]
    fn identity_features_are_ground_state_features() {
        let cfg = small(Mode::Identity);
        let out = run_sweep(&cfg).unwrap();
        assert_eq!(out.features.n_rows(), 3);
        assert_eq!(out.features.n_cols(), 15);
        for (row, point) in out.features.rows.iter().zip(&out.points) {
            let h = build_hamiltonian(&cfg.model(point.grid)).unwrap();
            let gs = ground_state_global(&h, 1e-8, 0).unwrap();
            assert_eq!(row, &feature_vector(&gs.state, false));
        }
    }

    #[test]
    fn output_independent_of_pool_size() {
        let cfg = small(Mode::Dtc);
        let a = run_sweep(&cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| run_sweep(&cfg).unwrap());
        assert_eq!(a.features, b.features);
        assert_eq!(a.points, b.points);
    }

    #[test]
    fn disk_cache_reproduces_energies() {
        let dir = tempfile::tempdir().unwrap();
        let p = ModelParams::new(8, 1.0, 0.7, 1.5);
        let fresh = GroundStateCache::with_dir(dir.path())
            .unwrap()
            .get_or_solve(&p, 1e-8, 0)
            .unwrap();
        let reloaded = GroundStateCache::with_dir(dir.path())
            .unwrap()
            .get_or_solve(&p, 1e-8, 0)
            .unwrap();
        assert!((fresh.energy - reloaded.energy).abs() < 1e-10);
        assert_eq!(fresh.state, reloaded.state);
        assert_eq!(fresh.sector, reloaded.sector);
    }

    #[test]
    fn memory_cache_reused() {
        let cache = GroundStateCache::in_memory();
        let cfg = small(Mode::Identity);
        run_sweep_cached(&cfg, &cache).unwrap();
        assert_eq!(cache.len(), 3);
        let thermal = SweepConfig {
            mode: Mode::Thermal,
            ..cfg
        };
        run_sweep_cached(&thermal, &cache).unwrap();
        assert_eq!(cache.len(), 3);
    }

    #[test]
    fn shot_mode_rows_are_estimates() {
        let cfg = SweepConfig {
            shots: 2000,
            ..small(Mode::Thermal)
        };
        let exact = run_sweep(&SweepConfig {
            shots: 0,
            ..cfg.clone()
        })
        .unwrap();
        let noisy = run_sweep(&cfg).unwrap();
        for (a, b) in exact.features.rows.iter().zip(&noisy.features.rows) {
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() < 0.15);
            }
        }
        assert_eq!(noisy.features, run_sweep(&cfg).unwrap().features);
    }

    #[test]
    fn cycle_average_changes_only_features() {
        let cfg = small(Mode::Dtc);
        let avg = SweepConfig {
            cycle_average: true,
            ..cfg.clone()
        };
        let cache = GroundStateCache::in_memory();
        let a = run_sweep_cached(&cfg, &cache).unwrap();
        let b = run_sweep_cached(&avg, &cache).unwrap();
        assert_eq!(a.points, b.points);
        assert_ne!(a.features.rows, b.features.rows);
        let gs = cache
            .get_or_solve(&cfg.model(cfg.grid()[0]), cfg.solver_tol, cfg.solver_seed)
            .unwrap();
        let p = cfg.reservoir().unwrap().unwrap();
        assert_eq!(
            b.features.rows[0],
            cycle_averaged_features(&gs.state, &p, false).unwrap()
        );
        assert!(SweepConfig { shots: 100, ..avg }.validate().is_err());
    }

    #[test]
    fn mbti_scan_matches_sweep_records() {
        let cfg = small(Mode::Dtc);
        let cache = GroundStateCache::in_memory();
        let (points, failures) = mbti_scan(&cfg, &cache).unwrap();
        assert!(failures.is_empty());
        assert_eq!(points, run_sweep_cached(&cfg, &cache).unwrap().points);
    }

    #[test]
    fn failing_point_is_isolated() {
        // A tolerance below machine precision cannot be met at any point,
        // but the sweep itself still returns.
        let cfg = SweepConfig {
            solver_tol: 1e-30,
            ..small(Mode::Identity)
        };
        let out = run_sweep(&cfg).unwrap();
        assert_eq!(out.features.n_rows() + out.failures.len(), 3);
        assert!(out.failures.iter().all(|f| f.stage == "groundstate"));
    }
}

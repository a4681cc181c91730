//! Sweep configuration, read from and written to flat JSON.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::invariant::{MbtiThresholds, Partition};
use crate::learn::{TsneConfig, TsneInit};
use crate::measurement::GridPoint;
use crate::operators::ModelParams;
use crate::reservoir::{sample_disorder, FloquetParams, PulseConvention};

/// How ground states are processed before measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    /// Measure the ground state directly.
    Identity,
    Thermal,
    #[default]
    Dtc,
}

impl Mode {
    pub fn default_g(self) -> f64 {
        match self {
            Mode::Dtc => 0.96 * PI,
            Mode::Thermal | Mode::Identity => 0.5 * PI,
        }
    }

    pub fn default_depth(self) -> usize {
        match self {
            Mode::Dtc => 25,
            Mode::Thermal => 5,
            Mode::Identity => 0,
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "IDENTITY" => Ok(Mode::Identity),
            "THERMAL" => Ok(Mode::Thermal),
            "DTC" => Ok(Mode::Dtc),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Identity => "IDENTITY",
            Mode::Thermal => "THERMAL",
            Mode::Dtc => "DTC",
        })
    }
}

fn default_delta_list() -> Vec<f64> {
    (0..=8).map(|i| i as f64 * 0.5).collect()
}

/// Everything a sweep, learn or report stage needs. Unset keys take the
/// desk-scale defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(rename = "L")]
    pub n_sites: usize,
    #[serde(rename = "J")]
    pub j: f64,
    pub eps_pin: f64,
    pub delta_list: Vec<f64>,
    pub jp_min: f64,
    pub jp_max: f64,
    pub jp_step: f64,

    pub mode: Mode,
    /// Pulse angle in radians; the mode default when absent.
    pub g: Option<f64>,
    pub depth: Option<usize>,
    pub convention: PulseConvention,

    pub solver_seed: u64,
    pub reservoir_seed: u64,
    pub learner_seed: u64,
    pub solver_tol: f64,

    /// 0 means exact expectations.
    pub shots: u64,
    pub include_zzz: bool,
    /// Average exact features over cycles `1..=depth` instead of reading
    /// the final state.
    pub cycle_average: bool,

    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    /// Fixed component count; BIC selection over `1..=k_max` when absent.
    pub k: Option<usize>,
    pub k_max: usize,
    /// Embed all slices together instead of one embedding per delta.
    pub pooled: bool,

    /// First site and block size of the reflection partition.
    pub mbti_start: Option<usize>,
    pub mbti_n: Option<usize>,
    pub spt_below: f64,
    pub trivial_above: f64,

    pub output_dir: PathBuf,
    /// Ground-state dumps are kept here when set.
    pub cache_dir: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let thresholds = MbtiThresholds::default();
        Self {
            n_sites: 12,
            j: 1.0,
            eps_pin: crate::operators::default_eps_pin(),
            delta_list: default_delta_list(),
            jp_min: 0.0,
            jp_max: 3.0,
            jp_step: 0.05,
            mode: Mode::Dtc,
            g: None,
            depth: None,
            convention: PulseConvention::HalfAngle,
            solver_seed: 0,
            reservoir_seed: 0,
            learner_seed: 0,
            solver_tol: 1e-8,
            shots: 0,
            include_zzz: false,
            cycle_average: false,
            perplexity: 10.0,
            iterations: 1000,
            learning_rate: 200.0,
            k: None,
            k_max: 6,
            pooled: false,
            mbti_start: None,
            mbti_n: None,
            spt_below: thresholds.spt_below,
            trivial_above: thresholds.trivial_above,
            output_dir: PathBuf::from("out"),
            cache_dir: None,
        }
    }
}

/// Rounds grid coordinates so `0.1 * 3` prints as `0.3`.
fn tidy(x: f64) -> f64 {
    let r = (x * 1e10).round() / 1e10;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

impl SweepConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_sites < 2 || !self.n_sites.is_multiple_of(2) || self.n_sites > crate::state::MAX_SITES {
            return bad(format!(
                "L={} must be even and in [2, {}]",
                self.n_sites,
                crate::state::MAX_SITES
            ));
        }
        if self.delta_list.is_empty() {
            return bad("delta_list is empty".into());
        }
        if self.delta_list.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return bad("delta values must be finite and non-negative".into());
        }
        let mut sorted = self.delta_list.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return bad("delta_list contains duplicates".into());
        }
        if !(self.jp_step > 0.0 && self.jp_step.is_finite()) {
            return bad(format!("jp_step={} must be positive", self.jp_step));
        }
        if !(self.jp_min >= 0.0 && self.jp_max.is_finite() && self.jp_max >= self.jp_min) {
            return bad(format!(
                "need 0 <= jp_min <= jp_max, got [{}, {}]",
                self.jp_min, self.jp_max
            ));
        }
        if !(self.j.is_finite() && self.eps_pin.is_finite()) {
            return bad("J and eps_pin must be finite".into());
        }
        if self.mode != Mode::Identity {
            let g = self.pulse();
            if !(g > 0.0 && g < PI) {
                return bad(format!("g={g} must lie strictly between 0 and pi"));
            }
        }
        if !(self.solver_tol > 0.0) {
            return bad("solver_tol must be positive".into());
        }
        if self.cycle_average && self.shots > 0 {
            return bad("cycle_average needs exact expectations (shots = 0)".into());
        }
        if self.k == Some(0) || self.k_max == 0 {
            return bad("cluster counts must be at least 1".into());
        }
        if self.spt_below > self.trivial_above {
            return bad("spt_below must not exceed trivial_above".into());
        }
        self.partition()?;
        Ok(())
    }

    pub fn pulse(&self) -> f64 {
        self.g.unwrap_or_else(|| self.mode.default_g())
    }

    /// Circuit depth; IDENTITY always runs zero cycles.
    pub fn cycles(&self) -> usize {
        match self.mode {
            Mode::Identity => 0,
            m => self.depth.unwrap_or_else(|| m.default_depth()),
        }
    }

    /// Ordered `J'` values `jp_min, jp_min + step, ...` up to `jp_max`.
    pub fn jp_values(&self) -> Vec<f64> {
        let span = (self.jp_max - self.jp_min) / self.jp_step;
        let count = (span + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| tidy(self.jp_min + i as f64 * self.jp_step))
            .collect()
    }

    /// Delta-major grid: every `J'` of the first delta, then the next delta.
    pub fn grid(&self) -> Vec<GridPoint> {
        let jps = self.jp_values();
        self.delta_list
            .iter()
            .flat_map(|&delta| jps.iter().map(move |&jp| GridPoint { delta, jp }))
            .collect()
    }

    pub fn model(&self, point: GridPoint) -> ModelParams {
        ModelParams::new(self.n_sites, self.j, point.jp, point.delta).with_pin(self.eps_pin)
    }

    /// Disorder realization for the configured mode, `None` when no cycles run.
    pub fn reservoir(&self) -> Result<Option<FloquetParams>> {
        let depth = self.cycles();
        if depth == 0 {
            return Ok(None);
        }
        sample_disorder(self.n_sites, self.pulse(), depth, self.reservoir_seed, self.convention).map(Some)
    }

    pub fn partition(&self) -> Result<Partition> {
        match (self.mbti_start, self.mbti_n) {
            (None, None) => Partition::default_for(self.n_sites),
            (None, Some(n)) => Partition::centered(self.n_sites, n),
            (Some(start), Some(n)) => Partition::new(start, n, self.n_sites),
            (Some(_), None) => Err(Error::Config("mbti_start needs mbti_n".into())),
        }
    }

    pub fn thresholds(&self) -> MbtiThresholds {
        MbtiThresholds {
            spt_below: self.spt_below,
            trivial_above: self.trivial_above,
        }
    }

    pub fn tsne(&self) -> TsneConfig {
        TsneConfig {
            perplexity: self.perplexity,
            iterations: self.iterations,
            learning_rate: self.learning_rate,
            seed: self.learner_seed,
            init: TsneInit::Pca,
            ..TsneConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_give_desk_grid() {
        let cfg = SweepConfig::default();
        cfg.validate().unwrap();
        let jps = cfg.jp_values();
        assert_eq!(jps.len(), 61);
        assert_eq!(jps[3], 0.15);
        assert_eq!(*jps.last().unwrap(), 3.0);
        assert_eq!(cfg.grid().len(), 61 * 9);
        assert_eq!(cfg.cycles(), 25);
        assert!((cfg.pulse() - 0.96 * PI).abs() < 1e-15);
    }

    #[test]
    fn identity_forces_zero_depth() {
        let cfg = SweepConfig {
            mode: Mode::Identity,
            depth: Some(7),
            ..SweepConfig::default()
        };
        assert_eq!(cfg.cycles(), 0);
        assert!(cfg.reservoir().unwrap().is_none());
    }

    #[test]
    fn thermal_defaults() {
        let cfg = SweepConfig {
            mode: Mode::Thermal,
            ..SweepConfig::default()
        };
        assert_eq!(cfg.cycles(), 5);
        assert!((cfg.pulse() - 0.5 * PI).abs() < 1e-15);
    }

    #[test]
    fn json_uses_flat_keys() {
        let cfg = SweepConfig::from_json_str(r#"{"L": 8, "J": 1.0, "delta_list": [0.5], "mode": "THERMAL", "g": 1.0}"#)
            .unwrap();
        assert_eq!(cfg.n_sites, 8);
        assert_eq!(cfg.mode, Mode::Thermal);
        assert_eq!(cfg.g, Some(1.0));
        let back = SweepConfig::from_json_str(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(SweepConfig::from_json_str(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn empty_grid_rejected() {
        let cfg = SweepConfig {
            delta_list: vec![],
            ..SweepConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = SweepConfig {
            jp_step: 0.0,
            ..SweepConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn pulse_bounds_checked() {
        let cfg = SweepConfig {
            g: Some(PI),
            ..SweepConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}

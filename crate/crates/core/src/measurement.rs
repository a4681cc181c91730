//! Z-basis observables and the feature vectors built from them.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reservoir::{FloquetCircuit, FloquetParams};
use crate::state::{z_value, SpinState};

/// One `(delta, J')` point of a parameter sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub delta: f64,
    pub jp: f64,
}

/// Features laid out as `(<Z_0>..<Z_{L-1}>, <Z_0 Z_1>..<Z_{L-2} Z_{L-1}>[, <ZZZ>...])`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub n_sites: usize,
    pub include_zzz: bool,
}

/// Length of a feature vector for `n_sites` sites.
pub fn feature_len(n_sites: usize, include_zzz: bool) -> usize {
    let base = 2 * n_sites - 1;
    if include_zzz {
        base + n_sites.saturating_sub(2)
    } else {
        base
    }
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn z(&self) -> &[f64] {
        &self.values[..self.n_sites]
    }

    pub fn zz(&self) -> &[f64] {
        &self.values[self.n_sites..2 * self.n_sites - 1]
    }

    pub fn zzz(&self) -> &[f64] {
        &self.values[2 * self.n_sites - 1..]
    }

    /// Row labels in layout order (`z_1`, `zz_1_2`, `zzz_1_2_3`, ... with 1-based sites).
    pub fn labels(n_sites: usize, include_zzz: bool) -> Vec<String> {
        let mut out: Vec<String> = (1..=n_sites).map(|i| format!("z_{i}")).collect();
        out.extend((1..n_sites).map(|i| format!("zz_{}_{}", i, i + 1)));
        if include_zzz {
            out.extend((1..n_sites.saturating_sub(1)).map(|i| format!("zzz_{}_{}_{}", i, i + 1, i + 2)));
        }
        out
    }
}

/// Feature rows for an ordered parameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Vec<FeatureVector>,
    pub grid: Vec<GridPoint>,
}

impl FeatureMatrix {
    pub fn new(rows: Vec<FeatureVector>, grid: Vec<GridPoint>) -> Result<Self> {
        if rows.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "{} feature rows for {} grid points",
                rows.len(),
                grid.len()
            )));
        }
        if let Some(first) = rows.first() {
            if rows.iter().any(|r| r.len() != first.len()) {
                return Err(Error::InvalidInput("ragged feature matrix".into()));
            }
        }
        Ok(Self { rows, grid })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.rows.first().map_or(0, FeatureVector::len)
    }

    /// Row-major copy as an `n_rows x n_cols` matrix.
    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n_rows(), self.n_cols(), |i, j| self.rows[i].values[j])
    }

    /// Rows whose grid point has the given `delta`.
    pub fn slice_delta(&self, delta: f64) -> FeatureMatrix {
        let (rows, grid) = self
            .rows
            .iter()
            .zip(&self.grid)
            .filter(|(_, g)| g.delta == delta)
            .map(|(r, g)| (r.clone(), *g))
            .unzip();
        FeatureMatrix { rows, grid }
    }
}

fn check_site(s: &SpinState, site: usize, span: usize) -> Result<()> {
    if site + span > s.n_sites() {
        return Err(Error::SiteOutOfRange {
            site,
            n_sites: s.n_sites(),
        });
    }
    Ok(())
}

fn expect_string(s: &SpinState, sites: &[usize]) -> f64 {
    let n = s.n_sites();
    s.amplitudes()
        .iter()
        .enumerate()
        .map(|(b, a)| a.norm_sqr() * sites.iter().map(|&i| z_value(n, b, i)).product::<f64>())
        .sum()
}

/// `<Z_site>` (0-based site).
pub fn expect_z(s: &SpinState, site: usize) -> Result<f64> {
    check_site(s, site, 1)?;
    Ok(expect_string(s, &[site]))
}

/// `<Z_site Z_{site+1}>`.
pub fn expect_zz(s: &SpinState, site: usize) -> Result<f64> {
    check_site(s, site, 2)?;
    Ok(expect_string(s, &[site, site + 1]))
}

/// `<Z_site Z_{site+1} Z_{site+2}>`.
pub fn expect_zzz(s: &SpinState, site: usize) -> Result<f64> {
    check_site(s, site, 3)?;
    Ok(expect_string(s, &[site, site + 1, site + 2]))
}

/// Accumulates all Z-string features from a weighted set of basis states.
fn features_from_weights<I>(n_sites: usize, include_zzz: bool, weights: I) -> FeatureVector
where
    I: IntoIterator<Item = (usize, f64)>,
{
    let mut values = vec![0.0; feature_len(n_sites, include_zzz)];
    let mut z = vec![0.0; n_sites];
    for (b, w) in weights {
        if w == 0.0 {
            continue;
        }
        for (i, zi) in z.iter_mut().enumerate() {
            *zi = z_value(n_sites, b, i);
        }
        for i in 0..n_sites {
            values[i] += w * z[i];
        }
        for i in 0..n_sites - 1 {
            values[n_sites + i] += w * z[i] * z[i + 1];
        }
        if include_zzz {
            for i in 0..n_sites.saturating_sub(2) {
                values[2 * n_sites - 1 + i] += w * z[i] * z[i + 1] * z[i + 2];
            }
        }
    }
    values.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
    FeatureVector {
        values,
        n_sites,
        include_zzz,
    }
}

/// Exact feature vector of `s`.
pub fn feature_vector(s: &SpinState, include_zzz: bool) -> FeatureVector {
    features_from_weights(
        s.n_sites(),
        include_zzz,
        s.amplitudes().iter().map(|a| a.norm_sqr()).enumerate(),
    )
}

/// Outcome counts of repeated computational-basis measurements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotTable {
    pub n_sites: usize,
    pub shots: u64,
    pub counts: BTreeMap<usize, u64>,
}

impl ShotTable {
    /// Estimates every Z, ZZ (and ZZZ) feature from the same counts.
    pub fn feature_vector(&self, include_zzz: bool) -> FeatureVector {
        let total = self.shots as f64;
        features_from_weights(
            self.n_sites,
            include_zzz,
            self.counts.iter().map(|(&b, &c)| (b, c as f64 / total)),
        )
    }
}

/// Draws `shots` bitstrings from `|amp_b|^2` with a seeded ChaCha stream.
pub fn sample_shots(s: &SpinState, shots: u64, seed: u64) -> Result<ShotTable> {
    if shots == 0 {
        return Err(Error::InvalidInput("shots must be at least 1".into()));
    }
    let mut cdf = Vec::with_capacity(s.dim());
    let mut acc = 0.0;
    for a in s.amplitudes() {
        acc += a.norm_sqr();
        cdf.push(acc);
    }
    let total = acc;
    let last_nonzero = s.amplitudes().iter().rposition(|a| a.norm_sqr() > 0.0).unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new(0.0, total);
    let mut counts = BTreeMap::new();
    for _ in 0..shots {
        let u = unit.sample(&mut rng);
        let b = cdf.partition_point(|&c| c <= u).min(last_nonzero);
        *counts.entry(b).or_insert(0) += 1;
    }
    Ok(ShotTable {
        n_sites: s.n_sites(),
        shots,
        counts,
    })
}

/// Features after every cycle `t = 0..=depth`; column 0 is the input state.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsRecord {
    pub n_sites: usize,
    pub include_zzz: bool,
    pub columns: Vec<FeatureVector>,
}

impl DynamicsRecord {
    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, FeatureVector::len)
    }

    pub fn n_cycles(&self) -> usize {
        self.columns.len()
    }

    pub fn entry(&self, row: usize, cycle: usize) -> f64 {
        self.columns[cycle].values[row]
    }

    /// Time trace of one feature row.
    pub fn row(&self, row: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c.values[row]).collect()
    }
}

pub fn record_dynamics(s0: &SpinState, p: &FloquetParams, include_zzz: bool) -> Result<DynamicsRecord> {
    if s0.n_sites() != p.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: p.n_sites(),
            actual: s0.n_sites(),
        });
    }
    let mut columns = vec![feature_vector(s0, include_zzz)];
    if p.depth > 0 {
        let circuit = FloquetCircuit::new(p)?;
        let mut s = s0.clone();
        circuit.run(&mut s, p.depth, |_, st| columns.push(feature_vector(st, include_zzz)))?;
    }
    Ok(DynamicsRecord {
        n_sites: s0.n_sites(),
        include_zzz,
        columns,
    })
}

/// Features averaged over cycles `1..=depth` (the input itself when depth is 0).
pub fn cycle_averaged_features(s0: &SpinState, p: &FloquetParams, include_zzz: bool) -> Result<FeatureVector> {
    let rec = record_dynamics(s0, p, include_zzz)?;
    if p.depth == 0 {
        return Ok(rec.columns[0].clone());
    }
    let mut values = vec![0.0; rec.n_rows()];
    for col in &rec.columns[1..] {
        values.iter_mut().zip(&col.values).for_each(|(v, x)| *v += x);
    }
    values.iter_mut().for_each(|v| *v /= p.depth as f64);
    Ok(FeatureVector {
        values,
        n_sites: s0.n_sites(),
        include_zzz,
    })
}

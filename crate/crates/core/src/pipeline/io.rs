//! CSV and JSON files exchanged between stages.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a file
//! read back reproduces the in-memory values bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::analysis::SliceAnalysis;
use super::sweep::{PointFailure, PointRecord};
use crate::error::{Error, Result};
use crate::invariant::PhaseLabel;
use crate::learn::{Transition, TransitionSet};
use crate::measurement::{DynamicsRecord, FeatureMatrix, FeatureVector, GridPoint};
use crate::reservoir::{FloquetParams, PulseConvention};

pub const FEATURES_CSV: &str = "features.csv";
pub const MBTI_CSV: &str = "mbti.csv";
pub const FAILURES_CSV: &str = "failures.csv";
pub const EMBEDDING_CSV: &str = "embedding.csv";
pub const TRANSITIONS_CSV: &str = "transitions.csv";
pub const LEARN_SUMMARY_JSON: &str = "learn_summary.json";

pub fn gmm_file_name(delta: f64) -> String {
    format!("gmm_delta_{delta}.csv")
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    Ok(csv::Writer::from_path(path)?)
}

fn parse<T: std::str::FromStr>(field: Option<&str>, what: &str, path: &Path) -> Result<T> {
    field
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::InvalidInput(format!("{}: bad or missing {what}", path.display())))
}

/// `delta,jp,f_0,...`.
pub fn write_features(path: &Path, f: &FeatureMatrix) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["delta".to_string(), "jp".to_string()];
    header.extend((0..f.n_cols()).map(|i| format!("f_{i}")));
    w.write_record(&header)?;
    for (row, g) in f.rows.iter().zip(&f.grid) {
        let mut rec = vec![g.delta.to_string(), g.jp.to_string()];
        rec.extend(row.values.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Column count alone cannot tell `2L-1` from `3L-3`, so the ZZZ flag is
/// supplied by the caller.
pub fn read_features(path: &Path, include_zzz: bool) -> Result<FeatureMatrix> {
    let mut r = csv::Reader::from_path(path)?;
    let n_cols = r.headers()?.len().saturating_sub(2);
    let n_sites = if include_zzz {
        (n_cols + 3) / 3
    } else {
        n_cols.div_ceil(2)
    };
    if crate::measurement::feature_len(n_sites, include_zzz) != n_cols || n_cols == 0 {
        return Err(Error::InvalidInput(format!(
            "{}: {n_cols} feature columns do not match any chain length",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    let mut grid = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        grid.push(GridPoint {
            delta: parse(rec.get(0), "delta", path)?,
            jp: parse(rec.get(1), "jp", path)?,
        });
        let values = (0..n_cols)
            .map(|c| parse(rec.get(c + 2), "feature", path))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(FeatureVector {
            values,
            n_sites,
            include_zzz,
        });
    }
    FeatureMatrix::new(rows, grid)
}

/// Row of `mbti.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MbtiRow {
    pub grid: GridPoint,
    pub value: f64,
    pub label: PhaseLabel,
}

impl From<&PointRecord> for MbtiRow {
    fn from(p: &PointRecord) -> Self {
        Self {
            grid: p.grid,
            value: p.mbti.value,
            label: p.label,
        }
    }
}

pub fn write_mbti(path: &Path, rows: &[MbtiRow]) -> Result<()> {
    mbti_records(writer(path)?, rows)
}

/// `delta,jp,value,label` to any sink.
pub fn write_mbti_to<W: std::io::Write>(sink: W, rows: &[MbtiRow]) -> Result<()> {
    mbti_records(csv::Writer::from_writer(sink), rows)
}

fn mbti_records<W: std::io::Write>(mut w: csv::Writer<W>, rows: &[MbtiRow]) -> Result<()> {
    w.write_record(["delta", "jp", "value", "label"])?;
    for r in rows {
        w.write_record([
            r.grid.delta.to_string(),
            r.grid.jp.to_string(),
            r.value.to_string(),
            r.label.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_mbti(path: &Path) -> Result<Vec<MbtiRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        out.push(MbtiRow {
            grid: GridPoint {
                delta: parse(rec.get(0), "delta", path)?,
                jp: parse(rec.get(1), "jp", path)?,
            },
            value: parse(rec.get(2), "value", path)?,
            label: parse(rec.get(3), "label", path)?,
        });
    }
    Ok(out)
}

pub fn write_failures(path: &Path, failures: &[PointFailure]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["delta", "jp", "stage", "message"])?;
    for f in failures {
        w.write_record([
            f.grid.delta.to_string(),
            f.grid.jp.to_string(),
            f.stage.clone(),
            f.message.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Scalar learner results for one slice, stored as JSON beside the CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSummary {
    pub delta: f64,
    pub k: usize,
    pub bic_scores: Vec<(usize, f64)>,
    pub silhouette: Option<f64>,
    pub initial_kl: f64,
    pub final_kl: f64,
    pub gmm_iterations: usize,
    pub gmm_reinitializations: usize,
}

/// Everything the report needs about one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceData {
    pub summary: SliceSummary,
    pub jps: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    pub responsibilities: Vec<Vec<f64>>,
    pub transitions: TransitionSet,
}

impl From<&SliceAnalysis> for SliceData {
    fn from(a: &SliceAnalysis) -> Self {
        Self {
            summary: SliceSummary {
                delta: a.delta,
                k: a.k(),
                bic_scores: a.bic_scores.clone(),
                silhouette: a.silhouette,
                initial_kl: a.embedding.initial_kl,
                final_kl: a.embedding.final_kl,
                gmm_iterations: a.model.iterations,
                gmm_reinitializations: a.model.reinitializations,
            },
            jps: a.jps.clone(),
            points: a.embedding.points.clone(),
            responsibilities: a.model.responsibilities.clone(),
            transitions: a.transitions.clone(),
        }
    }
}

/// Writes `embedding.csv`, one `gmm_delta_*.csv` per slice,
/// `transitions.csv` and `learn_summary.json`.
pub fn write_learn_outputs(dir: &Path, slices: &[SliceData]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let path = dir.join(EMBEDDING_CSV);
    let mut w = writer(&path)?;
    w.write_record(["delta", "jp", "y1", "y2"])?;
    for s in slices {
        for (jp, p) in s.jps.iter().zip(&s.points) {
            w.write_record([
                s.summary.delta.to_string(),
                jp.to_string(),
                p[0].to_string(),
                p[1].to_string(),
            ])?;
        }
    }
    w.flush()?;
    written.push(path);

    for s in slices {
        let path = dir.join(gmm_file_name(s.summary.delta));
        let mut w = writer(&path)?;
        let mut header = vec!["delta".to_string(), "jp".to_string()];
        header.extend((0..s.summary.k).map(|c| format!("p_cluster{c}")));
        header.push("label".into());
        w.write_record(&header)?;
        for ((jp, probs), label) in s.jps.iter().zip(&s.responsibilities).zip(&s.transitions.labels) {
            let mut rec = vec![s.summary.delta.to_string(), jp.to_string()];
            rec.extend(probs.iter().map(f64::to_string));
            rec.push(label.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        written.push(path);
    }

    let path = dir.join(TRANSITIONS_CSV);
    let mut w = writer(&path)?;
    w.write_record(["delta", "jp_transition", "from", "to"])?;
    for s in slices {
        for t in &s.transitions.transitions {
            w.write_record([
                s.summary.delta.to_string(),
                t.at.to_string(),
                t.from.to_string(),
                t.to.to_string(),
            ])?;
        }
    }
    w.flush()?;
    written.push(path);

    let path = dir.join(LEARN_SUMMARY_JSON);
    let summaries: Vec<&SliceSummary> = slices.iter().map(|s| &s.summary).collect();
    fs::write(&path, serde_json::to_string_pretty(&summaries)? + "\n")?;
    written.push(path);
    Ok(written)
}

/// Inverse of [`write_learn_outputs`].
pub fn read_learn_outputs(dir: &Path) -> Result<Vec<SliceData>> {
    let summaries: Vec<SliceSummary> = serde_json::from_str(&fs::read_to_string(dir.join(LEARN_SUMMARY_JSON))?)?;

    let path = dir.join(EMBEDDING_CSV);
    let mut embed: Vec<(f64, f64, [f64; 2])> = Vec::new();
    for rec in csv::Reader::from_path(&path)?.records() {
        let rec = rec?;
        embed.push((
            parse(rec.get(0), "delta", &path)?,
            parse(rec.get(1), "jp", &path)?,
            [parse(rec.get(2), "y1", &path)?, parse(rec.get(3), "y2", &path)?],
        ));
    }

    let path = dir.join(TRANSITIONS_CSV);
    let mut trans: Vec<(f64, Transition)> = Vec::new();
    for rec in csv::Reader::from_path(&path)?.records() {
        let rec = rec?;
        trans.push((
            parse(rec.get(0), "delta", &path)?,
            Transition {
                at: parse(rec.get(1), "jp_transition", &path)?,
                from: parse(rec.get(2), "from", &path)?,
                to: parse(rec.get(3), "to", &path)?,
            },
        ));
    }

    let mut out = Vec::new();
    for summary in summaries {
        let delta = summary.delta;
        let path = dir.join(gmm_file_name(delta));
        let mut jps = Vec::new();
        let mut responsibilities = Vec::new();
        let mut labels = Vec::new();
        for rec in csv::Reader::from_path(&path)?.records() {
            let rec = rec?;
            jps.push(parse(rec.get(1), "jp", &path)?);
            responsibilities.push(
                (0..summary.k)
                    .map(|c| parse(rec.get(c + 2), "probability", &path))
                    .collect::<Result<Vec<f64>>>()?,
            );
            labels.push(parse(rec.get(summary.k + 2), "label", &path)?);
        }
        let points: Vec<[f64; 2]> = embed.iter().filter(|e| e.0 == delta).map(|e| e.2).collect();
        if points.len() != jps.len() {
            return Err(Error::InvalidInput(format!(
                "delta={delta}: {} embedding rows but {} mixture rows",
                points.len(),
                jps.len()
            )));
        }
        let transitions = trans.iter().filter(|t| t.0 == delta).map(|t| t.1).collect();
        out.push(SliceData {
            summary,
            jps,
            points,
            responsibilities,
            transitions: TransitionSet { transitions, labels },
        });
    }
    Ok(out)
}

/// Metadata stored next to a dynamics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSidecar {
    pub g: f64,
    pub depth: usize,
    pub seed: u64,
    pub convention: PulseConvention,
    pub n_sites: usize,
    pub include_zzz: bool,
    /// Where the input state came from, e.g. `product` or `ground delta=0.5 jp=2.5`.
    pub input: String,
}

impl DynamicsSidecar {
    pub fn new(p: &FloquetParams, include_zzz: bool, input: impl Into<String>) -> Self {
        Self {
            g: p.g,
            depth: p.depth,
            seed: p.seed,
            convention: p.convention,
            n_sites: p.n_sites(),
            include_zzz,
            input: input.into(),
        }
    }
}

/// Rows are features (`z_1`, `zz_1_2`, ...), columns are cycles `t0..tD`.
/// The sidecar goes to the same path with a `.json` extension.
pub fn write_dynamics(path: &Path, record: &DynamicsRecord, sidecar: &DynamicsSidecar) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["feature".to_string()];
    header.extend((0..record.n_cycles()).map(|t| format!("t{t}")));
    w.write_record(&header)?;
    let labels = FeatureVector::labels(record.n_sites, record.include_zzz);
    for (i, label) in labels.iter().enumerate() {
        let mut rec = vec![label.clone()];
        rec.extend(record.row(i).iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    fs::write(
        path.with_extension("json"),
        serde_json::to_string_pretty(sidecar)? + "\n",
    )?;
    Ok(())
}

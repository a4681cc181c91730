//! Comparison of detected transitions with the invariant, plots and
//! provenance.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use super::config::SweepConfig;
use super::io::{MbtiRow, SliceData};
use crate::error::Result;
use crate::invariant::level_crossings;

pub const COMPARISON_CSV: &str = "comparison.csv";
pub const REPORT_TXT: &str = "report.txt";
pub const PROVENANCE_JSON: &str = "provenance.json";

/// Detected transitions of one slice beside the invariant's level crossings.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub delta: f64,
    pub k: usize,
    pub silhouette: Option<f64>,
    pub detected: Vec<f64>,
    /// Where the invariant crosses 0.
    pub mbti_zero: Vec<f64>,
    /// Crossings of the trivial threshold.
    pub mbti_upper: Vec<f64>,
    /// Crossings of the SPT threshold.
    pub mbti_lower: Vec<f64>,
}

impl ComparisonRow {
    /// Invariant crossings of both thresholds, sorted.
    pub fn mbti_boundaries(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.mbti_upper.iter().chain(&self.mbti_lower).copied().collect();
        all.sort_by(f64::total_cmp);
        all
    }
}

/// `(jp, value)` pairs of the invariant along one delta, ordered by `jp`.
pub fn mbti_curve(mbti: &[MbtiRow], delta: f64) -> (Vec<f64>, Vec<f64>) {
    let mut pts: Vec<(f64, f64)> = mbti
        .iter()
        .filter(|r| r.grid.delta == delta)
        .map(|r| (r.grid.jp, r.value))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.into_iter().unzip()
}

pub fn comparison_table(slices: &[SliceData], mbti: &[MbtiRow], cfg: &SweepConfig) -> Vec<ComparisonRow> {
    let th = cfg.thresholds();
    slices
        .iter()
        .map(|s| {
            let (xs, ys) = mbti_curve(mbti, s.summary.delta);
            ComparisonRow {
                delta: s.summary.delta,
                k: s.summary.k,
                silhouette: s.summary.silhouette,
                detected: s.transitions.transitions.iter().map(|t| t.at).collect(),
                mbti_zero: level_crossings(&xs, &ys, 0.0),
                mbti_upper: level_crossings(&xs, &ys, th.trivial_above),
                mbti_lower: level_crossings(&xs, &ys, th.spt_below),
            }
        })
        .collect()
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(";")
}

fn write_comparison(path: &Path, rows: &[ComparisonRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "delta",
        "k",
        "silhouette",
        "detected",
        "mbti_zero",
        "mbti_upper",
        "mbti_lower",
    ])?;
    for r in rows {
        w.write_record([
            r.delta.to_string(),
            r.k.to_string(),
            r.silhouette.map_or(String::new(), |s| format!("{s:.4}")),
            join(&r.detected),
            join(&r.mbti_zero),
            join(&r.mbti_upper),
            join(&r.mbti_lower),
        ])?;
    }
    w.flush()?;
    Ok(())
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

const W: f64 = 480.0;
const H: f64 = 360.0;
const PAD: f64 = 48.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                let m = 0.05 * (hi - lo);
                (lo - m, hi + m)
            }
        };
        let (x0, x1) = span(&mut xs.clone());
        let (y0, y1) = span(&mut ys.clone());
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        PAD + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * PAD)
    }
}

fn svg_open(out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{title}</text>"#,
        W / 2.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#,
        W / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{ylabel}</text>"#,
        H / 2.0,
        H / 2.0
    );
}

fn ticks(out: &mut String, f: &Frame) {
    for i in 0..=4 {
        let x = f.x0 + (f.x1 - f.x0) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="10">{x:.2}</text>"#,
            f.px(x),
            H - PAD + 14.0
        );
        let y = f.y0 + (f.y1 - f.y0) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="10">{y:.2}</text>"#,
            PAD - 4.0,
            f.py(y) + 3.0
        );
    }
}

/// Embedding scatter coloured by smoothed mixture label.
pub fn scatter_svg(s: &SliceData) -> String {
    let f = Frame::fit(s.points.iter().map(|p| p[0]), s.points.iter().map(|p| p[1]));
    let mut out = String::new();
    svg_open(
        &mut out,
        &format!("t-SNE embedding, delta = {}", s.summary.delta),
        "y1",
        "y2",
    );
    ticks(&mut out, &f);
    for (p, &label) in s.points.iter().zip(&s.transitions.labels) {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{}" fill-opacity="0.8"/>"#,
            f.px(p[0]),
            f.py(p[1]),
            PALETTE[label % PALETTE.len()]
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Membership probability of each component against `J'`, with detected
/// transitions (solid) and invariant threshold crossings (dashed).
pub fn probability_svg(s: &SliceData, row: &ComparisonRow) -> String {
    let f = Frame {
        x0: s.jps.first().copied().unwrap_or(0.0),
        x1: s
            .jps
            .last()
            .copied()
            .unwrap_or(1.0)
            .max(s.jps.first().copied().unwrap_or(0.0) + 1e-9),
        y0: -0.05,
        y1: 1.05,
    };
    let mut out = String::new();
    svg_open(
        &mut out,
        &format!("cluster probability, delta = {}", s.summary.delta),
        "J'/J",
        "probability",
    );
    ticks(&mut out, &f);
    for c in 0..s.summary.k {
        let pts: Vec<String> = s
            .jps
            .iter()
            .zip(&s.responsibilities)
            .map(|(&x, r)| format!("{:.2},{:.2}", f.px(x), f.py(r[c])))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            pts.join(" "),
            PALETTE[c % PALETTE.len()]
        );
    }
    let vline = |out: &mut String, x: f64, dash: &str, colour: &str| {
        let _ = writeln!(
            out,
            r#"<line x1="{0:.2}" y1="{1}" x2="{0:.2}" y2="{2}" stroke="{colour}" stroke-dasharray="{dash}"/>"#,
            f.px(x),
            PAD,
            H - PAD
        );
    };
    for &x in &row.detected {
        vline(&mut out, x, "none", "black");
    }
    for x in row.mbti_boundaries() {
        vline(&mut out, x, "4 3", "gray");
    }
    out.push_str("</svg>\n");
    out
}

#[derive(Debug, Serialize)]
struct Provenance<'a> {
    package: &'static str,
    version: &'static str,
    created_unix: u64,
    solver_seed: u64,
    reservoir_seed: u64,
    learner_seed: u64,
    mode: String,
    g: f64,
    depth: usize,
    convention: String,
    failures: usize,
    config: &'a SweepConfig,
}

pub fn write_provenance(path: &Path, cfg: &SweepConfig, failures: usize) -> Result<()> {
    let created_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let p = Provenance {
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        created_unix,
        solver_seed: cfg.solver_seed,
        reservoir_seed: cfg.reservoir_seed,
        learner_seed: cfg.learner_seed,
        mode: cfg.mode.to_string(),
        g: cfg.pulse(),
        depth: cfg.cycles(),
        convention: cfg.convention.to_string(),
        failures,
        config: cfg,
    };
    fs::write(path, serde_json::to_string_pretty(&p)? + "\n")?;
    Ok(())
}

fn summary_text(rows: &[ComparisonRow]) -> String {
    let mut out = String::new();
    let fmt = |v: &[f64]| {
        if v.is_empty() {
            "-".to_string()
        } else {
            v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ")
        }
    };
    for r in rows {
        let _ = writeln!(
            out,
            "delta={:<5} k={} silhouette={:<7} detected=[{}] mbti_zero=[{}] mbti_thresholds=[{}]",
            r.delta,
            r.k,
            r.silhouette.map_or("-".to_string(), |s| format!("{s:.3}")),
            fmt(&r.detected),
            fmt(&r.mbti_zero),
            fmt(&r.mbti_boundaries()),
        );
    }
    out
}

/// Files written by [`write_report`] and the table they summarize.
#[derive(Debug, Clone)]
pub struct Report {
    pub comparison: Vec<ComparisonRow>,
    pub files: Vec<PathBuf>,
}

pub fn write_report(
    dir: &Path,
    cfg: &SweepConfig,
    slices: &[SliceData],
    mbti: &[MbtiRow],
    failures: usize,
) -> Result<Report> {
    fs::create_dir_all(dir)?;
    let comparison = comparison_table(slices, mbti, cfg);
    let mut files = Vec::new();

    let path = dir.join(COMPARISON_CSV);
    write_comparison(&path, &comparison)?;
    files.push(path);

    for (s, row) in slices.iter().zip(&comparison) {
        let path = dir.join(format!("scatter_delta_{}.svg", s.summary.delta));
        fs::write(&path, scatter_svg(s))?;
        files.push(path);
        let path = dir.join(format!("probability_delta_{}.svg", s.summary.delta));
        fs::write(&path, probability_svg(s, row))?;
        files.push(path);
    }

    let path = dir.join(REPORT_TXT);
    fs::write(&path, summary_text(&comparison))?;
    files.push(path);

    let path = dir.join(PROVENANCE_JSON);
    write_provenance(&path, cfg, failures)?;
    files.push(path);
    Ok(Report { comparison, files })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invariant::PhaseLabel;
    use crate::learn::{Transition, TransitionSet};
    use crate::measurement::GridPoint;
    use crate::pipeline::io::SliceSummary;

    fn slice() -> SliceData {
        SliceData {
            summary: SliceSummary {
                delta: 0.5,
                k: 2,
                bic_scores: vec![(2, 1.0)],
                silhouette: Some(0.9),
                initial_kl: 1.0,
                final_kl: 0.1,
                gmm_iterations: 3,
                gmm_reinitializations: 0,
            },
            jps: vec![0.0, 1.0, 2.0, 3.0],
            points: vec![[0.0, 0.0], [0.1, 0.0], [5.0, 5.0], [5.1, 5.0]],
            responsibilities: vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]],
            transitions: TransitionSet {
                transitions: vec![Transition {
                    at: 1.5,
                    from: 0,
                    to: 1,
                }],
                labels: vec![0, 0, 1, 1],
            },
        }
    }

    fn mbti() -> Vec<MbtiRow> {
        [(0.0, 1.0), (1.0, 0.6), (2.0, -0.6), (3.0, -1.0)]
            .iter()
            .map(|&(jp, value)| MbtiRow {
                grid: GridPoint { delta: 0.5, jp },
                value,
                label: PhaseLabel::Trivial,
            })
            .collect()
    }

    #[test]
    fn comparison_lists_crossings() {
        let rows = comparison_table(&[slice()], &mbti(), &SweepConfig::default());
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].detected, vec![1.5]);
        assert!((rows[0].mbti_zero[0] - 1.5).abs() < 1e-12);
        assert_eq!(rows[0].mbti_boundaries().len(), 2);
    }

    #[test]
    fn report_writes_plots_and_provenance() {
        let dir = tempfile::tempdir().unwrap();
        let r = write_report(dir.path(), &SweepConfig::default(), &[slice()], &mbti(), 0).unwrap();
        assert_eq!(r.files.len(), 5);
        let svg = fs::read_to_string(dir.path().join("probability_delta_0.5.svg")).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        let prov: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(PROVENANCE_JSON)).unwrap()).unwrap();
        assert_eq!(prov["mode"], "DTC");
        assert_eq!(prov["config"]["L"], 12);
    }
}

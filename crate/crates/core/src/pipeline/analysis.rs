//! Per-slice embedding, clustering and transition detection.

use super::config::SweepConfig;
use crate::error::{Error, Result};
use crate::learn::{
    detect_model_transitions, gmm_fit, select_k_with_model, silhouette, standardize_matrix, tsne, Embedding2D,
    GmmModel, TransitionSet,
};
use crate::measurement::FeatureMatrix;

/// Learner output for one fixed-delta line of the grid.
#[derive(Debug, Clone)]
pub struct SliceAnalysis {
    pub delta: f64,
    pub jps: Vec<f64>,
    pub embedding: Embedding2D,
    pub model: GmmModel,
    /// `(k, bic)` for every fitted component count.
    pub bic_scores: Vec<(usize, f64)>,
    pub transitions: TransitionSet,
    /// `None` when every point carries the same label.
    pub silhouette: Option<f64>,
}

impl SliceAnalysis {
    pub fn k(&self) -> usize {
        self.model.k
    }

    pub fn transition_points(&self) -> Vec<f64> {
        self.transitions.transitions.iter().map(|t| t.at).collect()
    }
}

fn stage_err(delta: f64, e: Error) -> Error {
    Error::Stage {
        stage: format!("learn (delta={delta})"),
        message: e.to_string(),
    }
}

fn distinct_deltas(features: &FeatureMatrix) -> Vec<f64> {
    let mut deltas: Vec<f64> = Vec::new();
    for g in &features.grid {
        if !deltas.contains(&g.delta) {
            deltas.push(g.delta);
        }
    }
    deltas
}

fn fit_mixture(points: &[[f64; 2]], cfg: &SweepConfig) -> Result<(GmmModel, Vec<(usize, f64)>)> {
    match cfg.k {
        Some(k) => {
            let model = gmm_fit(points, k, cfg.learner_seed)?;
            let bic = model.bic();
            Ok((model, vec![(k, bic)]))
        }
        None => {
            let sel = select_k_with_model(points, cfg.k_max, cfg.learner_seed)?;
            Ok((sel.model, sel.scores))
        }
    }
}

fn score(points: &[[f64; 2]], labels: &[usize]) -> Result<Option<f64>> {
    let first = labels.first().copied();
    if labels.iter().all(|&l| Some(l) == first) {
        return Ok(None);
    }
    silhouette(points, labels).map(Some)
}

/// Standardize, embed, cluster and locate transitions along `J'` for one
/// delta slice. Rows must be ordered by increasing `J'`.
pub fn analyze_slice(slice: &FeatureMatrix, cfg: &SweepConfig) -> Result<SliceAnalysis> {
    let delta = slice.grid.first().map_or(f64::NAN, |g| g.delta);
    let run = || -> Result<SliceAnalysis> {
        if slice.n_rows() < 4 {
            return Err(Error::InvalidInput(format!("only {} rows", slice.n_rows())));
        }
        let jps: Vec<f64> = slice.grid.iter().map(|g| g.jp).collect();
        let x = standardize_matrix(&slice.to_matrix());
        let embedding = tsne(&x, &cfg.tsne())?;
        let (model, bic_scores) = fit_mixture(&embedding.points, cfg)?;
        let transitions = detect_model_transitions(&model, &jps)?;
        let silhouette = score(&embedding.points, &model.labels())?;
        Ok(SliceAnalysis {
            delta,
            jps,
            embedding,
            model,
            bic_scores,
            transitions,
            silhouette,
        })
    };
    run().map_err(|e| stage_err(delta, e))
}

/// One analysis per delta, in first-appearance order. In pooled mode all
/// rows share one embedding and mixture, which is then split by delta.
pub fn analyze(features: &FeatureMatrix, cfg: &SweepConfig) -> Result<Vec<SliceAnalysis>> {
    let deltas = distinct_deltas(features);
    if !cfg.pooled {
        return deltas
            .iter()
            .map(|&d| analyze_slice(&features.slice_delta(d), cfg))
            .collect();
    }
    let x = standardize_matrix(&features.to_matrix());
    let embedding = tsne(&x, &cfg.tsne()).map_err(|e| stage_err(f64::NAN, e))?;
    let (model, bic_scores) = fit_mixture(&embedding.points, cfg).map_err(|e| stage_err(f64::NAN, e))?;
    deltas
        .iter()
        .map(|&d| {
            let idx: Vec<usize> = (0..features.n_rows())
                .filter(|&i| features.grid[i].delta == d)
                .collect();
            let jps: Vec<f64> = idx.iter().map(|&i| features.grid[i].jp).collect();
            let points: Vec<[f64; 2]> = idx.iter().map(|&i| embedding.points[i]).collect();
            let mut sub = model.clone();
            sub.responsibilities = idx.iter().map(|&i| model.responsibilities[i].clone()).collect();
            let transitions = detect_model_transitions(&sub, &jps).map_err(|e| stage_err(d, e))?;
            let silhouette = score(&points, &sub.labels()).map_err(|e| stage_err(d, e))?;
            Ok(SliceAnalysis {
                delta: d,
                jps,
                embedding: Embedding2D {
                    points,
                    initial_kl: embedding.initial_kl,
                    final_kl: embedding.final_kl,
                },
                model: sub,
                bic_scores: bic_scores.clone(),
                transitions,
                silhouette,
            })
        })
        .collect()
}

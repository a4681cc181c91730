//! Cluster-count selection, transition detection and silhouette scoring.

use serde::{Deserialize, Serialize};

use super::gmm::{argmax, gmm_fit, GmmModel};
use crate::error::{Error, Result};

/// Outcome of fitting `k = 1..=k_max` and ranking by BIC.
#[derive(Debug, Clone)]
pub struct KSelection {
    pub k: usize,
    /// `(k, bic)` for every fitted k.
    pub scores: Vec<(usize, f64)>,
    pub model: GmmModel,
}

/// Fits every `k` in `1..=k_max` the data can support and returns the BIC
/// minimizer.
pub fn select_k_with_model(points: &[[f64; 2]], k_max: usize, seed: u64) -> Result<KSelection> {
    if k_max == 0 {
        return Err(Error::InvalidInput("k_max must be at least 1".into()));
    }
    let mut scores = Vec::new();
    let mut best: Option<GmmModel> = None;
    for k in 1..=k_max {
        if points.len() < 2 * k {
            break;
        }
        let model = gmm_fit(points, k, seed)?;
        let bic = model.bic();
        scores.push((k, bic));
        if best.as_ref().is_none_or(|b| bic < b.bic()) {
            best = Some(model);
        }
    }
    let model = best.ok_or_else(|| Error::InvalidInput("too few points for any mixture".into()))?;
    Ok(KSelection {
        k: model.k,
        scores,
        model,
    })
}

pub fn select_k(points: &[[f64; 2]], k_max: usize, seed: u64) -> Result<usize> {
    select_k_with_model(points, k_max, seed).map(|s| s.k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    /// Midpoint between the two grid values whose labels differ.
    pub at: f64,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSet {
    pub transitions: Vec<Transition>,
    /// Argmax labels after island smoothing.
    pub labels: Vec<usize>,
}

/// Replaces single-point label islands with the label of their two equal
/// neighbours. Endpoints are left alone.
pub fn smooth_islands(labels: &[usize]) -> Vec<usize> {
    let mut out = labels.to_vec();
    for i in 1..labels.len().saturating_sub(1) {
        if labels[i - 1] == labels[i + 1] && labels[i] != labels[i - 1] {
            out[i] = labels[i - 1];
        }
    }
    out
}

/// Locates label switches along an ordered one-parameter grid from
/// per-point membership probabilities.
pub fn detect_transitions(responsibilities: &[Vec<f64>], grid: &[f64]) -> Result<TransitionSet> {
    if responsibilities.len() != grid.len() {
        return Err(Error::InvalidInput(format!(
            "{} probability rows for {} grid values",
            responsibilities.len(),
            grid.len()
        )));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("grid must be strictly increasing".into()));
    }
    let raw: Vec<usize> = responsibilities.iter().map(|r| argmax(r)).collect();
    let labels = smooth_islands(&raw);
    let transitions = labels
        .windows(2)
        .zip(grid.windows(2))
        .filter(|(l, _)| l[0] != l[1])
        .map(|(l, g)| Transition {
            // rounded so grid midpoints print as written
            at: (0.5 * (g[0] + g[1]) * 1e10).round() / 1e10,
            from: l[0],
            to: l[1],
        })
        .collect();
    Ok(TransitionSet { transitions, labels })
}

/// Convenience wrapper over [`detect_transitions`] for a fitted model.
pub fn detect_model_transitions(model: &GmmModel, grid: &[f64]) -> Result<TransitionSet> {
    detect_transitions(&model.responsibilities, grid)
}

/// Mean silhouette coefficient. Points in singleton clusters score 0, as
/// does a point whose intra- and nearest inter-cluster distances are both 0.
pub fn silhouette(points: &[[f64; 2]], labels: &[usize]) -> Result<f64> {
    if points.len() != labels.len() || points.is_empty() {
        return Err(Error::InvalidInput(
            "points and labels must match and be nonempty".into(),
        ));
    }
    let mut ids: Vec<usize> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 2 {
        return Err(Error::InvalidInput("silhouette needs at least two clusters".into()));
    }
    let dist = |a: &[f64; 2], b: &[f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        let mut sums = vec![0.0; ids.len()];
        let mut counts = vec![0usize; ids.len()];
        for (j, q) in points.iter().enumerate() {
            if i == j {
                continue;
            }
            let c = ids.binary_search(&labels[j]).expect("label present");
            sums[c] += dist(p, q);
            counts[c] += 1;
        }
        let own = ids.binary_search(&labels[i]).expect("label present");
        if counts[own] == 0 {
            continue;
        }
        let a = sums[own] / counts[own] as f64;
        let b = (0..ids.len())
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / points.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn blob_points(centers: &[[f64; 2]], n_per: usize, seed: u64) -> Vec<[f64; 2]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        centers
            .iter()
            .flat_map(|c| {
                (0..n_per)
                    .map(|_| [c[0] + normal.sample(&mut rng), c[1] + normal.sample(&mut rng)])
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    #[test]
    fn bic_picks_blob_count() {
        assert_eq!(select_k(&blob_points(&[[0.0, 0.0]], 60, 1), 5, 0).unwrap(), 1);
        let three = blob_points(&[[0.0, 0.0], [50.0, 0.0], [0.0, 50.0]], 30, 2);
        assert_eq!(select_k(&three, 5, 0).unwrap(), 3);
        assert!(select_k(&three, 0, 0).is_err());
    }

    #[test]
    fn single_switch() {
        let probs = vec![
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, 1.0],
        ];
        let t = detect_transitions(&probs, &[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(
            t.transitions,
            vec![Transition {
                at: 2.5,
                from: 0,
                to: 1
            }]
        );
    }

    #[test]
    fn constant_labels_have_no_transition() {
        let probs = vec![vec![0.2, 0.8]; 6];
        let grid: Vec<f64> = (0..6).map(f64::from).collect();
        assert!(detect_transitions(&probs, &grid).unwrap().transitions.is_empty());
    }

    #[test]
    fn isolated_flip_is_smoothed() {
        assert_eq!(smooth_islands(&[0, 0, 1, 0, 0, 2, 2]), vec![0, 0, 0, 0, 0, 2, 2]);
        assert_eq!(smooth_islands(&[1, 0, 0]), vec![1, 0, 0]);
    }

    #[test]
    fn transitions_ignore_cluster_naming() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let probs: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let mut r = vec![rng.gen::<f64>() * 0.1; 3];
                r[(i / 13).min(2)] += 1.0;
                r
            })
            .collect();
        let swapped: Vec<Vec<f64>> = probs.iter().map(|r| vec![r[2], r[0], r[1]]).collect();
        let a = detect_transitions(&probs, &grid).unwrap();
        let b = detect_transitions(&swapped, &grid).unwrap();
        let at = |t: &TransitionSet| t.transitions.iter().map(|x| x.at).collect::<Vec<_>>();
        assert_eq!(at(&a), at(&b));
        assert_eq!(a.transitions.len(), 2);
    }

    #[test]
    fn rejects_unsorted_grid() {
        let probs = vec![vec![1.0]; 3];
        assert!(detect_transitions(&probs, &[0.0, 2.0, 1.0]).is_err());
    }

    #[test]
    fn silhouette_limits() {
        let pts = blob_points(&[[0.0, 0.0], [100.0, 0.0]], 20, 5);
        let labels: Vec<usize> = (0..40).map(|i| i / 20).collect();
        assert!(silhouette(&pts, &labels).unwrap() > 0.8);
        assert!(silhouette(&pts, &vec![0; 40]).is_err());
        let same = vec![[1.0, 1.0]; 4];
        assert_eq!(silhouette(&same, &[0, 0, 1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn random_labels_on_one_blob_score_near_zero() {
        let mut mean = 0.0;
        for seed in 0..50 {
            let pts = blob_points(&[[0.0, 0.0]], 60, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let labels: Vec<usize> = (0..60).map(|_| rng.gen_range(0..2)).collect();
            let s = silhouette(&pts, &labels).unwrap();
            assert!(s.abs() < 0.2, "seed {seed}: {s}");
            mean += s / 50.0;
        }
        assert!(mean.abs() < 0.1);
    }
}

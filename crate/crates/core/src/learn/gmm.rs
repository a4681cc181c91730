//! Gaussian mixtures on 2-D embeddings, fitted by EM.

#![allow(clippy::needless_range_loop)] // component-indexed arrays read clearer by index

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Added to covariance diagonals after every M-step.
pub const COVARIANCE_FLOOR: f64 = 1e-6;
pub const MAX_EM_ITERATIONS: usize = 500;
pub const EM_TOLERANCE: f64 = 1e-8;
pub const RESTARTS: usize = 5;
const MIN_WEIGHT: f64 = 1e-8;

pub type Cov2 = [[f64; 2]; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    pub k: usize,
    pub weights: Vec<f64>,
    pub means: Vec<[f64; 2]>,
    pub covariances: Vec<Cov2>,
    pub log_likelihood: f64,
    /// Posterior membership per point, each row on the simplex.
    pub responsibilities: Vec<Vec<f64>>,
    /// Log-likelihood before each M-step of the winning restart.
    pub history: Vec<f64>,
    pub iterations: usize,
    /// Components re-seeded after collapsing, summed over restarts.
    pub reinitializations: usize,
}

impl GmmModel {
    /// Number of free parameters of a full-covariance 2-D mixture.
    pub fn n_parameters(k: usize) -> usize {
        (k - 1) + 2 * k + 3 * k
    }

    pub fn bic(&self) -> f64 {
        let n = self.responsibilities.len() as f64;
        -2.0 * self.log_likelihood + Self::n_parameters(self.k) as f64 * n.ln()
    }

    /// Most probable component per point (lowest index on ties).
    pub fn labels(&self) -> Vec<usize> {
        self.responsibilities.iter().map(|r| argmax(r)).collect()
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn log_density(x: &[f64; 2], mean: &[f64; 2], cov: &Cov2) -> f64 {
    let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    let dx = x[0] - mean[0];
    let dy = x[1] - mean[1];
    let maha = (cov[1][1] * dx * dx - 2.0 * cov[0][1] * dx * dy + cov[0][0] * dy * dy) / det;
    -(2.0 * PI).ln() - 0.5 * det.ln() - 0.5 * maha
}

fn weighted_moments(points: &[[f64; 2]], w: impl Fn(usize) -> f64) -> (f64, [f64; 2], Cov2) {
    let mut total = 0.0;
    let mut mean = [0.0; 2];
    for (i, p) in points.iter().enumerate() {
        let wi = w(i);
        total += wi;
        mean[0] += wi * p[0];
        mean[1] += wi * p[1];
    }
    mean[0] /= total;
    mean[1] /= total;
    let mut cov = [[0.0; 2]; 2];
    for (i, p) in points.iter().enumerate() {
        let wi = w(i);
        let d = [p[0] - mean[0], p[1] - mean[1]];
        for a in 0..2 {
            for b in 0..2 {
                cov[a][b] += wi * d[a] * d[b];
            }
        }
    }
    for row in cov.iter_mut() {
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    cov[0][0] += COVARIANCE_FLOOR;
    cov[1][1] += COVARIANCE_FLOOR;
    (total, mean, cov)
}

struct Params {
    weights: Vec<f64>,
    means: Vec<[f64; 2]>,
    covs: Vec<Cov2>,
}

/// E-step: fills `resp` and returns the total log-likelihood.
fn e_step(points: &[[f64; 2]], params: &Params, resp: &mut [Vec<f64>]) -> f64 {
    let k = params.weights.len();
    let mut ll = 0.0;
    for (x, r) in points.iter().zip(resp.iter_mut()) {
        for c in 0..k {
            r[c] = params.weights[c].ln() + log_density(x, &params.means[c], &params.covs[c]);
        }
        let m = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = r.iter().map(|v| (v - m).exp()).sum();
        let lse = m + s.ln();
        ll += lse;
        r.iter_mut().for_each(|v| *v = (*v - lse).exp());
        let norm: f64 = r.iter().sum();
        r.iter_mut().for_each(|v| *v /= norm);
    }
    ll
}

fn m_step(points: &[[f64; 2]], resp: &[Vec<f64>], params: &mut Params) {
    let n = points.len() as f64;
    for c in 0..params.weights.len() {
        let (total, mean, cov) = weighted_moments(points, |i| resp[i][c]);
        params.weights[c] = total / n;
        if total > 0.0 {
            params.means[c] = mean;
            params.covs[c] = cov;
        }
    }
}

fn kmeanspp(points: &[[f64; 2]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let dist2 = |a: &[f64; 2], b: &[f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    let mut centers = vec![points[rng.gen_range(0..points.len())]];
    while centers.len() < k {
        let d: Vec<f64> = points
            .iter()
            .map(|p| centers.iter().map(|c| dist2(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, &di) in d.iter().enumerate() {
                if u < di {
                    pick = i;
                    break;
                }
                u -= di;
            }
            pick
        } else {
            rng.gen_range(0..points.len())
        };
        centers.push(points[next]);
    }
    centers
}

struct Run {
    params: Params,
    resp: Vec<Vec<f64>>,
    ll: f64,
    history: Vec<f64>,
    iterations: usize,
    reinitializations: usize,
}

fn run_em(points: &[[f64; 2]], k: usize, rng: &mut ChaCha8Rng) -> Run {
    let (_, _, global_cov) = weighted_moments(points, |_| 1.0);
    let mut params = Params {
        weights: vec![1.0 / k as f64; k],
        means: kmeanspp(points, k, rng),
        covs: vec![global_cov; k],
    };
    let mut resp = vec![vec![0.0; k]; points.len()];
    let mut history = Vec::new();
    let mut reinitializations = 0;
    let mut iterations = 0;
    let mut ll = e_step(points, &params, &mut resp);
    loop {
        history.push(ll);
        if iterations >= MAX_EM_ITERATIONS {
            break;
        }
        m_step(points, &resp, &mut params);
        iterations += 1;
        let mut reseeded = false;
        for c in 0..k {
            if params.weights[c] < MIN_WEIGHT {
                params.means[c] = points[rng.gen_range(0..points.len())];
                params.covs[c] = global_cov;
                params.weights[c] = 1.0 / k as f64;
                reinitializations += 1;
                reseeded = true;
            }
        }
        if reseeded {
            let s: f64 = params.weights.iter().sum();
            params.weights.iter_mut().for_each(|w| *w /= s);
            // a reseed restarts the monotone sequence
            history.clear();
        }
        let next = e_step(points, &params, &mut resp);
        let gain = next - ll;
        ll = next;
        if !reseeded && gain < EM_TOLERANCE {
            history.push(ll);
            break;
        }
    }
    Run {
        params,
        resp,
        ll,
        history,
        iterations,
        reinitializations,
    }
}

/// Fits a `k`-component mixture, keeping the best of [`RESTARTS`] k-means++
/// seeded EM runs by final log-likelihood.
pub fn gmm_fit(points: &[[f64; 2]], k: usize, seed: u64) -> Result<GmmModel> {
    if k == 0 {
        return Err(Error::InvalidInput("need at least one component".into()));
    }
    if points.len() < 2 * k {
        return Err(Error::InvalidInput(format!(
            "{} points cannot support {k} components",
            points.len()
        )));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite embedding coordinate".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Run> = None;
    let mut reinitializations = 0;
    for _ in 0..RESTARTS {
        let run = run_em(points, k, &mut rng);
        reinitializations += run.reinitializations;
        if best.as_ref().is_none_or(|b| run.ll > b.ll) {
            best = Some(run);
        }
    }
    let run = best.expect("at least one restart");
    if run.reinitializations > 0 {
        log::debug!("gmm k={k}: {reinitializations} component reinitializations");
    }
    Ok(GmmModel {
        k,
        weights: run.params.weights,
        means: run.params.means,
        covariances: run.params.covs,
        log_likelihood: run.ll,
        responsibilities: run.resp,
        history: run.history,
        iterations: run.iterations,
        reinitializations,
    })
}

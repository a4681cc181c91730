//! Exact (O(N^2)) t-SNE.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::preprocess::pca;
use crate::error::{Error, Result};

/// Floor applied to joint input affinities before renormalization.
pub const P_FLOOR: f64 = 1e-12;

const SIGMA_MIN: f64 = 1e-10;
const SIGMA_MAX: f64 = 1e10;
const BISECTION_STEPS: usize = 64;
const PERPLEXITY_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TsneInit {
    #[default]
    Pca,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    pub seed: u64,
    pub init: TsneInit,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iters: 250,
            seed: 0,
            init: TsneInit::Pca,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self, n_points: usize) -> Result<()> {
        if n_points < 4 {
            return Err(Error::InvalidInput(format!(
                "t-SNE needs at least 4 points, got {n_points}"
            )));
        }
        let bound = (n_points as f64 - 1.0) / 3.0;
        if !(self.perplexity > 0.0 && self.perplexity < bound) {
            return Err(Error::InvalidInput(format!(
                "perplexity {} must lie in (0, {bound}) for {n_points} points",
                self.perplexity
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidInput("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding2D {
    pub points: Vec<[f64; 2]>,
    pub initial_kl: f64,
    pub final_kl: f64,
}

/// Pairwise squared Euclidean distances between rows.
pub fn squared_distances(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = (x.row(i) - x.row(j)).norm_squared();
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// Conditional row `p_{.|i}` for bandwidth `sigma`, with its perplexity.
fn conditional_row(d2: &DMatrix<f64>, i: usize, sigma: f64, out: &mut [f64]) -> f64 {
    let n = d2.nrows();
    let dmin = (0..n)
        .filter(|&j| j != i)
        .map(|j| d2[(i, j)])
        .fold(f64::INFINITY, f64::min);
    let scale = 1.0 / (2.0 * sigma * sigma);
    let mut z = 0.0;
    for j in 0..n {
        out[j] = if j == i {
            0.0
        } else {
            (-(d2[(i, j)] - dmin) * scale).exp()
        };
        z += out[j];
    }
    let mut entropy = z.ln();
    for j in 0..n {
        if j != i {
            out[j] /= z;
            entropy += out[j] * (d2[(i, j)] - dmin) * scale;
        }
    }
    entropy.exp()
}

/// Per-point Gaussian bandwidths whose conditional distributions reach the
/// target perplexity, found by bisection on `ln sigma`.
pub fn calibrate_sigmas(d2: &DMatrix<f64>, perplexity: f64) -> Result<Vec<f64>> {
    let n = d2.nrows();
    if n < 2 || d2.ncols() != n {
        return Err(Error::InvalidInput("distance matrix must be square with n >= 2".into()));
    }
    if !(perplexity >= 1.0 && perplexity <= (n - 1) as f64) {
        return Err(Error::InvalidInput(format!(
            "perplexity {perplexity} unreachable with {n} points"
        )));
    }
    let mut row = vec![0.0; n];
    let mut sigmas = Vec::with_capacity(n);
    for i in 0..n {
        let (mut lo, mut hi) = (SIGMA_MIN.ln(), SIGMA_MAX.ln());
        let mut best = (f64::INFINITY, 1.0, 0.0);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            let sigma = mid.exp();
            let perp = conditional_row(d2, i, sigma, &mut row);
            let err = (perp - perplexity).abs();
            if err <= best.0 {
                best = (err, sigma, perp);
            }
            if perp > perplexity {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        if best.0 >= PERPLEXITY_TOL {
            return Err(Error::Calibration {
                row: i,
                achieved: best.2,
                target: perplexity,
            });
        }
        sigmas.push(best.1);
    }
    Ok(sigmas)
}

/// Row-stochastic matrix of `p_{j|i}` (row `i`), zero diagonal.
pub fn conditional_probabilities(d2: &DMatrix<f64>, sigmas: &[f64]) -> DMatrix<f64> {
    let n = d2.nrows();
    let mut p = DMatrix::zeros(n, n);
    let mut row = vec![0.0; n];
    for (i, &sigma) in sigmas.iter().enumerate() {
        conditional_row(d2, i, sigma, &mut row);
        for j in 0..n {
            p[(i, j)] = row[j];
        }
    }
    p
}

/// `p_ij = (p_{i|j} + p_{j|i}) / 2N`, floored at [`P_FLOOR`] off the
/// diagonal and renormalized to unit sum.
pub fn joint_probabilities(cond: &DMatrix<f64>) -> DMatrix<f64> {
    let n = cond.nrows();
    let mut p = DMatrix::zeros(n, n);
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let v = ((cond[(i, j)] + cond[(j, i)]) / (2.0 * n as f64)).max(P_FLOOR);
                p[(i, j)] = v;
                total += v;
            }
        }
    }
    p /= total;
    p
}

/// Student-t kernel values `(1 + |y_i - y_j|^2)^-1` (zero diagonal) and their sum.
fn student_kernel(y: &[[f64; 2]]) -> (DMatrix<f64>, f64) {
    let n = y.len();
    let mut w = DMatrix::zeros(n, n);
    let mut z = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            w[(i, j)] = v;
            w[(j, i)] = v;
            z += 2.0 * v;
        }
    }
    (w, z)
}

/// Low-dimensional affinities `q_ij`.
pub fn output_probabilities(y: &[[f64; 2]]) -> DMatrix<f64> {
    let (w, z) = student_kernel(y);
    w / z
}

/// `KL(P || Q) = sum_{i != j} p_ij ln(p_ij / q_ij)`.
pub fn kl_divergence(p: &DMatrix<f64>, y: &[[f64; 2]]) -> f64 {
    let q = output_probabilities(y);
    let n = y.len();
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            let pij = p[(i, j)];
            if i != j && pij > 0.0 {
                kl += pij * (pij / q[(i, j)]).ln();
            }
        }
    }
    kl
}

/// `dKL/dy_i = 4 sum_j (p_ij - q_ij)(y_i - y_j)(1 + |y_i - y_j|^2)^-1`.
pub fn kl_gradient(p: &DMatrix<f64>, y: &[[f64; 2]]) -> Vec<[f64; 2]> {
    gradient_scaled(p, 1.0, y)
}

fn gradient_scaled(p: &DMatrix<f64>, exaggeration: f64, y: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let n = y.len();
    let (w, z) = student_kernel(y);
    let mut grad = vec![[0.0; 2]; n];
    for i in 0..n {
        let mut g = [0.0; 2];
        for j in 0..n {
            if i == j {
                continue;
            }
            let wij = w[(i, j)];
            let coeff = (exaggeration * p[(i, j)] - wij / z) * wij;
            g[0] += coeff * (y[i][0] - y[j][0]);
            g[1] += coeff * (y[i][1] - y[j][1]);
        }
        grad[i] = [4.0 * g[0], 4.0 * g[1]];
    }
    grad
}

fn initial_embedding(x: &DMatrix<f64>, cfg: &TsneConfig) -> Vec<[f64; 2]> {
    let n = x.nrows();
    if cfg.init == TsneInit::Pca && x.ncols() >= 2 && n >= 3 {
        if let Ok(p) = pca(x, 2) {
            let col = p.projections.column(0);
            let mean = col.mean();
            let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            if std > 0.0 {
                let scale = 1e-4 / std;
                return (0..n)
                    .map(|i| [p.projections[(i, 0)] * scale, p.projections[(i, 1)] * scale])
                    .collect();
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, 1e-4).expect("valid normal");
    (0..n)
        .map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)])
        .collect()
}

/// Affinity matrix `P` for rows of `x` at the given perplexity.
pub fn input_affinities(x: &DMatrix<f64>, perplexity: f64) -> Result<DMatrix<f64>> {
    let d2 = squared_distances(x);
    let sigmas = calibrate_sigmas(&d2, perplexity)?;
    Ok(joint_probabilities(&conditional_probabilities(&d2, &sigmas)))
}

/// Embeds the rows of `x` in two dimensions.
///
/// Gradient descent with momentum 0.5 (then 0.8 once exaggeration ends) and
/// per-coordinate adaptive gains; the embedding is re-centered each step.
pub fn tsne(x: &DMatrix<f64>, cfg: &TsneConfig) -> Result<Embedding2D> {
    let n = x.nrows();
    cfg.validate(n)?;
    let p = input_affinities(x, cfg.perplexity)?;
    let mut y = initial_embedding(x, cfg);
    let initial_kl = kl_divergence(&p, &y);
    let mut update = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0_f64; 2]; n];
    for iter in 0..cfg.iterations {
        let early = iter < cfg.exaggeration_iters;
        let exaggeration = if early { cfg.early_exaggeration } else { 1.0 };
        let momentum = if early { 0.5 } else { 0.8 };
        let grad = gradient_scaled(&p, exaggeration, &y);
        if grad.iter().flatten().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient(iter));
        }
        for i in 0..n {
            for d in 0..2 {
                let g = grad[i][d];
                gains[i][d] = if (g > 0.0) != (update[i][d] > 0.0) {
                    gains[i][d] + 0.2
                } else {
                    (gains[i][d] * 0.8).max(0.01)
                };
                update[i][d] = momentum * update[i][d] - cfg.learning_rate * gains[i][d] * g;
                y[i][d] += update[i][d];
            }
        }
        let cx = y.iter().map(|p| p[0]).sum::<f64>() / n as f64;
        let cy = y.iter().map(|p| p[1]).sum::<f64>() / n as f64;
        y.iter_mut().for_each(|p| {
            p[0] -= cx;
            p[1] -= cy;
        });
    }
    let final_kl = kl_divergence(&p, &y);
    if !final_kl.is_finite() || y.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteGradient(cfg.iterations));
    }
    Ok(Embedding2D {
        points: y,
        initial_kl,
        final_kl,
    })
}

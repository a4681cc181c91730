//! Lowest eigenpairs of the chain Hamiltonian via Lanczos iteration inside
//! fixed total-magnetization sectors.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::operators::SparseHamiltonian;
pub use crate::state::SpinState;

/// Energies closer than this are treated as degenerate when comparing sectors.
pub const SECTOR_TIE_TOLERANCE: f64 = 1e-9;

/// Default Krylov-space cap per sector solve.
pub const DEFAULT_MAX_ITER: usize = 1000;

/// Computational basis states with a fixed `sum_i Z_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectorBasis {
    n_sites: usize,
    sz: i32,
    indices: Vec<usize>,
}

impl SectorBasis {
    pub fn sz(&self) -> i32 {
        self.sz
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    fn position(&self, index: usize) -> Option<usize> {
        self.indices.binary_search(&index).ok()
    }
}

/// All basis states whose magnetization `#up - #down` equals `sz`.
pub fn sector_basis(n_sites: usize, sz: i32) -> Result<SectorBasis> {
    crate::state::check_sites(n_sites)?;
    let l = n_sites as i32;
    if sz.abs() > l || (l - sz).rem_euclid(2) != 0 {
        return Err(Error::InvalidSector(format!(
            "sz={sz} incompatible with {n_sites} sites"
        )));
    }
    let down = ((l - sz) / 2) as u32;
    let indices = (0..1usize << n_sites).filter(|b| b.count_ones() == down).collect();
    Ok(SectorBasis { n_sites, sz, indices })
}

#[derive(Debug, Clone)]
pub struct GroundStateResult {
    pub energy: f64,
    pub state: SpinState,
    pub sector: i32,
    pub residual: f64,
    pub iterations: usize,
}

/// Hamiltonian restricted to a sector, stored column-wise.
struct SectorOperator {
    col_start: Vec<usize>,
    rows: Vec<usize>,
    values: Vec<Complex64>,
}

impl SectorOperator {
    fn build(h: &SparseHamiltonian, basis: &SectorBasis) -> Result<Self> {
        let mut col_start = Vec::with_capacity(basis.len() + 1);
        let mut rows = Vec::new();
        let mut values = Vec::new();
        let mut scratch: Vec<(usize, Complex64)> = Vec::new();
        col_start.push(0);
        for &index in basis.indices() {
            scratch.clear();
            scratch.extend(h.column(index));
            scratch.sort_by_key(|&(t, _)| t);
            let mut iter = scratch.iter().copied().peekable();
            while let Some((target, mut value)) = iter.next() {
                while let Some(&(next, v)) = iter.peek() {
                    if next != target {
                        break;
                    }
                    value += v;
                    iter.next();
                }
                if value.norm() <= 1e-13 {
                    continue;
                }
                let pos = basis
                    .position(target)
                    .ok_or_else(|| Error::InvalidSector(format!("operator leaks out of sector sz={}", basis.sz())))?;
                rows.push(pos);
                values.push(value);
            }
            col_start.push(rows.len());
        }
        Ok(Self {
            col_start,
            rows,
            values,
        })
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for (col, &xc) in x.iter().enumerate() {
            for k in self.col_start[col]..self.col_start[col + 1] {
                y[self.rows[k]] += self.values[k] * xc;
            }
        }
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Lowest eigenpair of the (real symmetric) tridiagonal Lanczos matrix.
fn tridiagonal_lowest(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let k = alpha.len();
    let mut t = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let (idx, &value) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty tridiagonal");
    (value, eig.eigenvectors.column(idx).iter().copied().collect())
}

fn sector_seed(seed: u64, sz: i32) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (sz as i64 as u64).wrapping_add(0x632B_E59B_D9B4_E019)
}

/// Lowest eigenpair of `h` restricted to `basis`, by Lanczos with full
/// reorthogonalization against every stored Krylov vector.
///
/// The start vector is drawn from a generator seeded by `(seed, sz)`, so a
/// given input always yields bitwise-identical output.
pub fn lanczos_lowest(
    h: &SparseHamiltonian,
    basis: &SectorBasis,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<GroundStateResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    if basis.is_empty() {
        return Err(Error::InvalidSector("empty sector basis".into()));
    }
    if basis.n_sites() != h.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: h.n_sites(),
            actual: basis.n_sites(),
        });
    }
    let op = SectorOperator::build(h, basis)?;
    let dim = basis.len();
    let max_krylov = max_iter.max(1).min(dim);

    let mut rng = ChaCha8Rng::seed_from_u64(sector_seed(seed, basis.sz()));
    let mut v: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(StandardNormal.sample(&mut rng), 0.0))
        .collect();
    let n0 = norm(&v);
    v.iter_mut().for_each(|x| *x /= n0);

    let mut krylov: Vec<Vec<Complex64>> = vec![v];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![Complex64::new(0.0, 0.0); dim];
    let mut best_residual = f64::INFINITY;

    loop {
        let j = alpha.len();
        op.apply(&krylov[j], &mut w);
        let a = dot(&krylov[j], &w).re;
        alpha.push(a);
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for q in &krylov {
                let c = dot(q, &w);
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = norm(&w);
        let k = alpha.len();
        let exhausted = b < 1e-13 || k >= dim;

        let check = exhausted || k >= max_krylov || k < 40 || k.is_multiple_of(5);
        if check {
            let (energy, coeffs) = tridiagonal_lowest(&alpha, &beta);
            let estimate = b * coeffs[k - 1].abs();
            best_residual = best_residual.min(estimate);
            if estimate < 0.1 * tol || exhausted || k >= max_krylov {
                let mut ritz = vec![Complex64::new(0.0, 0.0); dim];
                for (q, &c) in krylov.iter().zip(&coeffs) {
                    ritz.iter_mut().zip(q).for_each(|(r, x)| *r += x * c);
                }
                let rn = norm(&ritz);
                ritz.iter_mut().for_each(|x| *x /= rn);
                let mut hr = vec![Complex64::new(0.0, 0.0); dim];
                op.apply(&ritz, &mut hr);
                let energy_rq = dot(&ritz, &hr).re;
                let residual = hr
                    .iter()
                    .zip(&ritz)
                    .map(|(a, b)| (a - b * energy_rq).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                best_residual = best_residual.min(residual);
                if residual < tol {
                    let mut amplitudes = vec![Complex64::new(0.0, 0.0); h.dim()];
                    for (&index, &amp) in basis.indices().iter().zip(&ritz) {
                        amplitudes[index] = amp;
                    }
                    let mut state = SpinState::from_unnormalized(h.n_sites(), amplitudes)?;
                    state.fix_global_phase();
                    debug_assert!((energy - energy_rq).abs() < 1e-6);
                    return Ok(GroundStateResult {
                        energy: energy_rq,
                        state,
                        sector: basis.sz(),
                        residual,
                        iterations: k,
                    });
                }
                if exhausted || k >= max_krylov {
                    return Err(Error::NotConverged {
                        sector: basis.sz(),
                        iterations: k,
                        residual: best_residual,
                    });
                }
            }
        }
        beta.push(b);
        let next: Vec<Complex64> = w.iter().map(|x| x / b).collect();
        krylov.push(next);
    }
}

/// Ground state over all magnetization sectors.
///
/// Ties within [`SECTOR_TIE_TOLERANCE`] go to the smaller `|sz|`, then to
/// positive `sz`.
pub fn ground_state_global(h: &SparseHamiltonian, tol: f64, seed: u64) -> Result<GroundStateResult> {
    let l = h.n_sites() as i32;
    let mut best: Option<GroundStateResult> = None;
    for sz in (-l..=l).step_by(2) {
        let basis = sector_basis(h.n_sites(), sz)?;
        let result = lanczos_lowest(h, &basis, tol, DEFAULT_MAX_ITER, seed)?;
        best = Some(match best {
            None => result,
            Some(current) => {
                if prefer(&result, &current) {
                    result
                } else {
                    current
                }
            }
        });
    }
    Ok(best.expect("at least one sector"))
}

fn prefer(candidate: &GroundStateResult, current: &GroundStateResult) -> bool {
    if candidate.energy < current.energy - SECTOR_TIE_TOLERANCE {
        return true;
    }
    if candidate.energy > current.energy + SECTOR_TIE_TOLERANCE {
        return false;
    }
    let key = |sz: i32| (sz.abs(), if sz >= 0 { 0 } else { 1 });
    key(candidate.sector) < key(current.sector)
}

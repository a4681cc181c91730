//! Statevector type shared by every module.
//!
//! Basis convention: site 0 is the most significant bit of the basis index,
//! and a clear bit is the `Z = +1` eigenstate (`Z|0> = +|0>`).

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Largest chain supported by the statevector representation.
pub const MAX_SITES: usize = 24;

const NORM_TOLERANCE: f64 = 1e-10;

/// Bit mask of `site` in a basis index of an `n_sites` chain.
#[inline]
pub fn site_mask(n_sites: usize, site: usize) -> usize {
    1 << (n_sites - 1 - site)
}

/// `Z` eigenvalue (+1 or -1) of `site` in basis state `index`.
#[inline]
pub fn z_value(n_sites: usize, index: usize, site: usize) -> f64 {
    if index & site_mask(n_sites, site) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// A normalized wavefunction over the `2^n_sites` computational basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinState {
    n_sites: usize,
    amplitudes: Vec<Complex64>,
}

impl SpinState {
    /// Wraps an amplitude vector, checking its length and unit norm.
    pub fn new(n_sites: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_sites(n_sites)?;
        if amplitudes.len() != 1 << n_sites {
            return Err(Error::DimensionMismatch {
                expected: 1 << n_sites,
                actual: amplitudes.len(),
            });
        }
        let norm = l2_norm(&amplitudes);
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidInput(format!("state norm {norm} differs from 1")));
        }
        Ok(Self { n_sites, amplitudes })
    }

    /// Normalizes an arbitrary nonzero amplitude vector.
    pub fn from_unnormalized(n_sites: usize, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        check_sites(n_sites)?;
        if amplitudes.len() != 1 << n_sites {
            return Err(Error::DimensionMismatch {
                expected: 1 << n_sites,
                actual: amplitudes.len(),
            });
        }
        let norm = l2_norm(&amplitudes);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidInput("cannot normalize a zero vector".into()));
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Ok(Self { n_sites, amplitudes })
    }

    /// Computational basis state `|index>`.
    pub fn basis(n_sites: usize, index: usize) -> Result<Self> {
        check_sites(n_sites)?;
        let dim = 1usize << n_sites;
        if index >= dim {
            return Err(Error::InvalidInput(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_sites, amplitudes })
    }

    /// The fully polarized state `|00...0>` (all `Z = +1`).
    pub fn all_up(n_sites: usize) -> Result<Self> {
        Self::basis(n_sites, 0)
    }

    /// Haar-like random state from independent complex Gaussian amplitudes.
    pub fn random<R: Rng + ?Sized>(n_sites: usize, rng: &mut R) -> Result<Self> {
        check_sites(n_sites)?;
        let amplitudes = (0..1usize << n_sites)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        Self::from_unnormalized(n_sites, amplitudes)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Mutable access for in-place gate kernels. Callers must keep the norm.
    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.amplitudes)
    }

    /// Computational-basis probabilities `|amp_b|^2`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &SpinState) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Multiplies by a global phase so the largest-magnitude amplitude is
    /// real and positive. Ties go to the lowest basis index.
    pub fn fix_global_phase(&mut self) {
        let max = self.amplitudes.iter().map(|a| a.norm()).fold(0.0_f64, f64::max);
        if max == 0.0 {
            return;
        }
        let pivot = self
            .amplitudes
            .iter()
            .position(|a| a.norm() >= max * (1.0 - 1e-9))
            .expect("max magnitude is attained");
        let phase = self.amplitudes[pivot].conj() / self.amplitudes[pivot].norm();
        self.amplitudes.iter_mut().for_each(|a| *a *= phase);
    }
}

pub(crate) fn check_sites(n_sites: usize) -> Result<()> {
    if n_sites == 0 || n_sites > MAX_SITES {
        return Err(Error::InvalidInput(format!(
            "site count {n_sites} outside 1..={MAX_SITES}"
        )));
    }
    Ok(())
}

pub(crate) fn l2_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

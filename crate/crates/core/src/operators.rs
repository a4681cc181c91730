//! Pauli-string operators and the bond-alternating XXZ (interacting
//! extended SSH) Hamiltonian.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{check_sites, site_mask, SpinState, MAX_SITES};

/// Largest chain for which [`SparseHamiltonian::dense_matrix`] is allowed.
pub const DENSE_LIMIT: usize = 8;

/// Couplings of the open chain
/// `H = J sum_{odd bonds} h_b + J' sum_{even bonds} h_b + eps_pin Z_0`, with
/// `h_b = X X + Y Y + delta Z Z` on each nearest-neighbour bond.
///
/// Bonds are counted from one, so the first bond (sites 0 and 1) carries `J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(rename = "L")]
    pub n_sites: usize,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "Jp")]
    pub jp: f64,
    pub delta: f64,
    #[serde(default = "default_eps_pin")]
    pub eps_pin: f64,
}

pub fn default_eps_pin() -> f64 {
    1e-4
}

impl ModelParams {
    pub fn new(n_sites: usize, j: f64, jp: f64, delta: f64) -> Self {
        Self {
            n_sites,
            j,
            jp,
            delta,
            eps_pin: default_eps_pin(),
        }
    }

    pub fn with_pin(mut self, eps_pin: f64) -> Self {
        self.eps_pin = eps_pin;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.n_sites;
        if l < 2 || !l.is_multiple_of(2) || l > MAX_SITES {
            return Err(Error::InvalidModel(format!(
                "site count must be even and in 2..={MAX_SITES}, got {l}"
            )));
        }
        if !(self.j > 0.0) || !self.j.is_finite() {
            return Err(Error::InvalidModel(format!("J must be positive, got {}", self.j)));
        }
        if !(self.jp >= 0.0) || !self.jp.is_finite() {
            return Err(Error::InvalidModel(format!("J' must be non-negative, got {}", self.jp)));
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(Error::InvalidModel(format!(
                "delta must be non-negative, got {}",
                self.delta
            )));
        }
        if !self.eps_pin.is_finite() {
            return Err(Error::InvalidModel("eps_pin must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// A real multiple of a Pauli string. Sites are 0-based, sorted and distinct.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliTerm {
    coefficient: f64,
    factors: Vec<(usize, Axis)>,
}

impl PauliTerm {
    pub fn new(coefficient: f64, mut factors: Vec<(usize, Axis)>) -> Result<Self> {
        factors.sort_by_key(|&(site, _)| site);
        if factors.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidModel("duplicate site in Pauli term".into()));
        }
        Ok(Self { coefficient, factors })
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn factors(&self) -> &[(usize, Axis)] {
        &self.factors
    }

    fn max_site(&self) -> Option<usize> {
        self.factors.last().map(|&(s, _)| s)
    }
}

/// Bit masks describing how a Pauli string acts on basis states:
/// `P|b> = i^{n_y} (-1)^{popcount(b & sign_mask)} |b ^ flip_mask>`.
#[derive(Debug, Clone, Copy)]
struct CompiledTerm {
    coefficient: f64,
    flip_mask: usize,
    sign_mask: usize,
    i_power: u32,
}

impl CompiledTerm {
    fn compile(term: &PauliTerm, n_sites: usize) -> Self {
        let mut flip_mask = 0;
        let mut sign_mask = 0;
        let mut i_power = 0;
        for &(site, axis) in &term.factors {
            let m = site_mask(n_sites, site);
            match axis {
                Axis::X => flip_mask |= m,
                Axis::Y => {
                    flip_mask |= m;
                    sign_mask |= m;
                    i_power += 1;
                }
                Axis::Z => sign_mask |= m,
            }
        }
        Self {
            coefficient: term.coefficient,
            flip_mask,
            sign_mask,
            i_power: i_power % 4,
        }
    }

    /// Returns `(target index, amplitude factor)` for `P|index>`.
    #[inline]
    fn act(&self, index: usize) -> (usize, Complex64) {
        let base = match self.i_power {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        let sign = if (index & self.sign_mask).count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        (index ^ self.flip_mask, base * (sign * self.coefficient))
    }
}

/// Sum of Pauli terms on an `n_sites` chain, Hermitian by construction.
#[derive(Debug, Clone)]
pub struct SparseHamiltonian {
    n_sites: usize,
    terms: Vec<PauliTerm>,
    compiled: Vec<CompiledTerm>,
}

impl SparseHamiltonian {
    pub fn new(n_sites: usize, terms: Vec<PauliTerm>) -> Result<Self> {
        check_sites(n_sites)?;
        if let Some(bad) = terms.iter().filter_map(PauliTerm::max_site).find(|&s| s >= n_sites) {
            return Err(Error::SiteOutOfRange { site: bad, n_sites });
        }
        let compiled = terms.iter().map(|t| CompiledTerm::compile(t, n_sites)).collect();
        Ok(Self {
            n_sites,
            terms,
            compiled,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    /// `out = H input` on raw amplitude slices of length `2^n_sites`.
    pub fn apply_into(&self, input: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        let dim = self.dim();
        for len in [input.len(), out.len()] {
            if len != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: len,
                });
            }
        }
        out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
        for term in &self.compiled {
            for (index, &amp) in input.iter().enumerate() {
                if amp.re == 0.0 && amp.im == 0.0 {
                    continue;
                }
                let (target, factor) = term.act(index);
                out[target] += factor * amp;
            }
        }
        Ok(())
    }

    /// Matrix-free `H|s>`. The result is not normalized.
    pub fn apply(&self, s: &SpinState) -> Result<Vec<Complex64>> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        self.apply_into(s.amplitudes(), &mut out)?;
        Ok(out)
    }

    /// Nonzero matrix elements `(row, value)` of column `index`, i.e. the
    /// expansion of `H|index>`. Entries for the same row are not merged.
    pub(crate) fn column(&self, index: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        self.compiled.iter().map(move |t| t.act(index))
    }

    /// Dense `2^L x 2^L` matrix. Only for `L <= 8`.
    pub fn dense_matrix(&self) -> Result<DMatrix<Complex64>> {
        if self.n_sites > DENSE_LIMIT {
            return Err(Error::DenseTooLarge(self.n_sites));
        }
        let dim = self.dim();
        let mut m = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        for col in 0..dim {
            for (row, value) in self.column(col) {
                m[(row, col)] += value;
            }
        }
        Ok(m)
    }
}

/// Builds the bond-alternating XXZ chain with open boundaries.
///
/// Term count is `3 (L - 1)` plus one for a nonzero pinning field. Bonds whose
/// coupling is exactly zero are omitted.
pub fn build_hamiltonian(p: &ModelParams) -> Result<SparseHamiltonian> {
    p.validate()?;
    let l = p.n_sites;
    let mut terms = Vec::with_capacity(3 * (l - 1) + 1);
    for site in 0..l - 1 {
        // site is 0-based, so bond number site+1 is odd for even `site`
        let coupling = if site % 2 == 0 { p.j } else { p.jp };
        if coupling == 0.0 {
            continue;
        }
        let next = site + 1;
        terms.push(PauliTerm::new(coupling, vec![(site, Axis::X), (next, Axis::X)])?);
        terms.push(PauliTerm::new(coupling, vec![(site, Axis::Y), (next, Axis::Y)])?);
        if p.delta != 0.0 {
            terms.push(PauliTerm::new(
                coupling * p.delta,
                vec![(site, Axis::Z), (next, Axis::Z)],
            )?);
        }
    }
    if p.eps_pin != 0.0 {
        terms.push(PauliTerm::new(p.eps_pin, vec![(0, Axis::Z)])?);
    }
    SparseHamiltonian::new(l, terms)
}

/// Free-function form of [`SparseHamiltonian::apply`].
pub fn apply_hamiltonian(h: &SparseHamiltonian, s: &SpinState) -> Result<Vec<Complex64>> {
    if s.n_sites() != h.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            actual: s.dim(),
        });
    }
    h.apply(s)
}

/// Free-function form of [`SparseHamiltonian::dense_matrix`].
pub fn dense_matrix(h: &SparseHamiltonian) -> Result<DMatrix<Complex64>> {
    h.dense_matrix()
}

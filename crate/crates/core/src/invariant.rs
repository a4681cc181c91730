//! Partial-reflection many-body topological invariant, used as the
//! ground-truth phase oracle.
//!
//! `Z_R = Tr(rho_I R_I) / sqrt((Tr rho_I1^2 + Tr rho_I2^2) / 2)` where
//! `I = I1 u I2` are two adjacent blocks of `n` sites and `R_I` mirrors `I`
//! about its center.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::SpinState;

/// Largest subsystem for which a reduced density matrix is formed.
pub const MAX_SUBSYSTEM: usize = 12;

const IMAG_WARN: f64 = 1e-10;
const IMAG_ERROR: f64 = 1e-6;

/// Two adjacent blocks `I1 = [start, start+n)` and `I2 = [start+n, start+2n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub start: usize,
    pub n: usize,
}

impl Partition {
    pub fn new(start: usize, n: usize, n_sites: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidPartition("blocks must be nonempty".into()));
        }
        if start + 2 * n > n_sites {
            return Err(Error::InvalidPartition(format!(
                "blocks [{start}, {}) exceed {n_sites} sites",
                start + 2 * n
            )));
        }
        if 2 * n > MAX_SUBSYSTEM {
            return Err(Error::SubsystemTooLarge(2 * n));
        }
        Ok(Self { start, n })
    }

    /// Builds a partition from explicit site lists, checking that each block
    /// is contiguous, both have the same size, and `I2` follows `I1`.
    pub fn from_blocks(i1: &[usize], i2: &[usize], n_sites: usize) -> Result<Self> {
        if i1.len() != i2.len() {
            return Err(Error::InvalidPartition("blocks differ in size".into()));
        }
        let contiguous = |b: &[usize]| b.windows(2).all(|w| w[1] == w[0] + 1);
        if !contiguous(i1) || !contiguous(i2) {
            return Err(Error::InvalidPartition("blocks must be contiguous".into()));
        }
        match (i1.first(), i1.last(), i2.first()) {
            (Some(&start), Some(&end), Some(&next)) if next == end + 1 => Self::new(start, i1.len(), n_sites),
            (Some(_), _, _) => Err(Error::InvalidPartition("blocks are not adjacent".into())),
            _ => Err(Error::InvalidPartition("blocks must be nonempty".into())),
        }
    }

    /// Blocks of `n` sites on either side of the middle of the chain.
    pub fn centered(n_sites: usize, n: usize) -> Result<Self> {
        let mid = n_sites / 2;
        if n > mid {
            return Err(Error::InvalidPartition(format!(
                "blocks of {n} sites do not fit around the center of {n_sites} sites"
            )));
        }
        Self::new(mid - n, n, n_sites)
    }

    /// Default oracle partition.
    ///
    /// The mirror plane sits on an inter-cell (`J'`) bond nearest the chain
    /// center and `n` is `floor(L/4)` rounded down to even, so the two outer
    /// cuts cross bonds of the same kind as the central cut. Dimerized
    /// limits then give exactly `+1` (trivial) and `-1` (topological).
    pub fn default_for(n_sites: usize) -> Result<Self> {
        if n_sites < 8 {
            return Err(Error::InvalidPartition(format!(
                "default partition needs at least 8 sites, got {n_sites}"
            )));
        }
        // cut after `mid` sites lies on bond number `mid`; J' bonds are even
        let mid = if (n_sites / 2).is_multiple_of(2) {
            n_sites / 2
        } else {
            n_sites / 2 - 1
        };
        let quarter = n_sites / 4;
        let n = (quarter - quarter % 2).min(MAX_SUBSYSTEM / 2 - (MAX_SUBSYSTEM / 2) % 2);
        Self::new(mid - n, n, n_sites)
    }

    pub fn block1(&self) -> Vec<usize> {
        (self.start..self.start + self.n).collect()
    }

    pub fn block2(&self) -> Vec<usize> {
        (self.start + self.n..self.start + 2 * self.n).collect()
    }

    pub fn sites(&self) -> Vec<usize> {
        (self.start..self.start + 2 * self.n).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MbtiResult {
    pub value: f64,
    pub numerator: f64,
    pub purity1: f64,
    pub purity2: f64,
}

/// `rho_I = Tr_{S-I} |psi><psi|` for a contiguous block of sites.
pub fn reduced_density_matrix(s: &SpinState, sites: &[usize]) -> Result<DMatrix<Complex64>> {
    let l = s.n_sites();
    let k = sites.len();
    if k == 0 {
        return Err(Error::InvalidPartition("empty subsystem".into()));
    }
    if k > MAX_SUBSYSTEM {
        return Err(Error::SubsystemTooLarge(k));
    }
    if sites.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::InvalidPartition("subsystem must be contiguous".into()));
    }
    let first = sites[0];
    if first + k > l {
        return Err(Error::SiteOutOfRange {
            site: first + k - 1,
            n_sites: l,
        });
    }
    // index = (left, mid, right) with `right` the low bits
    let right_bits = l - first - k;
    let left_dim = 1usize << first;
    let mid_dim = 1usize << k;
    let right_dim = 1usize << right_bits;
    let amps = s.amplitudes();
    let mut rho = DMatrix::from_element(mid_dim, mid_dim, Complex64::new(0.0, 0.0));
    for left in 0..left_dim {
        for right in 0..right_dim {
            let base = (left << (k + right_bits)) | right;
            for m in 0..mid_dim {
                let a = amps[base | (m << right_bits)];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for mp in 0..mid_dim {
                    let b = amps[base | (mp << right_bits)];
                    rho[(m, mp)] += a * b.conj();
                }
            }
        }
    }
    Ok(rho)
}

/// `Tr(rho^2)` for a Hermitian `rho`.
pub fn purity(rho: &DMatrix<Complex64>) -> f64 {
    rho.iter().map(|x| x.norm_sqr()).sum()
}

/// Reverses the lowest `bits` bits of `m`: the basis-index image of mirroring
/// the subsystem about its center.
fn mirror_index(m: usize, bits: usize) -> usize {
    (0..bits).fold(0, |acc, b| acc | (((m >> b) & 1) << (bits - 1 - b)))
}

pub fn partial_reflection_invariant(s: &SpinState, part: &Partition) -> Result<MbtiResult> {
    let part = Partition::new(part.start, part.n, s.n_sites())?;
    let bits = 2 * part.n;
    let rho = reduced_density_matrix(s, &part.sites())?;
    let trace: Complex64 = (0..1usize << bits).map(|m| rho[(m, mirror_index(m, bits))]).sum();
    if trace.im.abs() > IMAG_ERROR {
        return Err(Error::ImaginaryResidue(trace.im));
    }
    if trace.im.abs() > IMAG_WARN {
        log::warn!("discarding imaginary part {:e} of reflection expectation", trace.im);
    }
    let purity1 = purity(&reduced_density_matrix(s, &part.block1())?);
    let purity2 = purity(&reduced_density_matrix(s, &part.block2())?);
    let numerator = trace.re;
    Ok(MbtiResult {
        value: numerator / (0.5 * (purity1 + purity2)).sqrt(),
        numerator,
        purity1,
        purity2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PhaseLabel {
    Spt,
    Trivial,
    #[serde(rename = "SB")]
    SymmetryBroken,
}

impl std::fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Spt => "SPT",
            Self::Trivial => "TRIVIAL",
            Self::SymmetryBroken => "SB",
        })
    }
}

impl std::str::FromStr for PhaseLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "SPT" => Ok(Self::Spt),
            "TRIVIAL" => Ok(Self::Trivial),
            "SB" => Ok(Self::SymmetryBroken),
            other => Err(Error::InvalidInput(format!("unknown phase label {other:?}"))),
        }
    }
}

/// Decision levels for [`classify_mbti`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MbtiThresholds {
    pub spt_below: f64,
    pub trivial_above: f64,
}

impl Default for MbtiThresholds {
    fn default() -> Self {
        Self {
            spt_below: -0.5,
            trivial_above: 0.5,
        }
    }
}

pub fn classify_mbti(value: f64, thresholds: &MbtiThresholds) -> PhaseLabel {
    if value < thresholds.spt_below {
        PhaseLabel::Spt
    } else if value > thresholds.trivial_above {
        PhaseLabel::Trivial
    } else {
        PhaseLabel::SymmetryBroken
    }
}

/// Parameter values where a sampled curve crosses `level`, by linear
/// interpolation between neighbouring samples.
pub fn level_crossings(xs: &[f64], ys: &[f64], level: f64) -> Vec<f64> {
    xs.windows(2)
        .zip(ys.windows(2))
        .filter_map(|(x, y)| {
            let (a, b) = (y[0] - level, y[1] - level);
            if a == 0.0 {
                Some(x[0])
            } else if a * b < 0.0 {
                Some(x[0] + (x[1] - x[0]) * a / (a - b))
            } else {
                None
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    /// Product of two-site singlets on the given pairs; remaining sites up.
    fn dimer_state(n_sites: usize, pairs: &[(usize, usize)]) -> SpinState {
        let mut amps = vec![c(0.0); 1 << n_sites];
        let np = pairs.len();
        for choice in 0..1usize << np {
            let mut index = 0;
            let mut sign = 1.0;
            for (k, &(a, b)) in pairs.iter().enumerate() {
                // singlet (|01> - |10>)/sqrt2
                let flip_first = (choice >> k) & 1 == 1;
                let site = if flip_first { a } else { b };
                index |= 1 << (n_sites - 1 - site);
                if flip_first {
                    sign = -sign;
                }
            }
            amps[index] = c(sign);
        }
        SpinState::from_unnormalized(n_sites, amps).unwrap()
    }

    #[test]
    fn product_state_marginals() {
        let s = SpinState::all_up(2).unwrap();
        let rho = reduced_density_matrix(&s, &[0]).unwrap();
        assert_eq!(rho[(0, 0)], c(1.0));
        assert_eq!(rho[(1, 1)], c(0.0));
    }

    #[test]
    fn singlet_marginal_is_maximally_mixed() {
        let s = dimer_state(2, &[(0, 1)]);
        let rho = reduced_density_matrix(&s, &[0]).unwrap();
        assert!((rho[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((rho[(1, 1)].re - 0.5).abs() < 1e-15);
        assert!(rho[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn full_system_is_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = SpinState::random(4, &mut rng).unwrap();
        let rho = reduced_density_matrix(&s, &[0, 1, 2, 3]).unwrap();
        assert!((purity(&rho) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_subsystems() {
        let s = SpinState::all_up(14).unwrap();
        assert!(matches!(
            reduced_density_matrix(&s, &(0..13).collect::<Vec<_>>()),
            Err(Error::SubsystemTooLarge(13))
        ));
        assert!(reduced_density_matrix(&s, &[0, 2]).is_err());
        assert!(Partition::from_blocks(&[0, 1], &[3, 4], 8).is_err());
        assert!(Partition::from_blocks(&[0, 2], &[3, 4], 8).is_err());
        assert!(Partition::from_blocks(&[0, 1], &[2], 8).is_err());
        assert_eq!(
            Partition::from_blocks(&[2, 3], &[4, 5], 8).unwrap(),
            Partition { start: 2, n: 2 }
        );
    }

    #[test]
    fn polarized_state_is_reflection_symmetric() {
        let s = SpinState::all_up(8).unwrap();
        let r = partial_reflection_invariant(&s, &Partition::centered(8, 2).unwrap()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-14);
        assert_eq!(r.purity1, 1.0);
    }

    #[test]
    fn dimer_limits_give_unit_invariant() {
        // 12 sites, strong intra-cell bonds (0,1),(2,3),...
        let trivial = dimer_state(12, &[(0, 1), (2, 3), (4, 5), (6, 7), (8, 9), (10, 11)]);
        // strong inter-cell bonds (1,2),(3,4),... with free edge spins 0 and 11
        let spt = dimer_state(12, &[(1, 2), (3, 4), (5, 6), (7, 8), (9, 10)]);
        let part = Partition::default_for(12).unwrap();
        let t = partial_reflection_invariant(&trivial, &part).unwrap();
        let p = partial_reflection_invariant(&spt, &part).unwrap();
        assert!((t.value - 1.0).abs() < 1e-12, "{t:?}");
        assert!((p.value + 1.0).abs() < 1e-12, "{p:?}");
    }

    #[test]
    fn odd_centered_blocks_miss_unit_values_in_dimer_limits() {
        let trivial = dimer_state(12, &[(0, 1), (2, 3), (4, 5), (6, 7), (8, 9), (10, 11)]);
        let spt = dimer_state(12, &[(1, 2), (3, 4), (5, 6), (7, 8), (9, 10)]);
        let part = Partition::centered(12, 3).unwrap();
        // trivial: Tr(rho R) = 1/2 from the two cut singlets, purities 1/2
        let t = partial_reflection_invariant(&trivial, &part).unwrap();
        assert!((t.value - 0.5f64.sqrt()).abs() < 1e-12, "{t:?}");
        // topological: three whole singlets inside, purities 1/2
        let p = partial_reflection_invariant(&spt, &part).unwrap();
        assert!((p.value + 2.0f64.sqrt()).abs() < 1e-12, "{p:?}");
    }

    #[test]
    fn default_partition_sits_on_inter_cell_bond() {
        for l in [8, 10, 12, 14, 16, 20, 24] {
            let p = Partition::default_for(l).unwrap();
            let mid = p.start + p.n;
            assert_eq!(mid % 2, 0, "L={l}");
            assert_eq!(p.n % 2, 0, "L={l}");
            assert!(p.start >= 1 && p.start + 2 * p.n < l, "L={l}");
        }
        assert_eq!(Partition::default_for(12).unwrap(), Partition { start: 4, n: 2 });
        assert_eq!(Partition::default_for(16).unwrap(), Partition { start: 4, n: 4 });
    }

    #[test]
    fn classification() {
        let t = MbtiThresholds::default();
        assert_eq!(classify_mbti(-0.95, &t), PhaseLabel::Spt);
        assert_eq!(classify_mbti(0.95, &t), PhaseLabel::Trivial);
        assert_eq!(classify_mbti(0.05, &t), PhaseLabel::SymmetryBroken);
    }

    #[test]
    fn crossings_interpolate() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 0.5, -0.5, -1.0];
        assert_eq!(level_crossings(&xs, &ys, 0.0), vec![1.5]);
        assert!(level_crossings(&xs, &[1.0; 4], 0.0).is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn reduced_matrices_are_states(seed in any::<u64>(), first in 0usize..5, k in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = SpinState::random(8, &mut rng).unwrap();
            let sites: Vec<usize> = (first..first + k).collect();
            let rho = reduced_density_matrix(&s, &sites).unwrap();
            prop_assert!((&rho - rho.adjoint()).camax() < 1e-12);
            prop_assert!((rho.trace() - c(1.0)).norm() < 1e-10);
            let ev = rho.symmetric_eigenvalues();
            prop_assert!(ev.iter().all(|&e| e > -1e-10));
            let p = purity(&rho);
            prop_assert!(p > 0.0 && p <= 1.0 + 1e-12);
        }

        #[test]
        fn mirror_is_an_involution(m in 0usize..4096) {
            prop_assert_eq!(mirror_index(mirror_index(m, 12), 12), m);
        }

        #[test]
        fn invariant_ignores_global_phase(seed in any::<u64>(), theta in 0.0f64..std::f64::consts::TAU) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = SpinState::random(8, &mut rng).unwrap();
            let phase = Complex64::from_polar(1.0, theta);
            let rotated = SpinState::new(8, s.amplitudes().iter().map(|a| a * phase).collect()).unwrap();
            let part = Partition::centered(8, 2).unwrap();
            let a = partial_reflection_invariant(&s, &part).unwrap();
            let b = partial_reflection_invariant(&rotated, &part).unwrap();
            prop_assert!((a.value - b.value).abs() < 1e-12);
        }
    }
}

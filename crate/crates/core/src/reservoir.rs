//! Disordered Floquet drive used as the quantum reservoir.
//!
//! One cycle is `U_F = exp(-i g' sum X_i) exp(-i sum phi_i Z_i Z_{i+1}) exp(-i sum h_i Z_i)`,
//! applied right to left, where `g' = g/2` under [`PulseConvention::HalfAngle`]
//! and `g' = g` under [`PulseConvention::Literal`].

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{site_mask, z_value, SpinState};

pub const PHI_MIN: f64 = -1.5 * PI;
pub const PHI_MAX: f64 = -0.5 * PI;
pub const H_MIN: f64 = -PI;
pub const H_MAX: f64 = PI;

/// How the pulse parameter `g` maps onto the X rotation angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PulseConvention {
    /// `exp(-i (g/2) X)`: `g = pi` is a perfect spin flip.
    #[default]
    HalfAngle,
    /// `exp(-i g X)`.
    Literal,
}

impl PulseConvention {
    pub fn rotation_angle(self, g: f64) -> f64 {
        match self {
            Self::HalfAngle => 0.5 * g,
            Self::Literal => g,
        }
    }
}

impl std::str::FromStr for PulseConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "HALF_ANGLE" => Ok(Self::HalfAngle),
            "LITERAL" => Ok(Self::Literal),
            other => Err(Error::Config(format!("unknown pulse convention {other}"))),
        }
    }
}

impl std::fmt::Display for PulseConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::HalfAngle => "HALF_ANGLE",
            Self::Literal => "LITERAL",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RegimeLabel {
    Mbl,
    Thermal,
    Dtc,
}

impl RegimeLabel {
    pub fn from_g(g: f64) -> Self {
        if g < 0.2 * PI {
            Self::Mbl
        } else if g > 0.84 * PI {
            Self::Dtc
        } else {
            Self::Thermal
        }
    }
}

/// One disorder realization of the drive plus its depth.
///
/// `g` is in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetParams {
    pub g: f64,
    pub phis: Vec<f64>,
    pub hs: Vec<f64>,
    pub depth: usize,
    pub seed: u64,
    pub convention: PulseConvention,
}

impl FloquetParams {
    /// Explicit construction. Accepts the closed range `g in [0, pi]` so the
    /// exact-flip point can be studied; disorder must lie in the sampling box.
    pub fn new(
        g: f64,
        phis: Vec<f64>,
        hs: Vec<f64>,
        depth: usize,
        seed: u64,
        convention: PulseConvention,
    ) -> Result<Self> {
        let p = Self {
            g,
            phis,
            hs,
            depth,
            seed,
            convention,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=PI).contains(&self.g) {
            return Err(Error::InvalidReservoir(format!("g={} outside [0, pi]", self.g)));
        }
        if self.hs.is_empty() || self.phis.len() + 1 != self.hs.len() {
            return Err(Error::InvalidReservoir(format!(
                "expected L-1 couplings for L fields, got {} and {}",
                self.phis.len(),
                self.hs.len()
            )));
        }
        if self.phis.iter().any(|p| !(PHI_MIN..=PHI_MAX).contains(p)) {
            return Err(Error::InvalidReservoir("phi outside [-1.5pi, -0.5pi]".into()));
        }
        if self.hs.iter().any(|h| !(H_MIN..=H_MAX).contains(h)) {
            return Err(Error::InvalidReservoir("h outside [-pi, pi]".into()));
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.hs.len()
    }

    pub fn regime(&self) -> RegimeLabel {
        RegimeLabel::from_g(self.g)
    }

    /// Same disorder with a different pulse.
    pub fn with_g(mut self, g: f64) -> Result<Self> {
        self.g = g;
        self.validate()?;
        Ok(self)
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }
}

/// Draws `phi_i` uniformly in `[-1.5pi, -0.5pi]` and `h_i` in `[-pi, pi]`.
///
/// Uses a ChaCha stream, so a seed maps to the same realization on every
/// platform. All `phi` values are drawn before the `h` values.
pub fn sample_disorder(
    n_sites: usize,
    g: f64,
    depth: usize,
    seed: u64,
    convention: PulseConvention,
) -> Result<FloquetParams> {
    if !(g > 0.0 && g < PI) {
        return Err(Error::InvalidReservoir(format!("g={g} outside (0, pi)")));
    }
    if n_sites == 0 {
        return Err(Error::InvalidReservoir("empty chain".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi_dist = Uniform::new_inclusive(PHI_MIN, PHI_MAX);
    let h_dist = Uniform::new_inclusive(H_MIN, H_MAX);
    let phis = (0..n_sites - 1).map(|_| phi_dist.sample(&mut rng)).collect();
    let hs = (0..n_sites).map(|_| h_dist.sample(&mut rng)).collect();
    FloquetParams::new(g, phis, hs, depth, seed, convention)
}

fn check_len(actual: usize, expected: usize) -> Result<()> {
    if actual != expected {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

fn rotate_x(amps: &mut [Complex64], n_sites: usize, angle: f64) {
    let (s, c) = angle.sin_cos();
    let minus_is = Complex64::new(0.0, -s);
    for site in 0..n_sites {
        let mask = site_mask(n_sites, site);
        for i0 in 0..amps.len() {
            if i0 & mask != 0 {
                continue;
            }
            let i1 = i0 | mask;
            let a0 = amps[i0];
            let a1 = amps[i1];
            amps[i0] = a0 * c + a1 * minus_is;
            amps[i1] = a1 * c + a0 * minus_is;
        }
    }
}

/// `prod_i exp(-i g' X_i)` with `g'` set by the convention.
pub fn apply_x_pulse(s: &mut SpinState, g: f64, convention: PulseConvention) {
    let n = s.n_sites();
    rotate_x(s.amplitudes_mut(), n, convention.rotation_angle(g));
}

fn zz_energy(n_sites: usize, index: usize, phis: &[f64]) -> f64 {
    phis.iter()
        .enumerate()
        .map(|(i, phi)| phi * z_value(n_sites, index, i) * z_value(n_sites, index, i + 1))
        .sum()
}

fn z_energy(n_sites: usize, index: usize, hs: &[f64]) -> f64 {
    hs.iter().enumerate().map(|(i, h)| h * z_value(n_sites, index, i)).sum()
}

/// Diagonal phase `exp(-i sum phi_i z_i z_{i+1})`.
pub fn apply_zz_layer(s: &mut SpinState, phis: &[f64]) -> Result<()> {
    let n = s.n_sites();
    check_len(phis.len(), n - 1)?;
    for (index, a) in s.amplitudes_mut().iter_mut().enumerate() {
        *a *= Complex64::from_polar(1.0, -zz_energy(n, index, phis));
    }
    Ok(())
}

/// Diagonal phase `exp(-i sum h_i z_i)`.
pub fn apply_z_layer(s: &mut SpinState, hs: &[f64]) -> Result<()> {
    let n = s.n_sites();
    check_len(hs.len(), n)?;
    for (index, a) in s.amplitudes_mut().iter_mut().enumerate() {
        *a *= Complex64::from_polar(1.0, -z_energy(n, index, hs));
    }
    Ok(())
}

/// A drive with its diagonal layers pre-multiplied into one phase table.
#[derive(Debug, Clone)]
pub struct FloquetCircuit {
    n_sites: usize,
    angle: f64,
    diagonal: Vec<Complex64>,
}

impl FloquetCircuit {
    pub fn new(p: &FloquetParams) -> Result<Self> {
        p.validate()?;
        let n = p.n_sites();
        let diagonal = (0..1usize << n)
            .map(|index| Complex64::from_polar(1.0, -(zz_energy(n, index, &p.phis) + z_energy(n, index, &p.hs))))
            .collect();
        Ok(Self {
            n_sites: n,
            angle: p.convention.rotation_angle(p.g),
            diagonal,
        })
    }

    /// One Floquet cycle in place.
    pub fn step(&self, s: &mut SpinState) -> Result<()> {
        check_len(s.n_sites(), self.n_sites)?;
        let amps = s.amplitudes_mut();
        amps.iter_mut().zip(&self.diagonal).for_each(|(a, d)| *a *= d);
        rotate_x(amps, self.n_sites, self.angle);
        Ok(())
    }

    /// Applies `cycles` steps, calling `observe(t, state)` after each one.
    pub fn run<F>(&self, s: &mut SpinState, cycles: usize, mut observe: F) -> Result<()>
    where
        F: FnMut(usize, &SpinState),
    {
        for t in 1..=cycles {
            self.step(s)?;
            observe(t, s);
        }
        Ok(())
    }
}

/// Applies `p.depth` Floquet cycles to a copy of `s`.
pub fn evolve(s: &SpinState, p: &FloquetParams) -> Result<SpinState> {
    check_len(s.n_sites(), p.n_sites())?;
    let mut out = s.clone();
    if p.depth == 0 {
        return Ok(out);
    }
    FloquetCircuit::new(p)?.run(&mut out, p.depth, |_, _| {})?;
    Ok(out)
}

//! Brute-force cross-checks of every numerical kernel against dense or
//! finite-difference references.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::groundstate::ground_state_global;
use crate::invariant::reduced_density_matrix;
use crate::learn::{
    calibrate_sigmas, conditional_probabilities, gmm_fit, joint_probabilities, kl_divergence, kl_gradient,
    output_probabilities, squared_distances,
};
use crate::operators::{build_hamiltonian, ModelParams};
use crate::reservoir::{evolve, sample_disorder, FloquetParams, PulseConvention};
use crate::state::{z_value, SpinState};
use crate::Complex64;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn elapsed(&self) -> Duration {
        self.checks.iter().map(|c| c.elapsed).sum()
    }
}

type Outcome = std::result::Result<String, String>;

fn check(name: &'static str, f: impl FnOnce() -> Outcome) -> Check {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    Check {
        name,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn random_state(n: usize, rng: &mut ChaCha8Rng) -> SpinState {
    SpinState::random(n, rng).expect("valid size")
}

fn hamiltonian_dense() -> Outcome {
    let spectrum = |delta: f64| -> Vec<f64> {
        let h = build_hamiltonian(&ModelParams::new(2, 1.0, 0.0, delta).with_pin(0.0)).unwrap();
        let mut ev: Vec<f64> = h
            .dense_matrix()
            .unwrap()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    };
    for (delta, want) in [(0.0, [-2.0, 0.0, 0.0, 2.0]), (1.0, [-3.0, 1.0, 1.0, 1.0])] {
        let got = spectrum(delta);
        let err = got.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure(err < 1e-12, || format!("L=2 delta={delta} spectrum {got:?}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..4 {
        let n = rng.gen_range(2..=6) & !1;
        let p = ModelParams::new(
            n,
            rng.gen_range(0.2..2.0),
            rng.gen_range(0.0..3.0),
            rng.gen_range(0.0..4.0),
        )
        .with_pin(rng.gen_range(0.0..0.1));
        let h = build_hamiltonian(&p).map_err(|e| e.to_string())?;
        let m = h.dense_matrix().map_err(|e| e.to_string())?;
        worst = worst.max((&m - m.adjoint()).camax());
        let dim = 1 << n;
        let total_z = DMatrix::from_fn(dim, dim, |i, j| {
            if i == j {
                c((0..n).map(|s| z_value(n, i, s)).sum())
            } else {
                c(0.0)
            }
        });
        worst = worst.max((&m * &total_z - &total_z * &m).camax());
        let s = random_state(n, &mut rng);
        let dense = &m * nalgebra::DVector::from_column_slice(s.amplitudes());
        let sparse = h.apply(&s).map_err(|e| e.to_string())?;
        worst = worst.max(
            dense
                .iter()
                .zip(&sparse)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max),
        );
    }
    ensure(worst < 1e-12, || {
        format!("hermiticity/commutator/matvec error {worst:e}")
    })?;
    Ok(format!("max error {worst:.1e}"))
}

fn lanczos_vs_dense() -> Outcome {
    let cases = [
        (4, 0.3, 0.5),
        (4, 2.0, 3.0),
        (6, 1.0, 1.0),
        (6, 0.5, 4.0),
        (8, 0.2, 0.5),
        (8, 2.5, 0.5),
        (8, 1.2, 3.0),
    ];
    let mut worst = 0.0f64;
    for (n, jp, delta) in cases {
        let h = build_hamiltonian(&ModelParams::new(n, 1.0, jp, delta)).map_err(|e| e.to_string())?;
        let exact = h
            .dense_matrix()
            .map_err(|e| e.to_string())?
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let gs = ground_state_global(&h, 1e-10, 0).map_err(|e| e.to_string())?;
        let err = (gs.energy - exact).abs();
        ensure(err < 1e-8, || {
            format!("L={n} jp={jp} delta={delta}: lanczos {} dense {exact}", gs.energy)
        })?;
        worst = worst.max(err);
    }
    Ok(format!("{} cases, max |dE| {worst:.1e}", cases.len()))
}

fn dense_cycle(p: &FloquetParams) -> DMatrix<Complex64> {
    let n = p.n_sites();
    let dim = 1 << n;
    let angle = p.convention.rotation_angle(p.g);
    let (s, co) = angle.sin_cos();
    let single = DMatrix::from_row_slice(2, 2, &[c(co), Complex64::new(0.0, -s), Complex64::new(0.0, -s), c(co)]);
    let mut x = DMatrix::from_element(1, 1, c(1.0));
    for _ in 0..n {
        x = x.kronecker(&single);
    }
    let diag = DMatrix::from_fn(dim, dim, |i, j| {
        if i != j {
            return c(0.0);
        }
        let mut e = 0.0;
        for site in 0..n {
            e += p.hs[site] * z_value(n, i, site);
            if site + 1 < n {
                e += p.phis[site] * z_value(n, i, site) * z_value(n, i, site + 1);
            }
        }
        Complex64::from_polar(1.0, -e)
    });
    x * diag
}

fn gates_vs_dense() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in 1..=6 {
        for convention in [PulseConvention::HalfAngle, PulseConvention::Literal] {
            let g = rng.gen_range(0.05..3.0);
            let depth = rng.gen_range(1..4);
            let p = sample_disorder(n, g, depth, rng.gen(), convention).map_err(|e| e.to_string())?;
            let s = random_state(n, &mut rng);
            let u = dense_cycle(&p);
            let mut v = nalgebra::DVector::from_column_slice(s.amplitudes());
            for _ in 0..depth {
                v = &u * v;
            }
            let out = evolve(&s, &p).map_err(|e| e.to_string())?;
            let err = v
                .iter()
                .zip(out.amplitudes())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            worst = worst.max(err);
            cases += 1;
        }
    }
    ensure(worst < 1e-12, || format!("kernel vs dense unitary error {worst:e}"))?;
    Ok(format!("{cases} circuits, max error {worst:.1e}"))
}

fn partial_trace() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut min_eig = f64::INFINITY;
    for _ in 0..6 {
        let n = 8;
        let s = random_state(n, &mut rng);
        let start = rng.gen_range(0..n);
        let len = rng.gen_range(1..=(n - start).min(6));
        let sites: Vec<usize> = (start..start + len).collect();
        let rho = reduced_density_matrix(&s, &sites).map_err(|e| e.to_string())?;
        worst = worst.max((&rho - rho.adjoint()).camax());
        worst = worst.max((rho.trace() - c(1.0)).norm());
        min_eig = min_eig.min(
            rho.symmetric_eigenvalues()
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min),
        );
    }
    ensure(worst < 1e-10, || format!("hermiticity/trace error {worst:e}"))?;
    ensure(min_eig > -1e-10, || format!("negative eigenvalue {min_eig:e}"))?;
    Ok(format!("max error {worst:.1e}, min eigenvalue {min_eig:.1e}"))
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn tsne_normalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = gaussian_matrix(40, 6, &mut rng);
    let d2 = squared_distances(&x);
    let sigmas = calibrate_sigmas(&d2, 8.0).map_err(|e| e.to_string())?;
    let cond = conditional_probabilities(&d2, &sigmas);
    let row_err = (0..cond.nrows())
        .map(|i| (cond.row(i).sum() - 1.0).abs().max(cond[(i, i)].abs()))
        .fold(0.0, f64::max);
    ensure(row_err < 1e-12, || format!("conditional row error {row_err:e}"))?;
    let p = joint_probabilities(&cond);
    let sym = (&p - p.transpose()).amax();
    let p_err = (p.sum() - 1.0).abs();
    ensure(sym < 1e-15 && p_err < 1e-10, || {
        format!("P asymmetry {sym:e}, sum error {p_err:e}")
    })?;
    let y: Vec<[f64; 2]> = (0..40)
        .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal)])
        .collect();
    let q = output_probabilities(&y);
    let q_diag = (0..40).map(|i| q[(i, i)].abs()).fold(0.0, f64::max);
    let q_err = (q.sum() - 1.0).abs();
    ensure(q_err < 1e-10 && q_diag == 0.0, || {
        format!("Q sum error {q_err:e}, diagonal {q_diag:e}")
    })?;
    Ok(format!("P sum error {p_err:.1e}, Q sum error {q_err:.1e}"))
}

fn tsne_gradient() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let n = 15;
        let x = gaussian_matrix(n, 4, &mut rng);
        let d2 = squared_distances(&x);
        let sigmas = calibrate_sigmas(&d2, 4.0).map_err(|e| e.to_string())?;
        let p = joint_probabilities(&conditional_probabilities(&d2, &sigmas));
        let y: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal)])
            .collect();
        let grad = kl_gradient(&p, &y);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            for d in 0..2 {
                let mut plus = y.clone();
                plus[i][d] += h;
                let mut minus = y.clone();
                minus[i][d] -= h;
                let fd = (kl_divergence(&p, &plus) - kl_divergence(&p, &minus)) / (2.0 * h);
                num += (fd - grad[i][d]).powi(2);
                den += grad[i][d].powi(2);
            }
        }
        worst = worst.max((num / den).sqrt());
    }
    ensure(worst < 1e-4, || format!("relative gradient error {worst:e}"))?;
    Ok(format!("5 configurations, max relative error {worst:.1e}"))
}

fn em_monotone() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let centres = [[0.0, 0.0], [4.0, 1.0], [1.0, 5.0]];
    let points: Vec<[f64; 2]> = (0..150)
        .map(|i| {
            let m = centres[i % 3];
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            [m[0] + a, m[1] + 0.6 * b]
        })
        .collect();
    let mut worst_drop = 0.0f64;
    for k in 1..=4 {
        let model = gmm_fit(&points, k, 3).map_err(|e| e.to_string())?;
        for w in model.history.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
        }
    }
    ensure(worst_drop <= 1e-10, || {
        format!("log-likelihood decreased by {worst_drop:e}")
    })?;
    Ok(format!("k=1..4, largest decrease {worst_drop:.1e}"))
}

/// Runs every check; never panics on a failing check.
pub fn run_selftest() -> SelftestReport {
    SelftestReport {
        checks: vec![
            check("hamiltonian vs dense", hamiltonian_dense),
            check("lanczos vs dense diagonalization", lanczos_vs_dense),
            check("gate kernels vs dense unitaries", gates_vs_dense),
            check("reduced density matrices", partial_trace),
            check("t-SNE P/Q normalization", tsne_normalization),
            check("t-SNE gradient vs finite differences", tsne_gradient),
            check("EM log-likelihood monotone", em_monotone),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        let report = run_selftest();
        for c in &report.checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}

//! Von Neumann analysis of the uniform-stencil scheme
//!
//! ```text
//! U[j, n+1] = U[j, n-1] + ac (V[j+1, n] - V[j-1, n])
//! V[j, n+1] = V[j, n-1] + ac (U[j+1, n] - U[j-1, n])
//! ```
//!
//! written as a one-step map on `X = (U^n, V^n, U^{n-1}, V^{n-1})`. A Fourier
//! mode `e^{i j θ}` is multiplied by the amplification matrix `G(θ)` per step.
//!
//! For `|s| > 1` the square root is taken on the branch
//! `sqrt(1 - s^2) = i sqrt(s^2 - 1)`, so that the eigenvalue formulas stay
//! continuous across `|s| = 1`.

use nalgebra::Matrix4;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Largest power of `G` examined by [`spectral_sweep`].
pub const POWER_CAP: usize = 10_000;

/// Uniform bound on `‖Gⁿ‖_F` used for the stable verdict. For `|ac| ≤ 0.99`
/// the Frobenius norm of `R` times that of `R⁻¹` stays below 30.
pub const POWER_BOUND: f64 = 100.0;

/// Spectral radii within this distance of one count as unimodular.
pub const MODULUS_TOL: f64 = 1e-12;

/// `|det R|` below this makes the eigenbasis effectively defective.
pub const DET_R_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct AmplificationMatrix {
    pub theta: f64,
    /// `s = a c sin θ`.
    pub s: f64,
    pub g: Matrix4<Complex64>,
    /// `g1 = is - r`, `g2 = is + r`, `g3 = -is - r`, `g4 = -is + r` with
    /// `r = sqrt(1 - s^2)`.
    pub eigenvalues: [Complex64; 4],
    pub det_r: Complex64,
}

/// Builds `G(θ)` together with its closed-form eigenvalues and `det R`.
pub fn amplification(a: f64, c: f64, theta: f64) -> AmplificationMatrix {
    let s = a * c * theta.sin();
    let i = Complex64::i();
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let two_is = i * (2.0 * s);
    #[rustfmt::skip]
    let g = Matrix4::new(
        zero, two_is, one, zero,
        two_is, zero, zero, one,
        one, zero, zero, zero,
        zero, one, zero, zero,
    );
    let r = branch_sqrt(1.0 - s * s);
    let is = i * s;
    let eigenvalues = [is - r, is + r, -is - r, -is + r];
    let [g1, g2, g3, g4] = eigenvalues;
    let det_r = 4.0 * (g1.inv() - g2.inv()) * (g4.inv() - g3.inv());
    AmplificationMatrix { theta, s, g, eigenvalues, det_r }
}

fn branch_sqrt(v: f64) -> Complex64 {
    if v >= 0.0 {
        Complex64::new(v.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, (-v).sqrt())
    }
}

impl AmplificationMatrix {
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().map(|g| g.norm()).fold(0.0, f64::max)
    }

    /// Eigenvector matrix with columns `(1, ±1, 1/g, ±1/g)`.
    pub fn eigenvectors(&self) -> Matrix4<Complex64> {
        let one = Complex64::new(1.0, 0.0);
        let mut r = Matrix4::zeros();
        for (col, g) in self.eigenvalues.iter().enumerate() {
            let sign = if col < 2 { 1.0 } else { -1.0 };
            let gi = g.inv();
            r[(0, col)] = one;
            r[(1, col)] = one * sign;
            r[(2, col)] = gi;
            r[(3, col)] = gi * sign;
        }
        r
    }

    /// `R Λ R⁻¹`, or `None` when `R` is singular.
    pub fn reconstruct(&self) -> Option<Matrix4<Complex64>> {
        let r = self.eigenvectors();
        let lambda = Matrix4::from_diagonal(&nalgebra::Vector4::from(self.eigenvalues));
        r.try_inverse().map(|ri| r * lambda * ri)
    }

    /// `‖R‖_F ‖R⁻¹‖_F`, an upper bound for every `‖Gⁿ‖_2` when `|s| < 1`.
    pub fn condition_bound(&self) -> f64 {
        let r = self.eigenvectors();
        match r.try_inverse() {
            Some(ri) => r.norm() * ri.norm(),
            None => f64::INFINITY,
        }
    }

    /// Largest `‖Gⁿ‖_F` for `1 ≤ n ≤ cap`. Stops early once the norm passes
    /// `stop_above`, returning the value reached.
    pub fn max_power_norm(&self, cap: usize, stop_above: f64) -> f64 {
        let mut p = self.g;
        let mut best = p.norm();
        for _ in 1..cap {
            p = self.g * p;
            let n = p.norm();
            best = best.max(n);
            if !(best <= stop_above) {
                break;
            }
        }
        best
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    /// Unimodular spectrum but powers not uniformly bounded, or `R`
    /// degenerate somewhere on the sweep.
    Marginal,
    Unstable,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub theta: f64,
    pub spectral_radius: f64,
    pub max_power_norm: f64,
    pub det_r_abs: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub ac: f64,
    pub power_cap: usize,
    pub rows: Vec<SweepRow>,
    pub max_spectral_radius: f64,
    pub max_power_norm: f64,
    pub min_det_r: f64,
    /// Angle of the smallest `|det R|`.
    pub theta_min_det_r: f64,
    pub verdict: Verdict,
}

/// Sweeps `θ_i = -π + 2π i / n_theta`, `i = 0..n_theta` (at least 8 angles),
/// with powers up to [`POWER_CAP`].
pub fn spectral_sweep(a: f64, c: f64, n_theta: usize) -> SweepReport {
    spectral_sweep_with_cap(a, c, n_theta, POWER_CAP)
}

pub fn spectral_sweep_with_cap(a: f64, c: f64, n_theta: usize, cap: usize) -> SweepReport {
    let n_theta = n_theta.max(8);
    let stop = POWER_BOUND * 1e6;
    let rows: Vec<SweepRow> = (0..n_theta)
        .map(|i| {
            let theta = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / n_theta as f64;
            let m = amplification(a, c, theta);
            SweepRow {
                theta,
                spectral_radius: m.spectral_radius(),
                max_power_norm: m.max_power_norm(cap.max(1), stop),
                det_r_abs: m.det_r.norm(),
            }
        })
        .collect();
    let max_spectral_radius = rows.iter().map(|r| r.spectral_radius).fold(0.0, f64::max);
    let max_power_norm = rows.iter().map(|r| r.max_power_norm).fold(0.0, f64::max);
    let (theta_min_det_r, min_det_r) = rows
        .iter()
        .map(|r| (r.theta, r.det_r_abs))
        .fold((0.0, f64::INFINITY), |acc, v| if v.1 < acc.1 { v } else { acc });
    let verdict = if max_spectral_radius > 1.0 + MODULUS_TOL {
        Verdict::Unstable
    } else if max_power_norm > POWER_BOUND || min_det_r < DET_R_FLOOR {
        Verdict::Marginal
    } else {
        Verdict::Stable
    };
    SweepReport {
        ac: a * c,
        power_cap: cap,
        rows,
        max_spectral_radius,
        max_power_norm,
        min_det_r,
        theta_min_det_r,
        verdict,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BlowupReport {
    pub ac: f64,
    pub n_points: usize,
    pub steps: usize,
    /// `max|X^n| / max|X^0|` over the run.
    pub growth: f64,
    pub log10_growth: f64,
    /// Largest closed-form `|g|` over the resolved frequencies.
    pub predicted_rate: f64,
}

/// Runs the uniform stencil on a periodic lattice of `n_points` nodes with
/// random data on the first two levels and records the max-norm growth.
pub fn empirical_blowup(ac: f64, n_points: usize, n_steps: usize, seed: u64) -> BlowupReport {
    let n = n_points.max(3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect::<Vec<f64>>();
    let levels = [draw(), draw(), draw(), draw()];
    leapfrog_growth(ac, levels, n_steps)
}

/// Max-norm growth of the periodic uniform stencil from the given levels
/// `[U^{-1}, V^{-1}, U^0, V^0]` (equal lengths, at least 3). The state is
/// rescaled whenever it gets large, so the growth is tracked in
/// logarithmic form and never overflows.
pub fn leapfrog_growth(ac: f64, levels: [Vec<f64>; 4], n_steps: usize) -> BlowupReport {
    let [mut u_old, mut v_old, mut u, mut v] = levels;
    let n = u.len();
    assert!(n >= 3 && [&u_old, &v_old, &v].iter().all(|w| w.len() == n), "levels must share a length of at least 3");
    let reference = max_abs(&[&u, &v, &u_old, &v_old]);
    let predicted_rate = (0..n)
        .map(|j| amplification(ac, 1.0, 2.0 * std::f64::consts::PI * j as f64 / n as f64).spectral_radius())
        .fold(0.0, f64::max);
    let mut log_scale = 0.0f64;
    let mut best_log = 0.0f64;
    if reference == 0.0 {
        return BlowupReport { ac, n_points: n, steps: n_steps, growth: 0.0, log10_growth: f64::NEG_INFINITY, predicted_rate };
    }
    let mut un = vec![0.0; n];
    let mut vn = vec![0.0; n];
    for _ in 0..n_steps {
        for j in 0..n {
            let jp = (j + 1) % n;
            let jm = (j + n - 1) % n;
            un[j] = u_old[j] + ac * (v[jp] - v[jm]);
            vn[j] = v_old[j] + ac * (u[jp] - u[jm]);
        }
        std::mem::swap(&mut u_old, &mut u);
        std::mem::swap(&mut v_old, &mut v);
        std::mem::swap(&mut u, &mut un);
        std::mem::swap(&mut v, &mut vn);
        let m = max_abs(&[&u, &v]);
        if m > 0.0 {
            best_log = best_log.max(log_scale + (m / reference).log10());
        }
        if m > 1e100 {
            for w in [&mut u, &mut v, &mut u_old, &mut v_old] {
                w.iter_mut().for_each(|x| *x /= m);
            }
            log_scale += m.log10();
        }
    }
    BlowupReport {
        ac,
        n_points: n,
        steps: n_steps,
        growth: 10f64.powf(best_log),
        log10_growth: best_log,
        predicted_rate,
    }
}

fn max_abs(vs: &[&Vec<f64>]) -> f64 {
    vs.iter().flat_map(|v| v.iter()).fold(0.0, |m, x| m.max(x.abs()))
}

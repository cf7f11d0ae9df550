//! Exact wave functions of the driven oscillator
//!
//! ```text
//! ψₙ(q,t) = e^{iαₙ} (2ⁿn!)^{-1/2} (ω_I/πg₋)^{1/4}
//!           · exp(−i g₀q²/2g₋ − iΔ_p q − ω_I(q+Δ_q)²/2g₋) · Hₙ(√(ω_I/g₋)(q+Δ_q))
//! ```
//!
//! with `Δ_q = √(2g₋/ω_I) β_R` and `Δ_p = √(2ω_I/g₋) β_I`. The phase gauge is
//! fixed by `αₙ(t₀) = 0`.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;

use crate::driving::DriveState;
use crate::error::{Error, Result};
use crate::fd::{self, QuadraticOperator};

pub const MAX_N: usize = 64;
/// Default number of grid points.
pub const DEFAULT_POINTS: usize = 2048;
/// Minimum number of grid points per packet width `√(g₋/ω_I)`.
pub const MIN_POINTS_PER_SIGMA: f64 = 16.0;

/// Physicists' Hermite polynomial by the three-term recurrence.
pub fn hermite(n: usize, x: f64) -> Result<f64> {
    if n > MAX_N {
        return Err(Error::WaveFunction(format!("n = {n} exceeds the supported maximum {MAX_N}")));
    }
    Ok(hermite_unchecked(n, x))
}

fn hermite_unchecked(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..n {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `ln(2ⁿ n!)`.
fn log_norm(n: usize) -> f64 {
    n as f64 * 2f64.ln() + (1..=n).map(|k| (k as f64).ln()).sum::<f64>()
}

/// `αₙ(t) = −(n+½)Θ(t) + ∫_{t₀}^{t} [(β_R² − β_I²) ω_I/(Mg₋) − √(2ω_I/g₋) G β_I]`.
pub fn alpha_phase(n: usize, ds: &DriveState, t: f64) -> Result<f64> {
    let inv = ds.invariant();
    Ok(-(n as f64 + 0.5) * inv.theta(t)? + ds.phase_integral(t)?)
}

/// Instantaneous packet parameters shared by every grid point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PacketShape {
    pub g_minus: f64,
    pub g_zero: f64,
    pub omega_i: f64,
    pub delta_q: f64,
    pub delta_p: f64,
}

impl PacketShape {
    pub fn at(ds: &DriveState, t: f64) -> Result<Self> {
        let inv = ds.invariant();
        let g = inv.g(t);
        let wi = inv.omega_i();
        let beta = ds.beta(t)?;
        Ok(Self {
            g_minus: g.g_minus,
            g_zero: g.g_zero,
            omega_i: wi,
            delta_q: (2.0 * g.g_minus / wi).sqrt() * beta.re,
            delta_p: (2.0 * wi / g.g_minus).sqrt() * beta.im,
        })
    }

    /// Width `√(g₋/ω_I)`.
    pub fn sigma(&self) -> f64 {
        (self.g_minus / self.omega_i).sqrt()
    }

    /// Packet centre `−Δ_q`.
    pub fn center(&self) -> f64 {
        -self.delta_q
    }

    /// Eigenfunction `φₙ` of the invariant (no dynamical phase) at `q`.
    pub fn phi(&self, n: usize, q: f64) -> Complex64 {
        let scale = (self.omega_i / self.g_minus).sqrt();
        let x = scale * (q + self.delta_q);
        let log_pref = -0.5 * log_norm(n) + 0.25 * (self.omega_i / (PI * self.g_minus)).ln();
        let amplitude = (log_pref - 0.5 * x * x).exp() * hermite_unchecked(n, x);
        let phase = -self.g_zero / (2.0 * self.g_minus) * q * q - self.delta_p * q;
        Complex64::from_polar(amplitude, phase)
    }
}

/// `2048` points over `[−Δ_q − Lσ, −Δ_q + Lσ]` with `L = max(8, √(2n+1) + 6)`.
pub fn default_grid(ds: &DriveState, n: usize, t: f64) -> Result<Vec<f64>> {
    let shape = PacketShape::at(ds, t)?;
    Ok(centered_grid(&shape, n, DEFAULT_POINTS, 8.0))
}

/// Uniform grid around the packet centre spanning `±max(half_width, √(2n+1)+6)`
/// widths.
pub fn centered_grid(shape: &PacketShape, n: usize, points: usize, half_width: f64) -> Vec<f64> {
    let l = half_width.max((2.0 * n as f64 + 1.0).sqrt() + 6.0) * shape.sigma();
    let c = shape.center();
    crate::linspace(c - l, c + l, points).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct WaveFunctionSample {
    pub n: usize,
    pub t: f64,
    pub grid: Vec<f64>,
    pub psi: Vec<Complex64>,
    pub alpha_n: f64,
    pub delta_q: f64,
    pub delta_p: f64,
}

impl WaveFunctionSample {
    pub fn spacing(&self) -> Result<f64> {
        fd::uniform_spacing(&self.grid)
    }

    /// Trapezoidal `∫|ψ|² dq`.
    pub fn norm_sq(&self) -> f64 {
        let mut acc = 0.0;
        for k in 1..self.grid.len() {
            acc += 0.5 * (self.grid[k] - self.grid[k - 1]) * (self.psi[k].norm_sqr() + self.psi[k - 1].norm_sqr());
        }
        acc
    }

    /// Largest `|ψ|` at the two ends of the grid.
    pub fn edge_amplitude(&self) -> f64 {
        self.psi[0].norm().max(self.psi[self.psi.len() - 1].norm())
    }

    /// Write `q, re_psi, im_psi, abs_psi_sq` with a comment header carrying
    /// `n`, `t` and the scenario id.
    pub fn write_csv(&self, path: &Path, scenario: &str) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        use std::io::Write;
        writeln!(file, "# scenario={scenario} n={} t={:.17e}", self.n, self.t)?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(["q", "re_psi", "im_psi", "abs_psi_sq"])?;
        for (q, p) in self.grid.iter().zip(&self.psi) {
            w.write_record([q, &p.re, &p.im, &p.norm_sqr()].iter().map(|x| format!("{x:.17e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_grid(n: usize, grid: &[f64], shape: &PacketShape) -> Result<()> {
    if n > MAX_N {
        return Err(Error::WaveFunction(format!("n = {n} exceeds the supported maximum {MAX_N}")));
    }
    if grid.len() < 6 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::WaveFunction("grid must hold at least 6 strictly increasing points".into()));
    }
    let widest = grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let per_sigma = shape.sigma() / widest;
    if per_sigma < MIN_POINTS_PER_SIGMA {
        return Err(Error::WaveFunction(format!(
            "grid resolves the packet width {} with only {per_sigma:.1} points (need {MIN_POINTS_PER_SIGMA})",
            shape.sigma()
        )));
    }
    Ok(())
}

/// Invariant eigenfunction `φₙ(q,t)` on `grid`.
pub fn eval_phi(n: usize, ds: &DriveState, t: f64, grid: &[f64]) -> Result<Vec<Complex64>> {
    let shape = PacketShape::at(ds, t)?;
    check_grid(n, grid, &shape)?;
    Ok(grid.iter().map(|&q| shape.phi(n, q)).collect())
}

/// Schrödinger wave function `ψₙ(q,t) = e^{iαₙ(t)} φₙ(q,t)` on `grid`.
pub fn eval_psi(n: usize, ds: &DriveState, t: f64, grid: &[f64]) -> Result<WaveFunctionSample> {
    let shape = PacketShape::at(ds, t)?;
    check_grid(n, grid, &shape)?;
    let alpha_n = alpha_phase(n, ds, t)?;
    let phase = Complex64::from_polar(1.0, alpha_n);
    Ok(WaveFunctionSample {
        n,
        t,
        grid: grid.to_vec(),
        psi: grid.iter().map(|&q| phase * shape.phi(n, q)).collect(),
        alpha_n,
        delta_q: shape.delta_q,
        delta_p: shape.delta_p,
    })
}

/// The full invariant `I_T` at `t` as a differential operator.
pub fn invariant_operator(ds: &DriveState, t: f64) -> Result<QuadraticOperator> {
    let g = ds.invariant().g(t);
    let l = ds.linear(t)?;
    Ok(QuadraticOperator { p2: g.g_minus, pq: g.g_zero, q2: g.g_plus, q: l.g1, p: l.g2, constant: l.g3 })
}

/// `‖I_T φₙ − ω_I(n+½) φₙ‖ / ‖φₙ‖` with fourth-order finite differences.
pub fn eigen_residual(n: usize, ds: &DriveState, t: f64, grid: &[f64]) -> Result<f64> {
    let h = fd::uniform_spacing(grid)?;
    let phi = eval_phi(n, ds, t, grid)?;
    eigen_residual_of(&phi, n, ds, t, grid, h)
}

fn eigen_residual_of(phi: &[Complex64], n: usize, ds: &DriveState, t: f64, grid: &[f64], h: f64) -> Result<f64> {
    let applied = invariant_operator(ds, t)?.apply(grid, phi, h);
    let e = ds.invariant().omega_i() * (n as f64 + 0.5);
    let diff: Vec<Complex64> = applied.iter().zip(phi).map(|(a, p)| a - p * e).collect();
    Ok((fd::norm_sq(&diff, h) / fd::norm_sq(phi, h)).sqrt())
}

/// Residual of an arbitrary sample (e.g. one multiplied by a constant phase).
pub fn eigen_residual_of_sample(phi: &[Complex64], n: usize, ds: &DriveState, t: f64, grid: &[f64]) -> Result<f64> {
    let h = fd::uniform_spacing(grid)?;
    eigen_residual_of(phi, n, ds, t, grid, h)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub mean_q: f64,
    pub var_q: f64,
    pub mean_p: f64,
    pub var_p: f64,
}

/// Grid moments of a sample; `p` moments use `p = −i∂_q` by finite differences.
pub fn moments(sample: &WaveFunctionSample) -> Result<Moments> {
    let h = sample.spacing()?;
    let norm = fd::norm_sq(&sample.psi, h);
    if (norm - 1.0).abs() > 1e-3 {
        return Err(Error::WaveFunction(format!("sample is not normalized: ‖ψ‖² = {norm}")));
    }
    let psi = &sample.psi;
    let weight = |f: &dyn Fn(usize) -> f64| -> f64 {
        let n = psi.len();
        let s: f64 = (0..n).map(|k| psi[k].norm_sqr() * f(k)).sum();
        (s - 0.5 * (psi[0].norm_sqr() * f(0) + psi[n - 1].norm_sqr() * f(n - 1))) * h / norm
    };
    let mean_q = weight(&|k| sample.grid[k]);
    let var_q = weight(&|k| (sample.grid[k] - mean_q).powi(2));
    // A fast carrier e^{ip̄q} costs the difference stencil accuracy, so the
    // mean momentum found on a first pass is stripped before the second.
    let (carrier, _) = momentum_moments(psi, &sample.grid, h, norm, 0.0);
    let (shift, var_p) = momentum_moments(psi, &sample.grid, h, norm, carrier);
    Ok(Moments { mean_q, var_q, mean_p: carrier + shift, var_p })
}

/// `⟨p⟩` and `var p` of `e^{−ik q}ψ`.
fn momentum_moments(psi: &[Complex64], grid: &[f64], h: f64, norm: f64, k: f64) -> (f64, f64) {
    let shifted: Vec<Complex64> = psi.iter().zip(grid).map(|(z, &q)| z * Complex64::from_polar(1.0, -k * q)).collect();
    let p_psi: Vec<Complex64> = fd::d1(&shifted, h).iter().map(|d| -Complex64::i() * d).collect();
    let mean_p = fd::inner(&shifted, &p_psi, h).re / norm;
    let p2 = fd::norm_sq(&p_psi, h) / norm;
    (mean_p, p2 - mean_p * mean_p)
}

/// Closed-form widths `var_q = (2n+1)g₋/2ω_I`, `var_p = (2n+1)(ω_I/2g₋)(1 + g₀²/ω_I²)`.
pub fn predicted_variances(n: usize, shape: &PacketShape) -> (f64, f64) {
    let k = 2.0 * n as f64 + 1.0;
    let w = shape.omega_i;
    (k * shape.g_minus / (2.0 * w), k * w / (2.0 * shape.g_minus) * (1.0 + shape.g_zero.powi(2) / (w * w)))
}

/// `‖i∂_tψₙ − H_Tψₙ‖/‖ψₙ‖` at `t` on a fixed grid. `∂_t` is a Richardson
/// extrapolated central difference (one-sided fourth-order near the window
/// ends) with step `dt`.
pub fn schrodinger_residual(n: usize, ds: &DriveState, t: f64, grid: &[f64], dt: Option<f64>) -> Result<f64> {
    let h = fd::uniform_spacing(grid)?;
    let (a, b) = ds.window();
    let inv = ds.invariant();
    let dt = dt.unwrap_or_else(|| {
        let rate = inv.theta_rate(t).abs().max(ds.schedule().omega_sq(t).abs().sqrt());
        1e-3 / rate
    });
    let psi_at = |s: f64| -> Result<Vec<Complex64>> { Ok(eval_psi(n, ds, s, grid)?.psi) };
    let psi = psi_at(t)?;
    let dpsi: Vec<Complex64> = if t - dt >= a && t + dt <= b {
        let (p1, m1) = (psi_at(t + dt)?, psi_at(t - dt)?);
        let (p2, m2) = (psi_at(t + 0.5 * dt)?, psi_at(t - 0.5 * dt)?);
        (0..psi.len())
            .map(|k| {
                let coarse = (p1[k] - m1[k]) / (2.0 * dt);
                let fine = (p2[k] - m2[k]) / dt;
                (fine * 4.0 - coarse) / 3.0
            })
            .collect()
    } else {
        let dir = if t - dt < a { 1.0 } else { -1.0 };
        let s: Vec<Vec<Complex64>> = (1..=4).map(|j| psi_at(t + dir * j as f64 * dt)).collect::<Result<_>>()?;
        (0..psi.len())
            .map(|k| {
                (psi[k] * -25.0 + s[0][k] * 48.0 - s[1][k] * 36.0 + s[2][k] * 16.0 - s[3][k] * 3.0) * (dir / (12.0 * dt))
            })
            .collect()
    };
    let hpsi = QuadraticOperator::hamiltonian(ds.schedule(), t).apply(grid, &psi, h);
    let diff: Vec<Complex64> = dpsi.iter().zip(&hpsi).map(|(d, hp)| Complex64::i() * d - hp).collect();
    Ok((fd::norm_sq(&diff, h) / fd::norm_sq(&psi, h)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{solve_classical, CConstants, InitialData};
    use crate::driving::{solve_beta, Beta0};
    use crate::invariant::build_invariant;
    use crate::schedule::{make_preset, Constants, ParameterSchedule, Preset};

    fn consts(pairs: &[(&str, f64)]) -> Constants {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn drive(s: &ParameterSchedule, window: (f64, f64), beta0: Beta0) -> DriveState {
        let b = solve_classical(s, window, InitialData::default(), 1e-11).unwrap();
        let inv = build_invariant(&b, CConstants::default_for(&b)).unwrap();
        solve_beta(&inv, s, beta0).unwrap()
    }

    #[test]
    fn hermite_values() {
        assert_eq!(hermite(0, 3.7).unwrap(), 1.0);
        assert_eq!(hermite(3, 1.0).unwrap(), -4.0);
        assert_eq!(hermite(2, 0.0).unwrap(), -2.0);
        for x in [-1.3f64, 0.4, 2.2] {
            let direct = 16.0 * x.powi(4) - 48.0 * x * x + 12.0;
            assert!((hermite(4, x).unwrap() - direct).abs() < 1e-12 * direct.abs().max(1.0));
        }
        assert!(hermite(65, 0.0).is_err());
    }

    #[test]
    fn undriven_ground_state_is_textbook() {
        let (m, w) = (1.7, 1.3);
        let s = ParameterSchedule::constant(m, w * w);
        let ds = drive(&s, (0.0, 3.0), Beta0::Zero);
        let grid = default_grid(&ds, 0, 1.2).unwrap();
        let sample = eval_psi(0, &ds, 1.2, &grid).unwrap();
        for (q, p) in grid.iter().zip(&sample.psi).step_by(97) {
            let exact = (m * w / PI).powf(0.25) * (-m * w * q * q / 2.0).exp();
            assert!((p.norm() - exact).abs() < 1e-12);
        }
        assert!((sample.alpha_n + 0.5 * w * 1.2).abs() < 1e-9);
        assert!((sample.norm_sq() - 1.0).abs() < 1e-10);
        assert!(sample.edge_amplitude() < 1e-10);
        let mo = moments(&sample).unwrap();
        assert!((mo.var_q - 1.0 / (2.0 * m * w)).abs() < 1e-8);
        assert!((mo.var_p - m * w / 2.0).abs() < 1e-6);
    }

    #[test]
    fn example_a_ground_state_is_shifted() {
        let (m, w0, f0) = (1.0, 1.0, 0.5);
        let s = make_preset(Preset::A, &consts(&[("m", m), ("omega0", w0), ("F0", f0)])).unwrap();
        let ds = drive(&s, (0.0, 2.0 * PI), Beta0::Comoving);
        let shape = PacketShape::at(&ds, 2.0).unwrap();
        assert!((shape.center() - f0 / (m * w0 * w0)).abs() < 1e-10);
        for n in [0, 2] {
            let alpha = alpha_phase(n, &ds, 2.0).unwrap();
            let expected = -(n as f64 + 0.5) * w0 * 2.0 + f0 * f0 / (2.0 * m * w0 * w0) * 2.0;
            assert!((alpha - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn normalization_and_orthogonality_example_b() {
        let s = make_preset(Preset::B, &consts(&[("m", 1.0), ("omega", 2.0), ("gamma", 0.1), ("f0", 0.4), ("omega_f", 1.3)])).unwrap();
        let ds = drive(&s, (0.0, 5.0), Beta0::Value(Complex64::new(0.3, 0.2)));
        let t = 1.0;
        let grid = default_grid(&ds, 10, t).unwrap();
        let h = fd::uniform_spacing(&grid).unwrap();
        let states: Vec<_> = (0..=10).map(|n| eval_psi(n, &ds, t, &grid).unwrap()).collect();
        for a in &states {
            assert!((a.norm_sq() - 1.0).abs() < 1e-6);
            for b in &states {
                if a.n != b.n {
                    assert!(fd::inner(&a.psi, &b.psi, h).norm() < 1e-6);
                }
            }
        }
        let mo = moments(&states[1]).unwrap();
        assert!((mo.mean_q + states[1].delta_q).abs() < 1e-6);
    }

    #[test]
    fn eigen_residual_is_small_and_gauge_invariant() {
        let s = make_preset(Preset::C, &consts(&[("m", 1.0), ("omega", 3.0), ("F0", 0.7), ("omega_e", 2.0)])).unwrap();
        let ds = drive(&s, (0.0, 4.0), Beta0::Value(Complex64::new(0.1, 0.2)));
        for n in [0, 3] {
            let grid = default_grid(&ds, n, 1.7).unwrap();
            let r = eigen_residual(n, &ds, 1.7, &grid).unwrap();
            assert!(r < 1e-5, "n={n}: {r}");
            let phi = eval_phi(n, &ds, 1.7, &grid).unwrap();
            let rotated: Vec<Complex64> = phi.iter().map(|p| p * Complex64::from_polar(1.0, 0.77)).collect();
            let r2 = eigen_residual_of_sample(&rotated, n, &ds, 1.7, &grid).unwrap();
            assert!((r - r2).abs() < 1e-9);
        }
    }

    #[test]
    fn schrodinger_residual_example_d() {
        let c = consts(&[("m0", 1.0), ("Omega", 1.0), ("gamma", 0.05), ("mu", 0.3), ("nu", 1.5), ("F0", 0.3), ("omega_f", 0.8)]);
        let s = make_preset(Preset::D, &c).unwrap();
        let ds = drive(&s, (0.0, 6.0), Beta0::Value(Complex64::new(0.2, -0.1)));
        for (n, t) in [(0, 0.0), (1, 2.3), (3, 6.0)] {
            let grid = default_grid(&ds, n, t).unwrap();
            let r = schrodinger_residual(n, &ds, t, &grid, None).unwrap();
            assert!(r < 1e-4, "n={n} t={t}: {r}");
        }
    }

    #[test]
    fn schrodinger_residual_with_cross_term_and_momentum_drive() {
        use crate::schedule::{Analytic, Constant};
        use std::sync::Arc;
        let mut s = ParameterSchedule::constant(1.0, 2.0);
        s.mass = Arc::new(Analytic::new(
            "1 + 0.2 sin 2t",
            |t: f64| 1.0 + 0.2 * (2.0 * t).sin(),
            |t: f64| 0.4 * (2.0 * t).cos(),
            |t: f64| -0.8 * (2.0 * t).sin(),
        ));
        s.cross = Arc::new(Analytic::new("0.3 cos t", |t: f64| 0.3 * t.cos(), |t: f64| -0.3 * t.sin(), |t: f64| -0.3 * t.cos()));
        s.force = Arc::new(Analytic::new("0.4 sin 1.5t", |t: f64| 0.4 * (1.5 * t).sin(), |t: f64| 0.6 * (1.5 * t).cos(), |t: f64| -0.9 * (1.5 * t).sin()));
        s.momentum_drive = Arc::new(Constant(0.25));
        let ds = drive(&s, (0.0, 5.0), Beta0::Value(Complex64::new(0.1, 0.3)));
        for (n, t) in [(0, 0.9), (2, 3.1), (1, 5.0)] {
            let grid = default_grid(&ds, n, t).unwrap();
            let r = schrodinger_residual(n, &ds, t, &grid, None).unwrap();
            assert!(r < 1e-4, "n={n} t={t}: {r}");
            assert!(eigen_residual(n, &ds, t, &grid).unwrap() < 1e-5);
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        let s = ParameterSchedule::constant(1.0, 1.0);
        let ds = drive(&s, (0.0, 1.0), Beta0::Zero);
        let grid: Vec<f64> = crate::linspace(-8.0, 8.0, 100).collect();
        assert!(matches!(eval_psi(0, &ds, 0.5, &grid), Err(Error::WaveFunction(_))));
        assert!(eval_psi(65, &ds, 0.5, &default_grid(&ds, 0, 0.5).unwrap()).is_err());
    }
}

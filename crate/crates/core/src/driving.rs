//! Linear drives: the kernel `W(t)`, the displacement `β(t)` and the linear
//! coefficients `g₁, g₂, g₃` of the full invariant.
//!
//! `β` obeys `β̇ + iκβ = −W` with `κ = ω_I/(M g₋)`. It is integrated as an ODE
//! together with the drive part of the wave-function phase,
//! `∫ [(β_R² − β_I²) κ − √(2ω_I/g₋) G β_I] dt`.

use std::path::Path;

use num_complex::Complex64;

use crate::classical::CHECK_POINTS;
use crate::error::{Error, Result};
use crate::invariant::InvariantCoefficients;
use crate::linspace;
use crate::ode::{self, DenseSolution, OdeOptions};
use crate::quadrature::{integrate, QuadOptions};
use crate::schedule::ParameterSchedule;

/// Points used to compare the ODE and quadrature forms of `β`.
pub const QUADRATURE_CHECK_POINTS: usize = 64;

const MIN_STEPS: usize = 1024;

/// Choice of the integration constant `β(t₀)`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum Beta0 {
    #[default]
    Zero,
    /// The stationary value `iW(t₀)/κ(t₀)`; for a constant drive on a
    /// constant oscillator it makes `β` constant.
    Comoving,
    Value(Complex64),
}

/// `W = −(√(ω_I/2g₋) + i g₀/√(2ω_I g₋)) G + i √(g₋/2ω_I) F`.
pub fn drive_kernel(inv: &InvariantCoefficients, sched: &ParameterSchedule, t: f64) -> Result<Complex64> {
    inv.ensure_contains(t)?;
    Ok(kernel(inv, sched, t))
}

fn kernel(inv: &InvariantCoefficients, sched: &ParameterSchedule, t: f64) -> Complex64 {
    let g = inv.g(t);
    let wi = inv.omega_i();
    let a = Complex64::new((wi / (2.0 * g.g_minus)).sqrt(), g.g_zero / (2.0 * wi * g.g_minus).sqrt());
    -a * sched.g(t) + Complex64::new(0.0, (g.g_minus / (2.0 * wi)).sqrt() * sched.f(t))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearCoefficients {
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
}

#[derive(Clone, Debug)]
pub struct DriveState {
    inv: InvariantCoefficients,
    sched: ParameterSchedule,
    beta0: Complex64,
    solution: DenseSolution,
}

/// Solve for `β` over the invariant's window.
pub fn solve_beta(inv: &InvariantCoefficients, sched: &ParameterSchedule, beta0: Beta0) -> Result<DriveState> {
    let (a, b) = inv.window();
    let beta0 = match beta0 {
        Beta0::Zero => Complex64::new(0.0, 0.0),
        Beta0::Comoving => Complex64::i() * kernel(inv, sched, a) / inv.theta_rate(a),
        Beta0::Value(v) => v,
    };
    if !beta0.re.is_finite() || !beta0.im.is_finite() {
        return Err(Error::InvalidParameter { name: "beta0".into(), reason: format!("{beta0} is not finite") });
    }
    let wi = inv.omega_i();
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let kappa = inv.theta_rate(t);
        let beta = Complex64::new(y[0], y[1]);
        let d = -Complex64::i() * kappa * beta - kernel(inv, sched, t);
        dy[0] = d.re;
        dy[1] = d.im;
        let gm = inv.g_minus(t);
        dy[2] = (beta.re * beta.re - beta.im * beta.im) * kappa - (2.0 * wi / gm).sqrt() * sched.g(t) * beta.im;
    };
    let opts = OdeOptions { rtol: 1e-12, atol: 1e-13, h_max: Some((b - a) / MIN_STEPS as f64), ..OdeOptions::default() };
    let solution = ode::solve(rhs, a, b, &[beta0.re, beta0.im, 0.0], &opts)?;
    Ok(DriveState { inv: inv.clone(), sched: sched.clone(), beta0, solution })
}

impl DriveState {
    pub fn beta0(&self) -> Complex64 {
        self.beta0
    }

    pub fn invariant(&self) -> &InvariantCoefficients {
        &self.inv
    }

    pub fn schedule(&self) -> &ParameterSchedule {
        &self.sched
    }

    pub fn window(&self) -> (f64, f64) {
        self.inv.window()
    }

    pub fn beta(&self, t: f64) -> Result<Complex64> {
        self.inv.ensure_contains(t)?;
        Ok(self.beta_unchecked(t))
    }

    fn beta_unchecked(&self, t: f64) -> Complex64 {
        let mut y = [0.0; 3];
        self.solution.eval_into(t, &mut y);
        Complex64::new(y[0], y[1])
    }

    pub fn w(&self, t: f64) -> Result<Complex64> {
        drive_kernel(&self.inv, &self.sched, t)
    }

    /// Drive part of the phase, `∫_{t₀}^{t} [(β_R² − β_I²) κ − √(2ω_I/g₋) G β_I]`.
    pub fn phase_integral(&self, t: f64) -> Result<f64> {
        self.inv.ensure_contains(t)?;
        let mut y = [0.0; 3];
        self.solution.eval_into(t, &mut y);
        Ok(y[2])
    }

    pub fn linear(&self, t: f64) -> Result<LinearCoefficients> {
        let beta = self.beta(t)?;
        Ok(linear_from_beta(&self.inv, t, beta))
    }

    /// Largest `|β̇ + iκβ + W| / (1 + |β|)` on the check grid, with `β̇` from
    /// the dense interpolant.
    pub fn beta_residual(&self) -> f64 {
        let (a, b) = self.window();
        let mut y = [0.0; 3];
        let mut dy = [0.0; 3];
        linspace(a, b, CHECK_POINTS)
            .map(|t| {
                self.solution.eval_into(t, &mut y);
                self.solution.eval_derivative_into(t, &mut dy);
                let beta = Complex64::new(y[0], y[1]);
                let r = Complex64::new(dy[0], dy[1])
                    + Complex64::i() * self.inv.theta_rate(t) * beta
                    + kernel(&self.inv, &self.sched, t);
                r.norm() / (1.0 + beta.norm())
            })
            .fold(0.0, f64::max)
    }

    /// `β(t) = e^{−iΘ}(β₀ − ∫ W e^{iΘ})` by adaptive quadrature at `n`
    /// uniformly spaced times. Returns `(t, β)` pairs.
    pub fn beta_by_quadrature(&self, n: usize) -> Result<Vec<(f64, Complex64)>> {
        let (a, b) = self.window();
        let opts = QuadOptions { abs_tol: 1e-12, rel_tol: 1e-12, max_intervals: 20_000 };
        let integrand = |t: f64| kernel(&self.inv, &self.sched, t) * Complex64::from_polar(1.0, self.inv.theta(t).unwrap_or(f64::NAN));
        let mut acc = Complex64::new(0.0, 0.0);
        let mut prev = a;
        let mut out = Vec::with_capacity(n);
        for t in linspace(a, b, n.max(2)) {
            acc += integrate(integrand, prev, t, &opts)?.value;
            prev = t;
            let theta = self.inv.theta(t)?;
            out.push((t, Complex64::from_polar(1.0, -theta) * (self.beta0 - acc)));
        }
        Ok(out)
    }

    /// Largest `|β_ode − β_quadrature|` over [`QUADRATURE_CHECK_POINTS`] times.
    pub fn quadrature_deviation(&self) -> Result<f64> {
        Ok(self
            .beta_by_quadrature(QUADRATURE_CHECK_POINTS)?
            .into_iter()
            .map(|(t, q)| (self.beta_unchecked(t) - q).norm())
            .fold(0.0, f64::max))
    }

    /// Write `t, re_beta, im_beta, g1, g2, g3`.
    pub fn write_csv(&self, path: &Path, n_points: usize) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "re_beta", "im_beta", "g1", "g2", "g3"])?;
        let (a, b) = self.window();
        for t in linspace(a, b, n_points.max(2)) {
            let beta = self.beta(t)?;
            let l = self.linear(t)?;
            let row = [t, beta.re, beta.im, l.g1, l.g2, l.g3];
            w.write_record(row.iter().map(|x| format!("{x:.17e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Closed forms
/// `g₁ = ω_I β_R √(2ω_I/g₋) + ω_I β_I √(2g₋/ω_I) g₀/g₋`,
/// `g₂ = ω_I β_I √(2g₋/ω_I)`, `g₃ = ω_I |β|²`.
pub fn linear_from_beta(inv: &InvariantCoefficients, t: f64, beta: Complex64) -> LinearCoefficients {
    let g = inv.g(t);
    let wi = inv.omega_i();
    let g2 = wi * beta.im * (2.0 * g.g_minus / wi).sqrt();
    let g1 = wi * beta.re * (2.0 * wi / g.g_minus).sqrt() + g2 * g.g_zero / g.g_minus;
    LinearCoefficients { g1, g2, g3: wi * beta.norm_sqr() }
}

/// Integrate
///
/// ```text
/// ġ₁ = −Yg₁ + Mω²g₂ + (Gg₊ − Fg₀)
/// ġ₂ = −g₁/M + Yg₂ − (Fg₋ − Gg₀)
/// ġ₃ = Gg₁ − Fg₂
/// ```
///
/// from the closed-form values at the window start and return the largest
/// deviation from the closed forms. Each component is measured relative to
/// its natural size, e.g. `ω_I √(2g₋/ω_I) max|β|` for `g₂`, so that a
/// component that vanishes identically is not compared against round-off.
pub fn check_linear_odes(ds: &DriveState, inv: &InvariantCoefficients, sched: &ParameterSchedule) -> Result<f64> {
    let (a, b) = inv.window();
    let start = linear_from_beta(inv, a, ds.beta(a)?);
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let g = inv.g(t);
        let (m, w2, yy, f, gg) = (sched.m(t), sched.omega_sq(t), sched.y(t), sched.f(t), sched.g(t));
        dy[0] = -yy * y[0] + m * w2 * y[1] + (gg * g.g_plus - f * g.g_zero);
        dy[1] = -y[0] / m + yy * y[1] - (f * g.g_minus - gg * g.g_zero);
        dy[2] = gg * y[0] - f * y[1];
    };
    let opts = OdeOptions { rtol: 1e-12, atol: 1e-14, h_max: Some((b - a) / 512.0), ..OdeOptions::default() };
    let sol = ode::solve(rhs, a, b, &[start.g1, start.g2, start.g3], &opts)?;
    let grid: Vec<f64> = linspace(a, b, CHECK_POINTS).collect();
    let mut beta_max: f64 = 0.0;
    for &t in &grid {
        beta_max = beta_max.max(ds.beta(t)?.norm());
    }
    let wi = inv.omega_i();
    let mut scale = [0.0f64; 3];
    let mut dev = [0.0f64; 3];
    let mut y = [0.0; 3];
    for &t in &grid {
        sol.eval_into(t, &mut y);
        let l = ds.linear(t)?;
        let g = inv.g(t);
        let up = (2.0 * wi / g.g_minus).sqrt();
        let down = (2.0 * g.g_minus / wi).sqrt();
        let natural = [
            wi * (up + down * g.g_zero.abs() / g.g_minus) * beta_max,
            wi * down * beta_max,
            wi * beta_max * beta_max,
        ];
        for (k, v) in [l.g1, l.g2, l.g3].into_iter().enumerate() {
            scale[k] = scale[k].max(natural[k]);
            dev[k] = dev[k].max((y[k] - v).abs());
        }
    }
    Ok((0..3)
        .map(|k| if scale[k] > 0.0 { dev[k] / scale[k] } else { dev[k] })
        .fold(0.0, f64::max))
}

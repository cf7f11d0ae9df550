//! Fourth-order finite differences and grid quadrature for complex samples on
//! a uniform grid. The boundary rows use one-sided fourth-order stencils.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::schedule::ParameterSchedule;

/// Spacing of a uniform grid, or an error if the points are not uniform to
/// relative precision `1e-9`.
pub fn uniform_spacing(grid: &[f64]) -> Result<f64> {
    if grid.len() < 6 {
        return Err(Error::InvalidParameter { name: "grid".into(), reason: "need at least 6 points".into() });
    }
    let h = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    if !(h > 0.0) {
        return Err(Error::InvalidParameter { name: "grid".into(), reason: "must be increasing".into() });
    }
    for (k, w) in grid.windows(2).enumerate() {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h + 8.0 * f64::EPSILON * w[1].abs() {
            return Err(Error::InvalidParameter {
                name: "grid".into(),
                reason: format!("spacing {} at index {k} differs from {h}", w[1] - w[0]),
            });
        }
    }
    Ok(h)
}

/// First derivative.
pub fn d1(f: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = f.len();
    assert!(n >= 6, "need at least 6 points");
    let s = 1.0 / (12.0 * h);
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for i in 2..n - 2 {
        out[i] = (f[i - 2] - f[i - 1] * 8.0 + f[i + 1] * 8.0 - f[i + 2]) * s;
    }
    out[0] = (f[0] * -25.0 + f[1] * 48.0 - f[2] * 36.0 + f[3] * 16.0 - f[4] * 3.0) * s;
    out[1] = (f[0] * -3.0 - f[1] * 10.0 + f[2] * 18.0 - f[3] * 6.0 + f[4]) * s;
    let m = n - 1;
    out[m] = -(f[m] * -25.0 + f[m - 1] * 48.0 - f[m - 2] * 36.0 + f[m - 3] * 16.0 - f[m - 4] * 3.0) * s;
    out[m - 1] = -(f[m] * -3.0 - f[m - 1] * 10.0 + f[m - 2] * 18.0 - f[m - 3] * 6.0 + f[m - 4]) * s;
    out
}

/// Second derivative.
pub fn d2(f: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = f.len();
    assert!(n >= 6, "need at least 6 points");
    let s = 1.0 / (12.0 * h * h);
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for i in 2..n - 2 {
        out[i] = (-f[i - 2] + f[i - 1] * 16.0 - f[i] * 30.0 + f[i + 1] * 16.0 - f[i + 2]) * s;
    }
    let edge = |g: [Complex64; 6]| {
        [
            (g[0] * 45.0 - g[1] * 154.0 + g[2] * 214.0 - g[3] * 156.0 + g[4] * 61.0 - g[5] * 10.0) * s,
            (g[0] * 10.0 - g[1] * 15.0 - g[2] * 4.0 + g[3] * 14.0 - g[4] * 6.0 + g[5]) * s,
        ]
    };
    let [a, b] = edge([f[0], f[1], f[2], f[3], f[4], f[5]]);
    out[0] = a;
    out[1] = b;
    let m = n - 1;
    let [a, b] = edge([f[m], f[m - 1], f[m - 2], f[m - 3], f[m - 4], f[m - 5]]);
    out[m] = a;
    out[m - 1] = b;
    out
}

/// Trapezoidal `∫ conj(a) b dq`.
pub fn inner(a: &[Complex64], b: &[Complex64], h: f64) -> Complex64 {
    let n = a.len();
    let mut acc: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    acc -= (a[0].conj() * b[0] + a[n - 1].conj() * b[n - 1]) * 0.5;
    acc * h
}

pub fn norm_sq(a: &[Complex64], h: f64) -> f64 {
    inner(a, a, h).re
}

/// The operator `p2·p²/2 + pq·(pq + qp)/2 + q2·q²/2 + q·q + p·p + constant`
/// with `p = −i ∂_q`, named by field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticOperator {
    pub p2: f64,
    pub pq: f64,
    pub q2: f64,
    pub q: f64,
    pub p: f64,
    pub constant: f64,
}

impl QuadraticOperator {
    /// `H_T(t)` of the schedule.
    pub fn hamiltonian(sched: &ParameterSchedule, t: f64) -> Self {
        let m = sched.m(t);
        Self {
            p2: 1.0 / m,
            pq: sched.y(t),
            q2: m * sched.omega_sq(t),
            q: -sched.f(t),
            p: -sched.g(t),
            constant: 0.0,
        }
    }

    pub fn apply(&self, grid: &[f64], f: &[Complex64], h: f64) -> Vec<Complex64> {
        let i = Complex64::i();
        let df = d1(f, h);
        let ddf = d2(f, h);
        grid.iter()
            .enumerate()
            .map(|(k, &x)| {
                // (pq + qp)/2 = −i (q ∂ + 1/2)
                -ddf[k] * (0.5 * self.p2) - i * self.pq * (df[k] * x + f[k] * 0.5)
                    + f[k] * (0.5 * self.q2 * x * x + self.q * x + self.constant)
                    - i * self.p * df[k]
            })
            .collect()
    }
}

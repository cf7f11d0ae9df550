//! Lewis–Riesenfeld invariant of the undriven problem
//!
//! ```text
//! I = [g₋ p² + g₀ (pq + qp) + g₊ q²] / 2
//! ```
//!
//! with coefficients built from the classical basis. `ω_I² = g₊g₋ − g₀²` is
//! taken at the window start and its constancy is checked, not assumed.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::classical::{BasisPoint, CConstants, ClassicalBasis, CHECK_POINTS};
use crate::error::{Error, Result};
use crate::linspace;
use crate::ode::{self, OdeOptions};
use crate::quadrature::{CumulativeIntegral, QuadOptions};
use crate::schedule::ParameterSchedule;

/// Imaginary parts of the g's above this fraction of their scale are an error.
const REALITY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GValues {
    pub g_minus: f64,
    pub g_zero: f64,
    pub g_plus: f64,
}

#[derive(Clone, Debug)]
pub struct InvariantCoefficients {
    basis: Arc<ClassicalBasis>,
    c: CConstants,
    omega_i: f64,
    theta: CumulativeIntegral,
}

fn complex_g(sched: &ParameterSchedule, c: &CConstants, p: &BasisPoint, t: f64) -> [Complex64; 3] {
    let m = sched.m(t);
    let y = sched.y(t);
    let gm = c.g_minus(p);
    let g0 = -m
        * (c.c1 * p.f1 * p.f1_dot + c.c2 * 0.5 * (p.f1_dot * p.f2 + p.f1 * p.f2_dot) + c.c3 * p.f2 * p.f2_dot)
        + m * y * gm;
    let gp = m * m * (c.c1 * p.f1_dot * p.f1_dot + c.c2 * p.f1_dot * p.f2_dot + c.c3 * p.f2_dot * p.f2_dot)
        + 2.0 * m * y * g0
        - m * m * y * y * gm;
    [gm, g0, gp]
}

/// Build `g₋, g₀, g₊`, `ω_I` and `Θ` from the basis and the constants `c`.
pub fn build_invariant(basis: &ClassicalBasis, c: CConstants) -> Result<InvariantCoefficients> {
    build_shared(Arc::new(basis.clone()), c)
}

pub fn build_shared(basis: Arc<ClassicalBasis>, c: CConstants) -> Result<InvariantCoefficients> {
    let sched = basis.schedule();
    let (a, b) = basis.window();
    for t in linspace(a, b, CHECK_POINTS) {
        let g = complex_g(sched, &c, &basis.at(t), t);
        let scales = [g[0].norm(), (g[0].norm() * g[2].norm()).sqrt(), g[2].norm()];
        for ((name, v), scale) in ["g₋", "g₀", "g₊"].iter().zip(g).zip(scales) {
            if v.im.abs() > REALITY_TOL * scale {
                return Err(Error::Invariant(format!(
                    "{name}({t}) = {v} is not real; choose constants with c3 = conj(c1) and real c2"
                )));
            }
        }
        if !(g[0].re > 0.0) {
            return Err(Error::Invariant(format!("g₋({t}) = {} is not positive", g[0].re)));
        }
    }
    let g0 = complex_g(sched, &c, &basis.at(a), a);
    let omega_sq = g0[2].re * g0[0].re - g0[1].re * g0[1].re;
    if !(omega_sq > 0.0) {
        return Err(Error::Invariant(format!("ω_I² = {omega_sq} is not positive")));
    }
    let omega_i = omega_sq.sqrt();
    let rate = |t: f64| omega_i / (sched.m(t) * c.g_minus(&basis.at(t)).re);
    let theta = CumulativeIntegral::build(&basis.nodes(), rate, theta_quad())?;
    Ok(InvariantCoefficients { basis, c, omega_i, theta })
}

fn theta_quad() -> QuadOptions {
    QuadOptions { abs_tol: 1e-11, rel_tol: 1e-13, ..QuadOptions::default() }
}

impl InvariantCoefficients {
    pub fn basis(&self) -> &ClassicalBasis {
        &self.basis
    }

    pub fn schedule(&self) -> &ParameterSchedule {
        self.basis.schedule()
    }

    pub fn constants(&self) -> CConstants {
        self.c
    }

    pub fn window(&self) -> (f64, f64) {
        self.basis.window()
    }

    pub fn t0(&self) -> f64 {
        self.basis.window().0
    }

    pub fn omega_i(&self) -> f64 {
        self.omega_i
    }

    pub fn ensure_contains(&self, t: f64) -> Result<()> {
        self.basis.ensure_contains(t)
    }

    pub fn g(&self, t: f64) -> GValues {
        let g = complex_g(self.schedule(), &self.c, &self.basis.at(t), t);
        GValues { g_minus: g[0].re, g_zero: g[1].re, g_plus: g[2].re }
    }

    pub fn g_minus(&self, t: f64) -> f64 {
        self.c.g_minus(&self.basis.at(t)).re
    }

    /// `dΘ/dt = ω_I / (M g₋)`.
    pub fn theta_rate(&self, t: f64) -> f64 {
        self.omega_i / (self.schedule().m(t) * self.g_minus(t))
    }

    /// `Θ(t) = ∫_{t₀}^{t} ω_I / (M g₋)`.
    pub fn theta(&self, t: f64) -> Result<f64> {
        self.ensure_contains(t)?;
        self.theta.eval(t, |x| self.theta_rate(x))
    }

    /// Largest `|g₊g₋ − g₀² − ω_I²| / ω_I²` on the check grid.
    pub fn omega_i_deviation(&self) -> f64 {
        let (a, b) = self.window();
        let w2 = self.omega_i * self.omega_i;
        linspace(a, b, CHECK_POINTS)
            .map(|t| {
                let g = self.g(t);
                (g.g_plus * g.g_minus - g.g_zero * g.g_zero - w2).abs() / w2
            })
            .fold(0.0, f64::max)
    }

    /// Write `t, g_minus, g_zero, g_plus, theta`.
    pub fn write_csv(&self, path: &Path, n_points: usize) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "g_minus", "g_zero", "g_plus", "theta"])?;
        let (a, b) = self.window();
        for t in linspace(a, b, n_points.max(2)) {
            let g = self.g(t);
            let row = [t, g.g_minus, g.g_zero, g.g_plus, self.theta(t)?];
            w.write_record(row.iter().map(|x| format!("{x:.17e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Integrate the coupled linear system
///
/// ```text
/// ġ₋ = 2Yg₋ − 2g₀/M,  ġ₀ = Mω²g₋ − g₊/M,  ġ₊ = −2Yg₊ + 2Mω²g₀
/// ```
///
/// from the closed-form values at the window start and return the largest
/// relative deviation from the closed forms on the check grid. `g₀` is
/// measured against `√(g₊g₋)` since it may pass through zero.
pub fn check_invariant_odes(inv: &InvariantCoefficients, sched: &ParameterSchedule) -> Result<f64> {
    let (a, b) = inv.window();
    let start = inv.g(a);
    let s = sched.clone();
    let rhs = move |t: f64, y: &[f64], dy: &mut [f64]| {
        let (m, w2, yy) = (s.m(t), s.omega_sq(t), s.y(t));
        dy[0] = 2.0 * yy * y[0] - 2.0 * y[1] / m;
        dy[1] = m * w2 * y[0] - y[2] / m;
        dy[2] = -2.0 * yy * y[2] + 2.0 * m * w2 * y[1];
    };
    let opts = OdeOptions { rtol: 1e-12, atol: 1e-14, h_max: Some((b - a) / 256.0), ..OdeOptions::default() };
    let sol = ode::solve(rhs, a, b, &[start.g_minus, start.g_zero, start.g_plus], &opts)?;
    let mut worst: f64 = 0.0;
    let mut y = [0.0; 3];
    for t in linspace(a, b, CHECK_POINTS) {
        sol.eval_into(t, &mut y);
        let g = inv.g(t);
        let cross = (g.g_minus * g.g_plus).abs().sqrt();
        worst = worst
            .max((y[0] - g.g_minus).abs() / g.g_minus.abs())
            .max((y[1] - g.g_zero).abs() / cross)
            .max((y[2] - g.g_plus).abs() / g.g_plus.abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{solve_classical, InitialData};
    use crate::quadrature::integrate;
    use crate::schedule::{make_preset, Constant, Constants, Preset};

    fn consts(pairs: &[(&str, f64)]) -> Constants {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn build(s: &ParameterSchedule, window: (f64, f64)) -> InvariantCoefficients {
        let b = solve_classical(s, window, InitialData::default(), 1e-11).unwrap();
        let c = CConstants::default_for(&b);
        build_invariant(&b, c).unwrap()
    }

    #[test]
    fn example_b_closed_forms() {
        let (w, g) = (2.0, 0.1);
        let s = make_preset(Preset::B, &consts(&[("m", 1.0), ("omega", w), ("gamma", g)])).unwrap();
        let inv = build(&s, (0.0, 50.0));
        let big = (w * w - g * g).sqrt();
        assert!((inv.omega_i() - big).abs() < 1e-10);
        for t in linspace(0.0, 50.0, 26) {
            let v = inv.g(t);
            assert!((v.g_minus - (-2.0 * g * t).exp()).abs() < 1e-8 * (-2.0 * g * t).exp());
            assert!((v.g_zero - g).abs() < 1e-8 * g);
            assert!((v.g_plus - w * w * (2.0 * g * t).exp()).abs() < 1e-8 * w * w * (2.0 * g * t).exp());
            assert!((inv.theta(t).unwrap() - big * t).abs() < 1e-9 * (1.0 + t));
        }
        assert!(inv.omega_i_deviation() < 1e-8);
        assert!(check_invariant_odes(&inv, &s).unwrap() < 1e-8);
    }

    #[test]
    fn example_c_is_static() {
        let s = make_preset(Preset::C, &consts(&[("m", 2.0), ("omega", 3.0), ("F0", 0.7), ("omega_e", 2.0)])).unwrap();
        let inv = build(&s, (0.0, 10.0));
        assert!((inv.omega_i() - 3.0).abs() < 1e-12);
        for t in [0.0, 3.3, 10.0] {
            let v = inv.g(t);
            assert!((v.g_minus - 0.5).abs() < 1e-10);
            assert!(v.g_zero.abs() < 1e-10);
            assert!((v.g_plus - 18.0).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_case_ode_check_is_exact() {
        let s = ParameterSchedule::constant(1.5, 2.0);
        let inv = build(&s, (0.0, 5.0));
        assert!(check_invariant_odes(&inv, &s).unwrap() < 1e-12);
    }

    #[test]
    fn example_d_ode_check() {
        let c = consts(&[("m0", 1.0), ("Omega", 1.0), ("gamma", 0.05), ("mu", 0.3), ("nu", 1.5)]);
        let s = make_preset(Preset::D, &c).unwrap();
        let period = 2.0 * std::f64::consts::PI / 1.5;
        let inv = build(&s, (0.0, period));
        assert!(check_invariant_odes(&inv, &s).unwrap() < 1e-7);
        // closed form for this family: g₋ = 1/M, ω_I = Ω
        for t in [0.4, 2.0, period] {
            assert!((inv.g_minus(t) - 1.0 / s.m(t)).abs() < 1e-9 / s.m(t));
        }
        assert!((inv.omega_i() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn nonzero_cross_term_keeps_invariant() {
        let mut s = ParameterSchedule::constant(1.0, 2.0);
        s.cross = Arc::new(crate::schedule::Analytic::new(
            "0.3 sin t",
            |t: f64| 0.3 * t.sin(),
            |t: f64| 0.3 * t.cos(),
            |t: f64| -0.3 * t.sin(),
        ));
        s.mass = Arc::new(crate::schedule::Analytic::new(
            "1 + 0.2 sin 2t",
            |t: f64| 1.0 + 0.2 * (2.0 * t).sin(),
            |t: f64| 0.4 * (2.0 * t).cos(),
            |t: f64| -0.8 * (2.0 * t).sin(),
        ));
        let inv = build(&s, (0.0, 8.0));
        assert!(inv.omega_i_deviation() < 1e-8, "{}", inv.omega_i_deviation());
        assert!(check_invariant_odes(&inv, &s).unwrap() < 1e-8);
    }

    #[test]
    fn theta_is_additive_and_increasing() {
        let c = consts(&[("m0", 1.0), ("Omega", 1.2), ("gamma", 0.02), ("mu", 0.2), ("nu", 2.0)]);
        let s = make_preset(Preset::D, &c).unwrap();
        let inv = build(&s, (0.0, 6.0));
        assert_eq!(inv.theta(0.0).unwrap(), 0.0);
        let (t1, t2) = (1.37, 4.91);
        let direct = integrate(|x| inv.theta_rate(x), t1, t2, &QuadOptions::default()).unwrap().value;
        assert!((inv.theta(t2).unwrap() - inv.theta(t1).unwrap() - direct).abs() < 1e-10);
        let mut last = -1.0;
        for t in linspace(0.0, 6.0, 100) {
            let th = inv.theta(t).unwrap();
            assert!(th > last);
            last = th;
        }
        assert!(matches!(inv.theta(7.0), Err(Error::OutsideWindow { .. })));
    }

    #[test]
    fn non_real_constants_rejected() {
        let s = ParameterSchedule::constant(1.0, 1.0);
        let b = solve_classical(&s, (0.0, 2.0), InitialData::default(), 1e-10).unwrap();
        let c = CConstants { c1: Complex64::new(0.0, 1.0), ..CConstants::real(0.0, 1.0, 0.0) };
        assert!(matches!(build_invariant(&b, c), Err(Error::Invariant(_))));
        let neg = CConstants::real(0.0, -1.0, 0.0);
        assert!(matches!(build_invariant(&b, neg), Err(Error::Invariant(_))));
    }

    #[test]
    fn csv_columns() {
        let s = ParameterSchedule { force: Arc::new(Constant(0.1)), ..ParameterSchedule::constant(1.0, 1.0) };
        let inv = build(&s, (0.0, 1.0));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        inv.write_csv(&p, 3).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        assert!(text.starts_with("t,g_minus,g_zero,g_plus,theta\n"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(16))]
            #[test]
            fn scaling_covariance(lambda in 0.1f64..10.0, m in 0.5f64..2.0, w in 0.5f64..2.0) {
                let s = ParameterSchedule::constant(m, w * w);
                let b = solve_classical(&s, (0.0, 3.0), InitialData::default(), 1e-10).unwrap();
                let c = CConstants::default_for(&b);
                let one = build_invariant(&b, c).unwrap();
                let two = build_invariant(&b, c.scaled(lambda)).unwrap();
                prop_assert!((two.omega_i() - lambda * one.omega_i()).abs() < 1e-12 * two.omega_i());
                for t in [0.0, 1.1, 3.0] {
                    let (x, y) = (one.g(t), two.g(t));
                    prop_assert!((y.g_minus - lambda * x.g_minus).abs() <= 1e-13 * y.g_minus.abs());
                    prop_assert!((y.g_plus - lambda * x.g_plus).abs() <= 1e-12 * y.g_plus.abs());
                    prop_assert!((two.theta(t).unwrap() - one.theta(t).unwrap()).abs() < 1e-11);
                }
            }

            #[test]
            fn omega_i_constant_for_random_schedules(a in 0.05f64..0.4, nu in 0.5f64..3.0, y0 in -0.3f64..0.3) {
                let mut s = ParameterSchedule::constant(1.0, 3.0);
                s.mass = Arc::new(crate::schedule::Analytic::new(
                    "1 + a sin nu t",
                    move |t: f64| 1.0 + a * (nu * t).sin(),
                    move |t: f64| a * nu * (nu * t).cos(),
                    move |t: f64| -a * nu * nu * (nu * t).sin(),
                ));
                s.cross = Arc::new(Constant(y0));
                let inv = build(&s, (0.0, 6.0));
                prop_assert!(inv.omega_i_deviation() < 1e-8);
            }
        }
    }
}

//! Two independent solutions of the classical equation of motion
//!
//! ```text
//! M f̈ + Ṁ ḟ + (M ω² − M Y² − Ṁ Y − M Ẏ) f = 0
//! ```
//!
//! integrated as eight real equations with dense output.

use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linspace;
use crate::ode::{self, DenseSolution, OdeOptions};
use crate::schedule::ParameterSchedule;

/// Number of points on the residual and Wronskian check grid.
pub const CHECK_POINTS: usize = 512;

const ABS_TOL_FACTOR: f64 = 1e-6;

/// Lower bound on the number of steps. Short steps keep the derivative of the
/// dense interpolant (used by the residual check) close to the solver accuracy.
const MIN_STEPS: usize = 1024;

/// Initial data for the pair `f₁, f₂` at the window start.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialData {
    /// `f₁ = 1`, `ḟ₁ = iΩ₀ − γ₀` with `γ₀ = Ṁ/2M` and
    /// `Ω₀² = k/M − γ₀² − γ̇₀`; `f₂` gets the conjugate data.
    /// Constant-coefficient problems then give pure exponentials.
    ComplexExponentialLike,
    Explicit { f1: Complex64, f1_dot: Complex64, f2: Complex64, f2_dot: Complex64 },
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData::ComplexExponentialLike
    }
}

/// Values of `f₁, ḟ₁, f₂, ḟ₂` at one time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisPoint {
    pub f1: Complex64,
    pub f1_dot: Complex64,
    pub f2: Complex64,
    pub f2_dot: Complex64,
}

#[derive(Clone, Debug)]
pub struct ClassicalBasis {
    solution: DenseSolution,
    schedule: ParameterSchedule,
    wronskian_ref: Complex64,
    window: (f64, f64),
    tol: f64,
}

fn wkb_initial_data(sched: &ParameterSchedule, t0: f64) -> Result<InitialData> {
    let m = sched.m(t0);
    let md = sched.m_dot(t0);
    let mdd = sched.mass.second_derivative(t0);
    let gamma0 = md / (2.0 * m);
    let gamma0_dot = mdd / (2.0 * m) - md * md / (2.0 * m * m);
    let omega0_sq = sched.eom_stiffness(t0) / m - gamma0 * gamma0 - gamma0_dot;
    if !(omega0_sq > 0.0) {
        return Err(Error::InvalidParameter {
            name: "initial data".into(),
            reason: format!(
                "local frequency squared {omega0_sq} at t = {t0} is not positive; supply explicit initial data"
            ),
        });
    }
    let d = Complex64::new(-gamma0, omega0_sq.sqrt());
    let one = Complex64::new(1.0, 0.0);
    Ok(InitialData::Explicit { f1: one, f1_dot: d, f2: one, f2_dot: d.conj() })
}

/// Integrate the equation of motion over `window` with relative and absolute
/// tolerance `tol`. Initial data are imposed at `window.0`.
pub fn solve_classical(
    sched: &ParameterSchedule,
    window: (f64, f64),
    init: InitialData,
    tol: f64,
) -> Result<ClassicalBasis> {
    let (a, b) = window;
    if !(b > a) {
        return Err(Error::InvalidParameter { name: "window".into(), reason: format!("[{a}, {b}] is empty") });
    }
    if !(1e-13..=1e-6).contains(&tol) {
        return Err(Error::InvalidParameter { name: "tol".into(), reason: format!("{tol} not in [1e-13, 1e-6]") });
    }
    for t in linspace(a, b, CHECK_POINTS) {
        let m = sched.m(t);
        if !(m > 0.0) {
            return Err(Error::Schedule(format!("M = {m} <= 0 at t = {t}")));
        }
    }
    let init = match init {
        InitialData::ComplexExponentialLike => wkb_initial_data(sched, a)?,
        explicit => explicit,
    };
    let InitialData::Explicit { f1, f1_dot, f2, f2_dot } = init else { unreachable!() };
    let y0 = [f1.re, f1.im, f1_dot.re, f1_dot.im, f2.re, f2.im, f2_dot.re, f2_dot.im];

    let s = sched.clone();
    let rhs = move |t: f64, y: &[f64], dy: &mut [f64]| {
        let m = s.m(t);
        let md = s.m_dot(t);
        let k = s.eom_stiffness(t);
        for base in [0, 4] {
            dy[base] = y[base + 2];
            dy[base + 1] = y[base + 3];
            dy[base + 2] = -(md * y[base + 2] + k * y[base]) / m;
            dy[base + 3] = -(md * y[base + 3] + k * y[base + 1]) / m;
        }
    };
    // The solutions may decay by several orders of magnitude (growing mass), so
    // the absolute floor sits well below the relative tolerance.
    let opts = OdeOptions {
        rtol: tol,
        atol: tol * ABS_TOL_FACTOR,
        h_max: Some((b - a) / MIN_STEPS as f64),
        ..OdeOptions::default()
    };
    let solution = ode::solve(rhs, a, b, &y0, &opts)?;
    let wronskian_ref = sched.m(a) * (f1 * f2_dot - f1_dot * f2);
    if wronskian_ref.norm() == 0.0 {
        return Err(Error::InvalidParameter {
            name: "initial data".into(),
            reason: "f1 and f2 are linearly dependent".into(),
        });
    }
    Ok(ClassicalBasis { solution, schedule: sched.clone(), wronskian_ref, window, tol })
}

impl ClassicalBasis {
    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn schedule(&self) -> &ParameterSchedule {
        &self.schedule
    }

    pub fn wronskian_ref(&self) -> Complex64 {
        self.wronskian_ref
    }

    /// Step boundaries of the underlying integration.
    pub fn nodes(&self) -> Vec<f64> {
        self.solution.nodes()
    }

    pub fn contains(&self, t: f64) -> bool {
        self.solution.contains(t)
    }

    pub fn ensure_contains(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::OutsideWindow { t, start: self.window.0, end: self.window.1 })
        }
    }

    pub fn at(&self, t: f64) -> BasisPoint {
        let mut y = [0.0; 8];
        self.solution.eval_into(t, &mut y);
        BasisPoint {
            f1: Complex64::new(y[0], y[1]),
            f1_dot: Complex64::new(y[2], y[3]),
            f2: Complex64::new(y[4], y[5]),
            f2_dot: Complex64::new(y[6], y[7]),
        }
    }

    pub fn f1(&self, t: f64) -> Complex64 {
        self.at(t).f1
    }

    pub fn f2(&self, t: f64) -> Complex64 {
        self.at(t).f2
    }

    /// Mass-weighted Wronskian `M(f₁ḟ₂ − ḟ₁f₂)` at `t`.
    pub fn wronskian(&self, t: f64) -> Complex64 {
        let p = self.at(t);
        self.schedule.m(t) * (p.f1 * p.f2_dot - p.f1_dot * p.f2)
    }

    /// Largest relative change of the mass-weighted Wronskian on the check grid.
    pub fn wronskian_deviation(&self) -> f64 {
        let (a, b) = self.window;
        linspace(a, b, CHECK_POINTS)
            .map(|t| (self.wronskian(t) - self.wronskian_ref).norm() / self.wronskian_ref.norm())
            .fold(0.0, f64::max)
    }

    /// Largest equation-of-motion residual of the dense interpolant on the
    /// check grid, relative to the local size of the three terms.
    pub fn eom_residual(&self) -> f64 {
        let (a, b) = self.window;
        let s = &self.schedule;
        let mut y = [0.0; 8];
        let mut dy = [0.0; 8];
        let mut worst: f64 = 0.0;
        for t in linspace(a, b, CHECK_POINTS) {
            self.solution.eval_into(t, &mut y);
            self.solution.eval_derivative_into(t, &mut dy);
            let (m, md, k) = (s.m(t), s.m_dot(t), s.eom_stiffness(t));
            for base in [0, 4] {
                let f = Complex64::new(y[base], y[base + 1]);
                let fd = Complex64::new(y[base + 2], y[base + 3]);
                let fdd = Complex64::new(dy[base + 2], dy[base + 3]);
                let terms = [m * fdd, md * fd, k * f];
                let scale: f64 = terms.iter().map(|z| z.norm()).sum();
                let r = (terms[0] + terms[1] + terms[2]).norm() / scale.max(f64::MIN_POSITIVE);
                worst = worst.max(r);
            }
        }
        worst
    }

    /// Largest `|f₂ − conj f₁| / (1 + |f₁|)` on the check grid.
    pub fn conjugation_defect(&self) -> f64 {
        let (a, b) = self.window;
        linspace(a, b, CHECK_POINTS)
            .map(|t| {
                let p = self.at(t);
                (p.f2 - p.f1.conj()).norm() / (1.0 + p.f1.norm())
            })
            .fold(0.0, f64::max)
    }

    /// Write `t, Re f₁, Im f₁, Re ḟ₁, Im ḟ₁, Re f₂, Im f₂, Re ḟ₂, Im ḟ₂`.
    pub fn write_csv(&self, path: &Path, n_points: usize) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "re_f1", "im_f1", "re_f1_dot", "im_f1_dot", "re_f2", "im_f2", "re_f2_dot", "im_f2_dot"])?;
        for t in linspace(self.window.0, self.window.1, n_points.max(2)) {
            let p = self.at(t);
            let row = [t, p.f1.re, p.f1.im, p.f1_dot.re, p.f1_dot.im, p.f2.re, p.f2.im, p.f2_dot.re, p.f2_dot.im];
            w.write_record(row.iter().map(|x| format!("{x:.17e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Constants of the quadratic form `g₋ = c₁f₁² + c₂f₁f₂ + c₃f₂²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CConstants {
    pub c1: Complex64,
    pub c2: Complex64,
    pub c3: Complex64,
}

impl CConstants {
    pub fn real(c1: f64, c2: f64, c3: f64) -> Self {
        Self { c1: c1.into(), c2: c2.into(), c3: c3.into() }
    }

    /// `c₁ = c₃ = 0` with `c₂` fixed so that `g₋(t₀) = 1/M(t₀)`.
    pub fn default_for(basis: &ClassicalBasis) -> Self {
        let t0 = basis.window.0;
        let p = basis.at(t0);
        let c2 = 1.0 / (basis.schedule.m(t0) * p.f1 * p.f2);
        Self { c1: 0.0.into(), c2, c3: 0.0.into() }
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self { c1: self.c1 * lambda, c2: self.c2 * lambda, c3: self.c3 * lambda }
    }

    pub fn g_minus(&self, p: &BasisPoint) -> Complex64 {
        self.c1 * p.f1 * p.f1 + self.c2 * p.f1 * p.f2 + self.c3 * p.f2 * p.f2
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodicityCheck {
    pub periodic: bool,
    /// Largest `|g₋(t+τ) − g₋(t)|` divided by the largest `|g₋|`.
    pub max_deviation: f64,
}

/// Compare `g₋(t+τ)` with `g₋(t)` on 256 points of `[start, end − τ]`.
pub fn check_periodicity(basis: &ClassicalBasis, c: &CConstants, tau: f64, tol: f64) -> Result<PeriodicityCheck> {
    let (a, b) = basis.window;
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter { name: "tau".into(), reason: format!("{tau} must be positive") });
    }
    if b - a < 2.0 * tau * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter {
            name: "window".into(),
            reason: format!("length {} is shorter than 2τ = {}", b - a, 2.0 * tau),
        });
    }
    let g = |t: f64| c.g_minus(&basis.at(t)).re;
    let end = (b - tau).max(a);
    let mut scale: f64 = 0.0;
    let mut dev: f64 = 0.0;
    for t in linspace(a, end, 256) {
        let now = g(t);
        let later = g((t + tau).min(b));
        scale = scale.max(now.abs()).max(later.abs());
        dev = dev.max((later - now).abs());
    }
    let max_deviation = dev / scale.max(f64::MIN_POSITIVE);
    Ok(PeriodicityCheck { periodic: max_deviation <= tol, max_deviation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, QuadOptions};
    use crate::schedule::{make_preset, Constants, Preset};
    use std::f64::consts::PI;

    fn consts(pairs: &[(&str, f64)]) -> Constants {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn example_a_gives_exponentials() {
        let s = make_preset(Preset::A, &consts(&[("m", 1.0), ("omega0", 1.3), ("F0", 0.5)])).unwrap();
        let b = solve_classical(&s, (0.0, 20.0), InitialData::default(), 1e-11).unwrap();
        for t in linspace(0.0, 20.0, 41) {
            let exact = Complex64::new(0.0, 1.3 * t).exp();
            assert!((b.f1(t) - exact).norm() < 1e-8, "t={t}");
            assert!((b.f2(t) - exact.conj()).norm() < 1e-8);
        }
    }

    #[test]
    fn example_b_gives_damped_exponentials() {
        let (w, g) = (2.0, 0.1);
        let s = make_preset(Preset::B, &consts(&[("m", 1.0), ("omega", w), ("gamma", g)])).unwrap();
        let b = solve_classical(&s, (0.0, 50.0), InitialData::default(), 1e-11).unwrap();
        let big = (w * w - g * g).sqrt();
        for t in linspace(0.0, 50.0, 51) {
            let exact = Complex64::new(-g * t, big * t).exp();
            assert!((b.f1(t) - exact).norm() < 1e-8 * (1.0 + t));
        }
        assert!(b.wronskian_deviation() < 100.0 * 1e-11);
        assert!(b.conjugation_defect() < 1e-12);
    }

    #[test]
    fn wronskian_obeys_abel_identity() {
        let c = consts(&[("m0", 1.0), ("Omega", 1.0), ("gamma", 0.05), ("mu", 0.3), ("nu", 1.5)]);
        let s = make_preset(Preset::D, &c).unwrap();
        let b = solve_classical(&s, (0.0, 12.0), InitialData::default(), 1e-10).unwrap();
        let w0 = b.at(0.0);
        let w0 = w0.f1 * w0.f2_dot - w0.f1_dot * w0.f2;
        for t in [1.0, 5.5, 12.0] {
            let p = b.at(t);
            let w = p.f1 * p.f2_dot - p.f1_dot * p.f2;
            let log_ratio = integrate(|x| s.m_dot(x) / s.m(x), 0.0, t, &QuadOptions::default()).unwrap().value;
            assert!((w * log_ratio.exp() - w0).norm() < 1e-8 * w0.norm());
        }
        assert!(b.eom_residual() < 1e-8, "{}", b.eom_residual());
    }

    #[test]
    fn periodicity_of_g_minus() {
        let s = make_preset(Preset::C, &consts(&[("m", 1.0), ("omega", 3.0), ("F0", 0.7), ("omega_e", 2.0)])).unwrap();
        let tau = 2.0 * PI / 3.0;
        let b = solve_classical(&s, (0.0, 2.0 * tau), InitialData::default(), 1e-11).unwrap();
        let c = CConstants::default_for(&b);
        let r = check_periodicity(&b, &c, tau, 1e-8).unwrap();
        assert!(r.periodic, "{r:?}");

        let s = make_preset(Preset::B, &consts(&[("m", 1.0), ("omega", 2.0), ("gamma", 0.1)])).unwrap();
        let b = solve_classical(&s, (0.0, 2.0 * tau), InitialData::default(), 1e-11).unwrap();
        let r = check_periodicity(&b, &CConstants::default_for(&b), tau, 1e-8).unwrap();
        assert!(!r.periodic);
        assert!(check_periodicity(&b, &CConstants::default_for(&b), 2.0 * tau, 1e-8).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = ParameterSchedule::constant(1.0, 1.0);
        assert!(solve_classical(&s, (0.0, 1.0), InitialData::default(), 1e-3).is_err());
        assert!(solve_classical(&s, (1.0, 1.0), InitialData::default(), 1e-10).is_err());
        let one = Complex64::new(1.0, 0.0);
        let dep = InitialData::Explicit { f1: one, f1_dot: one, f2: one * 2.0, f2_dot: one * 2.0 };
        assert!(solve_classical(&s, (0.0, 1.0), dep, 1e-10).is_err());
        let neg = ParameterSchedule::constant(-1.0, 1.0);
        assert!(matches!(solve_classical(&neg, (0.0, 1.0), InitialData::default(), 1e-10), Err(Error::Schedule(_))));
    }

    #[test]
    fn csv_dump_has_fixed_columns() {
        let s = ParameterSchedule::constant(1.0, 1.0);
        let b = solve_classical(&s, (0.0, 1.0), InitialData::default(), 1e-10).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("basis.csv");
        b.write_csv(&path, 5).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,re_f1,im_f1,re_f1_dot,im_f1_dot,re_f2"));
        assert_eq!(text.lines().count(), 6);
    }
}

//! Cyclic initial states and the nonadiabatic Berry phase.
//!
//! Over one period `τ` the displacement returns to itself iff
//! `θ₀ = ∫ω_I/(Mg₋) ∈ 2πℤ` and `σ₀ = ∫W e^{iΘ} = 0`. For such states the
//! Berry phase is evaluated twice: from the closed integral expression in
//! `g`, `h`, `β`, and by reconstruction `χₙ + ∫⟨ψₙ|H_T|ψₙ⟩` with the
//! expectation value taken on a grid.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::classical::check_periodicity;
use crate::driving::DriveState;
use crate::error::{Error, Result};
use crate::fd::{self, QuadraticOperator};
use crate::invariant::InvariantCoefficients;
use crate::linspace;
use crate::quadrature::{integrate, QuadOptions};
use crate::schedule::{ParameterSchedule, DEFAULT_PERIOD_TOL};
use crate::wavefunction::{self, alpha_phase, PacketShape};

/// Relative tolerance for the `g₋` periodicity test.
pub const G_MINUS_PERIOD_TOL: f64 = 1e-7;

pub const REASON_G_MINUS: &str = "g₋ not periodic";
pub const REASON_SCHEDULE: &str = "schedule not τ-periodic";
pub const REASON_THETA: &str = "θ₀ not a multiple of 2π";
pub const REASON_SIGMA: &str = "σ₀ does not vanish";

#[derive(Clone, Debug, PartialEq)]
pub struct BerryPartials {
    /// `∫ [g₀²/(Mg₋ω_I) − Yg₀/ω_I]`, to be multiplied by `n + ½`.
    pub level_integral: f64,
    /// `∫ (h₀/2)|β|²`.
    pub h0_term: f64,
    /// `∫ ξ_R`.
    pub xi_term: f64,
    /// `∫ ζ_R`.
    pub zeta_term: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BerryPhase {
    pub n: usize,
    /// Total phase `αₙ(t+τ) − αₙ(t)`.
    pub chi: f64,
    pub gamma: f64,
    pub gamma_reconstructed: f64,
    /// `|γ − γ_reconstructed| / max(|γ|, 1)`.
    pub discrepancy: f64,
    pub partials: BerryPartials,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CyclicReport {
    pub tau: f64,
    pub t_start: f64,
    pub theta0: f64,
    pub sigma0: Complex64,
    pub is_cis: bool,
    pub winding: i64,
    /// Why the verdict is negative, if it is.
    pub reason: Option<String>,
    pub tol_theta: f64,
    pub tol_sigma: f64,
    pub g_minus_deviation: f64,
    pub per_n: Vec<BerryPhase>,
}

fn quad_opts() -> QuadOptions {
    QuadOptions { abs_tol: 1e-13, rel_tol: 1e-12, max_intervals: 20_000 }
}

fn schedule_is_periodic(sched: &ParameterSchedule, tau: f64, window: (f64, f64)) -> bool {
    let test = sched.clone().with_period(Some(tau));
    crate::schedule::validate_with(&test, window, 200, DEFAULT_PERIOD_TOL)
        .iter()
        .all(|v| !v.invariant.ends_with("τ-periodic"))
}

/// Evaluate `θ₀`, `σ₀` and the cyclic-state verdict for `[t_start, t_start + τ]`.
///
/// The invariant window must span at least `2τ` so that the periodicity of
/// `g₋` can be tested.
pub fn cis_conditions(ds: &DriveState, tau: f64, t_start: f64) -> Result<CyclicReport> {
    if !(tau > 0.0) {
        return Err(Error::Cyclic(format!("τ = {tau} must be positive")));
    }
    let inv = ds.invariant();
    let (a, b) = inv.window();
    let t_end = t_start + tau;
    if t_start < a || t_end > b * (1.0 + 1e-14) + 1e-14 {
        return Err(Error::Cyclic(format!("[{t_start}, {t_end}] is not inside the window [{a}, {b}]")));
    }
    let periodicity = check_periodicity(inv.basis(), &inv.constants(), tau, G_MINUS_PERIOD_TOL)
        .map_err(|e| Error::Cyclic(format!("cannot test g₋ periodicity: {e}")))?;

    let opts = quad_opts();
    let theta0 = integrate(|t| inv.theta_rate(t), t_start, t_end, &opts)?.value;
    let sigma0 = integrate(
        |t| ds.w(t).unwrap_or_default() * Complex64::from_polar(1.0, inv.theta(t).unwrap_or(f64::NAN)),
        t_start,
        t_end,
        &opts,
    )?
    .value;
    let w_max = linspace(t_start, t_end, 256).map(|t| ds.w(t).map(|w| w.norm())).collect::<Result<Vec<_>>>()?;
    let w_max = w_max.into_iter().fold(0.0, f64::max);
    let tol_theta = 1e-6 * 2.0 * PI;
    let tol_sigma = 1e-8 * tau * w_max;
    let winding = (theta0 / (2.0 * PI)).round() as i64;

    let reason = if !periodicity.periodic {
        Some(REASON_G_MINUS)
    } else if !schedule_is_periodic(ds.schedule(), tau, (a, b - tau)) {
        Some(REASON_SCHEDULE)
    } else if (theta0 - 2.0 * PI * winding as f64).abs() > tol_theta {
        Some(REASON_THETA)
    } else if sigma0.norm() > tol_sigma {
        Some(REASON_SIGMA)
    } else {
        None
    };
    Ok(CyclicReport {
        tau,
        t_start,
        theta0,
        sigma0,
        is_cis: reason.is_none(),
        winding,
        reason: reason.map(str::to_string),
        tol_theta,
        tol_sigma,
        g_minus_deviation: periodicity.max_deviation,
        per_n: Vec::new(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HCoefficients {
    pub h0: f64,
    pub h_plus: Complex64,
    pub h_minus: Complex64,
}

/// Coefficients of `H_T` written in the invariant's ladder operators:
///
/// ```text
/// h₀ = [g₀² + M²ω²g₋² + ω_I² − 2MYg₀g₋] / (M g₋ ω_I)
/// h± = [g₀² + M²ω²g₋² − ω_I² ∓ 2i g₀ω_I − 2MYg₀g₋ ± 2i MYg₋ω_I] / (2M g₋ ω_I)
/// ```
pub fn h_coefficients(inv: &InvariantCoefficients, sched: &ParameterSchedule, t: f64) -> Result<HCoefficients> {
    inv.ensure_contains(t)?;
    let g = inv.g(t);
    if !(g.g_minus > 0.0) {
        return Err(Error::Cyclic(format!("g₋({t}) = {} is not positive", g.g_minus)));
    }
    let (m, w2, y) = (sched.m(t), sched.omega_sq(t), sched.y(t));
    let wi = inv.omega_i();
    let common = g.g_zero * g.g_zero + m * m * w2 * g.g_minus * g.g_minus - 2.0 * m * y * g.g_zero * g.g_minus;
    let h0 = (common + wi * wi) / (m * g.g_minus * wi);
    let imag = 2.0 * g.g_zero * wi - 2.0 * m * y * g.g_minus * wi;
    let denom = 2.0 * m * g.g_minus * wi;
    Ok(HCoefficients {
        h0,
        h_plus: Complex64::new(common - wi * wi, -imag) / denom,
        h_minus: Complex64::new(common - wi * wi, imag) / denom,
    })
}

/// Pointwise integrands of the closed Berry-phase expression.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BerryIntegrands {
    pub level: f64,
    pub h0_term: f64,
    /// `ξ = 2i (W* + √(ω_I/2g₋) G) β`.
    pub xi: Complex64,
    /// `ζ = (h₋ + ω_I/(Mg₋)) β²`.
    pub zeta: Complex64,
}

pub fn berry_integrands(ds: &DriveState, t: f64) -> Result<BerryIntegrands> {
    let inv = ds.invariant();
    let sched = ds.schedule();
    let h = h_coefficients(inv, sched, t)?;
    let g = inv.g(t);
    let wi = inv.omega_i();
    let m = sched.m(t);
    let beta = ds.beta(t)?;
    let w = ds.w(t)?;
    let level = g.g_zero * g.g_zero / (m * g.g_minus * wi) - sched.y(t) * g.g_zero / wi;
    let xi = 2.0 * Complex64::i() * (w.conj() + (wi / (2.0 * g.g_minus)).sqrt() * sched.g(t)) * beta;
    let zeta = (h.h_minus + wi / (m * g.g_minus)) * beta * beta;
    Ok(BerryIntegrands { level, h0_term: 0.5 * h.h0 * beta.norm_sqr(), xi, zeta })
}

/// Integrals of the closed Berry-phase expression over `[t_start, t_start + τ]`.
pub fn berry_partials(ds: &DriveState, tau: f64, t_start: f64) -> Result<BerryPartials> {
    let opts = quad_opts();
    let (a, b) = (t_start, t_start + tau);
    let part = |pick: fn(&BerryIntegrands) -> f64| -> Result<f64> {
        let mut failure = None;
        let v = integrate(
            |t| match berry_integrands(ds, t) {
                Ok(x) => pick(&x),
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            },
            a,
            b,
            &opts,
        )?
        .value;
        match failure {
            Some(e) => Err(e),
            None => Ok(v),
        }
    };
    Ok(BerryPartials {
        level_integral: part(|x| x.level)?,
        h0_term: part(|x| x.h0_term)?,
        xi_term: part(|x| x.xi.re)?,
        zeta_term: part(|x| x.zeta.re)?,
    })
}

/// `⟨ψₙ|H_T|ψₙ⟩` at `t` on the default grid with fourth-order differences.
pub fn energy_expectation(n: usize, ds: &DriveState, t: f64) -> Result<f64> {
    let grid = wavefunction::default_grid(ds, n, t)?;
    let h = fd::uniform_spacing(&grid)?;
    // The phase e^{iαₙ} cancels in the expectation value.
    let shape = PacketShape::at(ds, t)?;
    let phi: Vec<Complex64> = grid.iter().map(|&q| shape.phi(n, q)).collect();
    let applied = QuadraticOperator::hamiltonian(ds.schedule(), t).apply(&grid, &phi, h);
    Ok(fd::inner(&phi, &applied, h).re / fd::norm_sq(&phi, h))
}

/// Berry phase of level `n` by both routes. Fails unless the configuration
/// is cyclic.
pub fn berry_phase(n: usize, ds: &DriveState, tau: f64, t_start: f64) -> Result<BerryPhase> {
    let report = cis_conditions(ds, tau, t_start)?;
    if !report.is_cis {
        return Err(Error::Cyclic(format!(
            "no cyclic initial state for τ = {tau}: {}",
            report.reason.unwrap_or_default()
        )));
    }
    let partials = berry_partials(ds, tau, t_start)?;
    berry_phase_from(n, ds, tau, t_start, partials)
}

fn berry_phase_from(n: usize, ds: &DriveState, tau: f64, t_start: f64, partials: BerryPartials) -> Result<BerryPhase> {
    let gamma = (n as f64 + 0.5) * partials.level_integral + partials.h0_term + partials.xi_term + partials.zeta_term;
    let chi = alpha_phase(n, ds, t_start + tau)? - alpha_phase(n, ds, t_start)?;
    let opts = QuadOptions { abs_tol: 1e-10, rel_tol: 1e-10, max_intervals: 4000 };
    let mut failure = None;
    let energy = integrate(
        |t| match energy_expectation(n, ds, t) {
            Ok(e) => e,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        t_start,
        t_start + tau,
        &opts,
    )?
    .value;
    if let Some(e) = failure {
        return Err(e);
    }
    let gamma_reconstructed = chi + energy;
    Ok(BerryPhase {
        n,
        chi,
        gamma,
        gamma_reconstructed,
        discrepancy: (gamma - gamma_reconstructed).abs() / gamma.abs().max(1.0),
        partials,
    })
}

/// CIS verdict plus Berry phases for every level in `levels` when cyclic.
pub fn analyze(ds: &DriveState, tau: f64, t_start: f64, levels: &[usize]) -> Result<CyclicReport> {
    let mut report = cis_conditions(ds, tau, t_start)?;
    if report.is_cis && !levels.is_empty() {
        let partials = berry_partials(ds, tau, t_start)?;
        for &n in levels {
            report.per_n.push(berry_phase_from(n, ds, tau, t_start, partials.clone())?);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{solve_classical, CConstants, InitialData};
    use crate::driving::{solve_beta, Beta0};
    use crate::invariant::build_invariant;
    use crate::schedule::{make_preset, Constants, Preset};

    fn consts(pairs: &[(&str, f64)]) -> Constants {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn drive(s: &ParameterSchedule, window: (f64, f64), beta0: Beta0) -> DriveState {
        let b = solve_classical(s, window, InitialData::default(), 1e-12).unwrap();
        let inv = build_invariant(&b, CConstants::default_for(&b)).unwrap();
        solve_beta(&inv, s, beta0).unwrap()
    }

    #[test]
    fn h_coefficients_examples() {
        let s = make_preset(Preset::C, &consts(&[("m", 1.0), ("omega", 3.0), ("F0", 0.7), ("omega_e", 2.0)])).unwrap();
        let ds = drive(&s, (0.0, 1.0), Beta0::Zero);
        let h = h_coefficients(ds.invariant(), &s, 0.5).unwrap();
        assert!((h.h0 - 6.0).abs() < 1e-9);
        assert!(h.h_minus.norm() < 1e-9);

        let s = ParameterSchedule::constant(1.0, 1.0);
        let ds = drive(&s, (0.0, 1.0), Beta0::Zero);
        let h = h_coefficients(ds.invariant(), &s, 0.3).unwrap();
        assert!((h.h0 - 2.0).abs() < 1e-10);
        assert!(h.h_plus.norm() < 1e-10 && h.h_minus.norm() < 1e-10);
    }

    #[test]
    fn h_plus_is_conjugate_of_h_minus() {
        let c = consts(&[("m0", 1.0), ("Omega", 1.0), ("gamma", 0.05), ("mu", 0.3), ("nu", 1.5)]);
        let s = make_preset(Preset::D, &c).unwrap();
        let ds = drive(&s, (0.0, 4.0), Beta0::Zero);
        for t in [0.3, 2.0, 3.9] {
            let h = h_coefficients(ds.invariant(), &s, t).unwrap();
            assert!((h.h_plus - h.h_minus.conj()).norm() < 1e-14);
        }
    }

    #[test]
    fn quadratic_energy_matches_h_form() {
        // ⟨H_T⟩ of a level equals (n+½)h₀/2 + (h₀/2)|β|² + Re(h₋β²) − 2 Re(iW*β)
        let c = consts(&[("m0", 1.0), ("Omega", 1.0), ("gamma", 0.05), ("mu", 0.3), ("nu", 1.5), ("F0", 0.4)]);
        let s = make_preset(Preset::D, &c).unwrap();
        let ds = drive(&s, (0.0, 4.0), Beta0::Value(Complex64::new(0.2, 0.4)));
        for (n, t) in [(0, 0.7), (2, 3.1)] {
            let h = h_coefficients(ds.invariant(), &s, t).unwrap();
            let beta = ds.beta(t).unwrap();
            let w = ds.w(t).unwrap();
            let predicted = (n as f64 + 0.5) * h.h0 / 2.0
                + 0.5 * h.h0 * beta.norm_sqr()
                + (h.h_minus * beta * beta).re
                + (Complex64::i() * w.conj() * beta * 2.0).re;
            let grid = energy_expectation(n, &ds, t).unwrap();
            assert!((grid - predicted).abs() < 1e-7 * predicted.abs().max(1.0), "{grid} vs {predicted}");
        }
    }

    #[test]
    fn example_a_is_cyclic_with_zero_phase() {
        let s = make_preset(Preset::A, &consts(&[("m", 1.0), ("omega0", 1.0), ("F0", 0.5)])).unwrap();
        let tau = 2.0 * PI;
        let ds = drive(&s, (0.0, 2.0 * tau), Beta0::Comoving);
        let r = analyze(&ds, tau, 0.0, &[0, 1]).unwrap();
        assert!(r.is_cis, "{r:?}");
        assert_eq!(r.winding, 1);
        for b in &r.per_n {
            assert!(b.gamma.abs() < 1e-8, "{b:?}");
            assert!(b.gamma_reconstructed.abs() < 1e-6, "{b:?}");
        }
    }

    #[test]
    fn example_b_has_no_cis() {
        let s = make_preset(Preset::B, &consts(&[("m", 1.0), ("omega", 2.0), ("gamma", 0.1)])).unwrap();
        let tau = 2.0 * PI / (4.0f64 - 0.01).sqrt();
        let ds = drive(&s, (0.0, 2.0 * tau), Beta0::Zero);
        let r = cis_conditions(&ds, tau, 0.0).unwrap();
        assert!(!r.is_cis);
        assert_eq!(r.reason.as_deref(), Some(REASON_G_MINUS));
        assert!(matches!(berry_phase(0, &ds, tau, 0.0), Err(Error::Cyclic(_))));
        assert!(cis_conditions(&ds, -1.0, 0.0).is_err());
    }

    #[test]
    fn cis_quantities_do_not_depend_on_beta0() {
        let s = make_preset(Preset::C, &consts(&[("m", 1.0), ("omega", 3.0), ("F0", 0.7), ("omega_e", 2.0)])).unwrap();
        let tau = 2.0 * PI;
        let a = cis_conditions(&drive(&s, (0.0, 2.0 * tau), Beta0::Zero), tau, 0.0).unwrap();
        let b = cis_conditions(&drive(&s, (0.0, 2.0 * tau), Beta0::Value(Complex64::new(1.0, -2.0))), tau, 0.0).unwrap();
        assert_eq!(a.theta0, b.theta0);
        assert_eq!(a.sigma0, b.sigma0);
        // start invariance of θ₀
        let c = cis_conditions(&drive(&s, (0.0, 2.0 * tau), Beta0::Zero), tau, 1.3).unwrap();
        assert!((c.theta0 - a.theta0).abs() < 1e-9);
    }

    fn example_c(beta0: Beta0) -> (DriveState, f64) {
        let c = consts(&[("m", 1.0), ("omega", 3.0), ("F0", 0.7), ("r", 3.0), ("r_e", 2.0)]);
        let s = make_preset(Preset::C, &c).unwrap();
        let tau = 2.0 * PI;
        (drive(&s, (0.0, 2.0 * tau), beta0), tau)
    }

    /// Closed-form Berry phase of the sinusoidally forced oscillator.
    fn example_c_gamma(beta0: Complex64) -> f64 {
        let (m, w, we, f0, r) = (1.0, 3.0, 2.0, 0.7, 3.0);
        let d = w * w - we * we;
        let cross = (f0 * (beta0 - beta0.conj()) * we / (Complex64::i() * (2.0 * m * w).sqrt() * d)).re;
        2.0 * PI * r * (beta0.norm_sqr() + cross + f0 * f0 / (2.0 * m * w) * ((w * w + we * we) / (d * d) - 1.0 / d))
    }

    #[test]
    fn example_c_berry_phase_matches_closed_form() {
        let (ds, tau) = example_c(Beta0::Zero);
        let r = analyze(&ds, tau, 0.0, &[0, 3]).unwrap();
        assert!(r.is_cis, "{r:?}");
        let (m, w, we, f0, rr) = (1.0, 3.0, 2.0, 0.7, 3.0);
        let d: f64 = w * w - we * we;
        let scale = 2.0 * PI * rr * f0 * f0 / (2.0 * m * w);
        let p = &r.per_n[0].partials;
        assert!((p.h0_term - scale * ((w * w + we * we) / (d * d) - 0.5 / d)).abs() < 1e-9);
        assert!((p.xi_term + scale / d).abs() < 1e-9);
        assert!((p.zeta_term - scale / (2.0 * d)).abs() < 1e-9);
        assert!(p.level_integral.abs() < 1e-12);
        for b in &r.per_n {
            assert!((b.gamma - example_c_gamma(Complex64::new(0.0, 0.0))).abs() < 1e-8);
            assert!(b.discrepancy < 1e-7, "{b:?}");
        }

        let beta0 = Complex64::new(0.1, 0.2);
        let (ds, tau) = example_c(Beta0::Value(beta0));
        let b = berry_phase(1, &ds, tau, 0.0).unwrap();
        let expect = example_c_gamma(beta0);
        assert!((b.gamma - expect).abs() < 1e-8 * expect.abs(), "{} vs {expect}", b.gamma);
        assert!(b.discrepancy < 1e-7);
    }

    #[test]
    fn irrational_frequency_ratio_is_never_cyclic() {
        let s = make_preset(Preset::C, &consts(&[("m", 1.0), ("omega", 1.0), ("F0", 0.5), ("irrational", 1.0)])).unwrap();
        let ds = drive(&s, (0.0, 40.0), Beta0::Zero);
        for k in 1..=3 {
            for tau in [2.0 * PI * k as f64, 2.0 * PI * k as f64 / 2f64.sqrt()] {
                let r = cis_conditions(&ds, tau, 0.0).unwrap();
                assert!(!r.is_cis, "τ = {tau}: {r:?}");
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(6))]

            #[test]
            fn berry_phase_is_independent_of_level(n in 0usize..6, re in -0.5f64..0.5, im in -0.5f64..0.5) {
                let (ds, tau) = example_c(Beta0::Value(Complex64::new(re, im)));
                let g0 = berry_phase(0, &ds, tau, 0.0).unwrap().gamma;
                let gn = berry_phase(n, &ds, tau, 0.0).unwrap().gamma;
                prop_assert!((g0 - gn).abs() < 1e-10 * g0.abs().max(1.0));
            }

            #[test]
            fn theta0_is_start_invariant(t_start in 0.0f64..6.0) {
                let (ds, tau) = example_c(Beta0::Zero);
                let r = cis_conditions(&ds, tau, t_start).unwrap();
                prop_assert!((r.theta0 - 3.0 * tau).abs() < 1e-8);
                prop_assert!(r.is_cis);
            }

            #[test]
            fn theta0_ignores_beta0(re in -2.0f64..2.0, im in -2.0f64..2.0) {
                let (a, tau) = example_c(Beta0::Zero);
                let (b, _) = example_c(Beta0::Value(Complex64::new(re, im)));
                let ra = cis_conditions(&a, tau, 0.0).unwrap();
                let rb = cis_conditions(&b, tau, 0.0).unwrap();
                prop_assert_eq!(ra.theta0, rb.theta0);
                prop_assert_eq!(ra.sigma0, rb.sigma0);
            }
        }
    }
}

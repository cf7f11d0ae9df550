//! Time-dependent coefficients of the quadratic Hamiltonian
//!
//! ```text
//! H_T = p²/(2M) + (Y/2)(pq + qp) + (M ω²/2) q² − F q − G p      (ħ = 1)
//! ```
//!
//! A [`ParameterSchedule`] bundles the five coefficient profiles. Each profile
//! exposes its value and first derivative; the classical equation of motion
//! needs `Ṁ` and `Ẏ` explicitly.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative tolerance used when checking declared periodicity.
pub const DEFAULT_PERIOD_TOL: f64 = 1e-9;

pub trait Profile: Send + Sync + fmt::Debug {
    fn value(&self, t: f64) -> f64;
    fn derivative(&self, t: f64) -> f64;
    /// Defaults to a central difference of [`Profile::derivative`].
    fn second_derivative(&self, t: f64) -> f64 {
        let h = 1e-5 * (1.0 + t.abs());
        (self.derivative(t + h) - self.derivative(t - h)) / (2.0 * h)
    }
}

pub type SharedProfile = Arc<dyn Profile>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constant(pub f64);

impl Profile for Constant {
    fn value(&self, _t: f64) -> f64 {
        self.0
    }
    fn derivative(&self, _t: f64) -> f64 {
        0.0
    }
    fn second_derivative(&self, _t: f64) -> f64 {
        0.0
    }
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Closed-form profile with exact derivatives.
#[derive(Clone)]
pub struct Analytic {
    name: String,
    f: RealFn,
    df: RealFn,
    d2f: RealFn,
}

impl Analytic {
    pub fn new<F, D, D2>(name: impl Into<String>, f: F, df: D, d2f: D2) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
        D2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self { name: name.into(), f: Arc::new(f), df: Arc::new(df), d2f: Arc::new(d2f) }
    }
}

impl fmt::Debug for Analytic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Analytic({})", self.name)
    }
}

impl Profile for Analytic {
    fn value(&self, t: f64) -> f64 {
        (self.f)(t)
    }
    fn derivative(&self, t: f64) -> f64 {
        (self.df)(t)
    }
    fn second_derivative(&self, t: f64) -> f64 {
        (self.d2f)(t)
    }
}

/// Natural cubic spline through user-supplied samples.
#[derive(Clone, Debug)]
pub struct CubicSpline {
    t: Vec<f64>,
    v: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn natural(t: &[f64], v: &[f64]) -> Result<Self> {
        let n = t.len();
        if n < 2 || n != v.len() {
            return Err(Error::Schedule(format!(
                "table needs matching time/value arrays of length >= 2 (got {} and {})",
                n,
                v.len()
            )));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Schedule("table times must be strictly increasing".into()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Schedule("table values must be finite".into()));
        }
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior knots.
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                let h0 = t[i + 1] - t[i];
                let h1 = t[i + 2] - t[i + 1];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((v[i + 2] - v[i + 1]) / h1 - (v[i + 1] - v[i]) / h0);
            }
            for i in 1..k {
                let lower = t[i + 1] - t[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Ok(Self { t: t.to_vec(), v: v.to_vec(), m })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.t[0], *self.t.last().unwrap())
    }

    fn segment(&self, x: f64) -> usize {
        self.t.partition_point(|&k| k <= x).saturating_sub(1).min(self.t.len() - 2)
    }
}

impl Profile for CubicSpline {
    fn value(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.t[i + 1] - self.t[i];
        let a = (self.t[i + 1] - x) / h;
        let b = (x - self.t[i]) / h;
        a * self.v[i]
            + b * self.v[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
    fn derivative(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.t[i + 1] - self.t[i];
        let a = (self.t[i + 1] - x) / h;
        let b = (x - self.t[i]) / h;
        (self.v[i + 1] - self.v[i]) / h
            + ((1.0 - 3.0 * a * a) * self.m[i] + (3.0 * b * b - 1.0) * self.m[i + 1]) * h / 6.0
    }
    fn second_derivative(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.t[i + 1] - self.t[i];
        let a = (self.t[i + 1] - x) / h;
        let b = (x - self.t[i]) / h;
        a * self.m[i] + b * self.m[i + 1]
    }
}

/// The five coefficient profiles of one scenario.
#[derive(Clone, Debug)]
pub struct ParameterSchedule {
    pub mass: SharedProfile,
    pub cross: SharedProfile,
    pub omega_sq: SharedProfile,
    pub force: SharedProfile,
    pub momentum_drive: SharedProfile,
    pub period: Option<f64>,
    pub t0: f64,
    pub label: String,
}

impl ParameterSchedule {
    pub fn constant(m: f64, omega_sq: f64) -> Self {
        Self {
            mass: Arc::new(Constant(m)),
            cross: Arc::new(Constant(0.0)),
            omega_sq: Arc::new(Constant(omega_sq)),
            force: Arc::new(Constant(0.0)),
            momentum_drive: Arc::new(Constant(0.0)),
            period: None,
            t0: 0.0,
            label: "constant".into(),
        }
    }

    pub fn m(&self, t: f64) -> f64 {
        self.mass.value(t)
    }
    pub fn m_dot(&self, t: f64) -> f64 {
        self.mass.derivative(t)
    }
    pub fn y(&self, t: f64) -> f64 {
        self.cross.value(t)
    }
    pub fn y_dot(&self, t: f64) -> f64 {
        self.cross.derivative(t)
    }
    pub fn omega_sq(&self, t: f64) -> f64 {
        self.omega_sq.value(t)
    }
    pub fn f(&self, t: f64) -> f64 {
        self.force.value(t)
    }
    pub fn g(&self, t: f64) -> f64 {
        self.momentum_drive.value(t)
    }

    /// Same quadratic part with both linear drives switched off.
    pub fn undriven(&self) -> Self {
        Self {
            force: Arc::new(Constant(0.0)),
            momentum_drive: Arc::new(Constant(0.0)),
            label: format!("{} (undriven)", self.label),
            ..self.clone()
        }
    }

    pub fn with_drives(&self, force: SharedProfile, momentum_drive: SharedProfile) -> Self {
        Self { force, momentum_drive, ..self.clone() }
    }

    pub fn with_period(mut self, period: Option<f64>) -> Self {
        self.period = period;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Coefficient of `f` in the classical equation of motion
    /// `M f̈ + Ṁ ḟ + k f = 0`.
    pub fn eom_stiffness(&self, t: f64) -> f64 {
        let (m, md, y, yd) = (self.m(t), self.m_dot(t), self.y(t), self.y_dot(t));
        m * self.omega_sq(t) - m * y * y - md * y - m * yd
    }

    fn profiles(&self) -> [(&'static str, &SharedProfile); 5] {
        [
            ("M", &self.mass),
            ("Y", &self.cross),
            ("omega_sq", &self.omega_sq),
            ("F", &self.force),
            ("G", &self.momentum_drive),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub invariant: String,
    pub t: f64,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violated at t = {}: {}", self.invariant, self.t, self.detail)
    }
}

/// Check the schedule invariants on an `n_check`-point uniform grid.
/// Violations are returned as data.
pub fn validate(sched: &ParameterSchedule, window: (f64, f64), n_check: usize) -> Vec<Violation> {
    validate_with(sched, window, n_check, DEFAULT_PERIOD_TOL)
}

pub fn validate_with(
    sched: &ParameterSchedule,
    window: (f64, f64),
    n_check: usize,
    tol_per: f64,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let (a, b) = window;
    if !(b > a) || n_check < 2 {
        out.push(Violation {
            invariant: "check grid".into(),
            t: a,
            detail: format!("window [{a}, {b}] with {n_check} points is not a valid grid"),
        });
        return out;
    }
    for k in 0..n_check {
        let t = a + (b - a) * k as f64 / (n_check - 1) as f64;
        let m = sched.m(t);
        let w2 = sched.omega_sq(t);
        let y = sched.y(t);
        for (name, p) in sched.profiles() {
            if !p.value(t).is_finite() || !p.derivative(t).is_finite() {
                out.push(Violation {
                    invariant: format!("{name} finite"),
                    t,
                    detail: format!("{name}(t) = {}", p.value(t)),
                });
            }
        }
        if !(m > 0.0) {
            out.push(Violation { invariant: "M>0".into(), t, detail: format!("M = {m}") });
        }
        if !(w2 - y * y > 0.0) {
            out.push(Violation {
                invariant: "ω²−Y²>0".into(),
                t,
                detail: format!("ω² = {w2}, Y = {y}, ω²−Y² = {}", w2 - y * y),
            });
        }
        if let Some(tau) = sched.period {
            for (name, p) in sched.profiles() {
                let now = p.value(t);
                let later = p.value(t + tau);
                if (later - now).abs() > tol_per * (1.0 + now.abs()) {
                    out.push(Violation {
                        invariant: format!("{name} τ-periodic"),
                        t,
                        detail: format!("{name}(t) = {now}, {name}(t+τ) = {later}, τ = {tau}"),
                    });
                }
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SCoefficients {
    pub s1: Complex64,
    pub s2: f64,
    pub s3: Complex64,
}

/// `H_T` rewritten with the instantaneous ladder operators `a, a†` of
/// frequency `ω(t)`:
/// `H_T = s₁a² + s₁* a†² + s₂(a†a + aa†) + s₃a† + s₃* a`.
#[derive(Clone, Debug)]
pub struct SRepresentation {
    schedule: ParameterSchedule,
}

pub fn to_s_representation(sched: &ParameterSchedule) -> SRepresentation {
    SRepresentation { schedule: sched.clone() }
}

impl SRepresentation {
    pub fn at(&self, t: f64) -> Result<SCoefficients> {
        let s = &self.schedule;
        let w2 = s.omega_sq(t);
        if !(w2 > 0.0) {
            return Err(Error::Schedule(format!("ω²(t) = {w2} <= 0 at t = {t}")));
        }
        let w = w2.sqrt();
        let m = s.m(t);
        let s3 = Complex64::new(-s.f(t), m * w * s.g(t)) / (2.0 * m * w).sqrt();
        Ok(SCoefficients { s1: Complex64::new(0.0, -0.5 * s.y(t)), s2: 0.5 * w, s3 })
    }
}

/// Named constants supplied to a preset.
pub type Constants = BTreeMap<String, f64>;

/// The four closed-form example families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Preset {
    /// Constant oscillator with a constant force.
    A,
    /// Caldirola–Kanai oscillator with an external force.
    B,
    /// Undamped oscillator driven by `F₀ sin(ω_e t)`.
    C,
    /// Damped pulsating oscillator.
    D,
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Preset::A),
            "B" => Ok(Preset::B),
            "C" => Ok(Preset::C),
            "D" => Ok(Preset::D),
            _ => Err(Error::UnknownPreset(s.to_string())),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::A => "A",
            Preset::B => "B",
            Preset::C => "C",
            Preset::D => "D",
        })
    }
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::A, Preset::B, Preset::C, Preset::D];

    pub fn description(self) -> &'static str {
        match self {
            Preset::A => "constant oscillator with constant force F0",
            Preset::B => "Caldirola-Kanai oscillator, M = m e^{2 gamma t}, force f0 sin(omega_f t)",
            Preset::C => "undamped oscillator driven by F0 sin(omega_e t)",
            Preset::D => "damped pulsating oscillator, M = m0 e^{2(gamma t + mu sin nu t)}",
        }
    }

    pub fn required(self) -> &'static [&'static str] {
        match self {
            Preset::A => &["m", "omega0", "F0"],
            Preset::B => &["m", "omega", "gamma"],
            Preset::C => &["m", "omega", "F0", "omega_e"],
            Preset::D => &["m0", "Omega", "gamma", "mu", "nu"],
        }
    }

    pub fn optional(self) -> &'static [&'static str] {
        match self {
            Preset::A => &[],
            Preset::B => &["f0", "omega_f"],
            // omega_e may instead come from the integer pair (r, r_e) or the
            // `irrational` flag (omega_e = sqrt(2) omega).
            Preset::C => &["r", "r_e", "irrational"],
            Preset::D => &["F0", "omega_f"],
        }
    }

    /// Time window over which the preset is exercised by default.
    pub fn natural_window(self, c: &Constants) -> Result<(f64, f64)> {
        let c = normalize(c);
        Ok(match self {
            Preset::A => (0.0, 4.0 * PI / get(&c, self, "omega0")?),
            Preset::B => {
                let gamma = get(&c, self, "gamma")?;
                let omega = get(&c, self, "omega")?;
                if gamma > 0.0 {
                    (0.0, 5.0 / gamma)
                } else {
                    (0.0, 4.0 * PI / omega)
                }
            }
            Preset::C => {
                let tau = self.cyclic_period(&c)?.unwrap_or(2.0 * PI / omega_e(&c)?);
                (0.0, 2.0 * tau)
            }
            Preset::D => (0.0, 4.0 * PI / get(&c, self, "Omega")?),
        })
    }

    /// Candidate period of a cyclic initial state, when the preset constants
    /// fix one exactly.
    pub fn cyclic_period(self, c: &Constants) -> Result<Option<f64>> {
        let c = normalize(c);
        Ok(match self {
            Preset::A => Some(2.0 * PI / get(&c, self, "omega0")?),
            Preset::C => {
                if c.contains_key("omega_e") {
                    None
                } else if let (Some(&r), Some(_)) = (c.get("r"), c.get("r_e")) {
                    Some(2.0 * PI * r / get(&c, self, "omega")?)
                } else {
                    None
                }
            }
            Preset::B | Preset::D => None,
        })
    }

    /// Period of the characteristic motion, used for default propagation
    /// lengths.
    pub fn characteristic_period(self, c: &Constants) -> Result<f64> {
        let c = normalize(c);
        Ok(match self {
            Preset::A => 2.0 * PI / get(&c, self, "omega0")?,
            Preset::B => {
                let w = get(&c, self, "omega")?;
                let g = get(&c, self, "gamma")?;
                2.0 * PI / (w * w - g * g).sqrt()
            }
            Preset::C => 2.0 * PI / get(&c, self, "omega")?,
            Preset::D => 2.0 * PI / get(&c, self, "Omega")?,
        })
    }
}

/// Map the Greek spellings and subscripted forms onto the ASCII names
/// used by the presets.
pub fn normalize(c: &Constants) -> Constants {
    c.iter()
        .map(|(k, v)| {
            let key = match k.as_str() {
                "ω₀" | "ω0" | "omega_0" => "omega0",
                "F₀" | "F_0" => "F0",
                "ω" => "omega",
                "γ" => "gamma",
                "ω_e" | "ωe" | "omega_e" => "omega_e",
                "m₀" | "m_0" => "m0",
                "Ω" => "Omega",
                "μ" => "mu",
                "ν" => "nu",
                "f₀" | "f_0" => "f0",
                "ω_f" => "omega_f",
                "r_e" | "rₑ" => "r_e",
                other => other,
            };
            (key.to_string(), *v)
        })
        .collect()
}

fn get(c: &Constants, preset: Preset, name: &'static str) -> Result<f64> {
    let v = *c.get(name).ok_or(Error::MissingConstant { preset: preset_name(preset), name })?;
    if !v.is_finite() {
        return Err(Error::InvalidParameter { name: name.into(), reason: format!("{v} is not finite") });
    }
    Ok(v)
}

fn preset_name(p: Preset) -> &'static str {
    match p {
        Preset::A => "A",
        Preset::B => "B",
        Preset::C => "C",
        Preset::D => "D",
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidParameter { name: name.into(), reason: format!("must be positive, got {v}") })
    }
}

fn omega_e(c: &Constants) -> Result<f64> {
    let omega = get(c, Preset::C, "omega")?;
    if let Some(&we) = c.get("omega_e") {
        return Ok(we);
    }
    if let (Some(&r), Some(&re)) = (c.get("r"), c.get("r_e")) {
        for (name, v) in [("r", r), ("r_e", re)] {
            if !(v >= 1.0 && v.fract() == 0.0) {
                return Err(Error::InvalidParameter { name: name.into(), reason: "must be a positive integer".into() });
            }
        }
        return Ok(omega * re / r);
    }
    if c.get("irrational").copied().unwrap_or(0.0) != 0.0 {
        return Ok(omega * 2f64.sqrt());
    }
    Err(Error::MissingConstant { preset: "C", name: "omega_e" })
}

/// Build one of the example schedules.
///
/// All presets store the drives in the `−F q − G p` convention of `H_T`:
///
/// * A: `M = m`, `ω² = ω₀²`, `F = F₀`.
/// * B: the Hamiltonian `p²/(2m e^{2γt}) + e^{2γt}(mω²q²/2 + f(t) q)` with
///   `f(t) = f0 sin(ω_f t)`, so `M = m e^{2γt}` and `F = −e^{2γt} f(t)`.
/// * C: B with `γ = 0` and `f(t) = −F₀ sin(ω_e t)`, i.e. `F = F₀ sin(ω_e t)`.
/// * D: `M = m₀ e^{2(γt + μ sin νt)}`, `ω² = Ω² + (√M)''/√M`,
///   `F = F0 sin(ω_f t)`.
pub fn make_preset(preset: Preset, constants: &Constants) -> Result<ParameterSchedule> {
    let c = normalize(constants);
    let mut sched = match preset {
        Preset::A => {
            let m = positive("m", get(&c, preset, "m")?)?;
            let w0 = positive("omega0", get(&c, preset, "omega0")?)?;
            let f0 = get(&c, preset, "F0")?;
            ParameterSchedule {
                force: Arc::new(Constant(f0)),
                period: Some(2.0 * PI / w0),
                ..ParameterSchedule::constant(m, w0 * w0)
            }
        }
        Preset::B => {
            let m = positive("m", get(&c, preset, "m")?)?;
            let w = positive("omega", get(&c, preset, "omega")?)?;
            let gamma = get(&c, preset, "gamma")?;
            if gamma.abs() >= w {
                return Err(Error::InvalidParameter {
                    name: "gamma".into(),
                    reason: format!("|gamma| must be below omega = {w} (underdamped)"),
                });
            }
            let f0 = c.get("f0").copied().unwrap_or(0.0);
            let wf = c.get("omega_f").copied().unwrap_or(1.0);
            let mass = Analytic::new(
                "m e^{2 gamma t}",
                move |t| m * (2.0 * gamma * t).exp(),
                move |t| 2.0 * gamma * m * (2.0 * gamma * t).exp(),
                move |t| 4.0 * gamma * gamma * m * (2.0 * gamma * t).exp(),
            );
            let force = Analytic::new(
                "-e^{2 gamma t} f0 sin(omega_f t)",
                move |t| -(2.0 * gamma * t).exp() * f0 * (wf * t).sin(),
                move |t| {
                    -(2.0 * gamma * t).exp() * f0 * (2.0 * gamma * (wf * t).sin() + wf * (wf * t).cos())
                },
                move |t| {
                    let e = (2.0 * gamma * t).exp();
                    let (s, co) = (wf * t).sin_cos();
                    -e * f0 * ((4.0 * gamma * gamma - wf * wf) * s + 4.0 * gamma * wf * co)
                },
            );
            let period = if gamma == 0.0 { Some(2.0 * PI / if f0 != 0.0 { wf } else { w }) } else { None };
            ParameterSchedule {
                mass: Arc::new(mass),
                force: Arc::new(force),
                period,
                ..ParameterSchedule::constant(m, w * w)
            }
        }
        Preset::C => {
            let m = positive("m", get(&c, preset, "m")?)?;
            let w = positive("omega", get(&c, preset, "omega")?)?;
            let f0 = get(&c, preset, "F0")?;
            let we = omega_e(&c)?;
            if we == 0.0 {
                return Err(Error::InvalidParameter { name: "omega_e".into(), reason: "must be non-zero".into() });
            }
            let force = Analytic::new(
                "F0 sin(omega_e t)",
                move |t| f0 * (we * t).sin(),
                move |t| f0 * we * (we * t).cos(),
                move |t| -f0 * we * we * (we * t).sin(),
            );
            ParameterSchedule {
                force: Arc::new(force),
                period: Some(2.0 * PI / we.abs()),
                ..ParameterSchedule::constant(m, w * w)
            }
        }
        Preset::D => {
            let m0 = positive("m0", get(&c, preset, "m0")?)?;
            let big = positive("Omega", get(&c, preset, "Omega")?)?;
            let gamma = get(&c, preset, "gamma")?;
            let mu = get(&c, preset, "mu")?;
            let nu = get(&c, preset, "nu")?;
            let f0 = c.get("F0").copied().unwrap_or(0.0);
            let wf = c.get("omega_f").copied().unwrap_or(1.0);
            // rate(t) = d/dt ln √M = γ + μν cos νt
            let rate = move |t: f64| gamma + mu * nu * (nu * t).cos();
            let rate_dot = move |t: f64| -mu * nu * nu * (nu * t).sin();
            let rate_ddot = move |t: f64| -mu * nu * nu * nu * (nu * t).cos();
            let mass_of = move |t: f64| m0 * (2.0 * (gamma * t + mu * (nu * t).sin())).exp();
            let mass = Analytic::new(
                "m0 e^{2(gamma t + mu sin nu t)}",
                mass_of,
                move |t| 2.0 * rate(t) * mass_of(t),
                move |t| (2.0 * rate_dot(t) + 4.0 * rate(t) * rate(t)) * mass_of(t),
            );
            let omega_sq = Analytic::new(
                "Omega^2 + (sqrt M)''/sqrt M",
                move |t| big * big + rate_dot(t) + rate(t) * rate(t),
                move |t| rate_ddot(t) + 2.0 * rate(t) * rate_dot(t),
                move |t| {
                    let r3 = mu * nu.powi(4) * (nu * t).sin();
                    r3 + 2.0 * rate_dot(t) * rate_dot(t) + 2.0 * rate(t) * rate_ddot(t)
                },
            );
            let force = Analytic::new(
                "F0 sin(omega_f t)",
                move |t| f0 * (wf * t).sin(),
                move |t| f0 * wf * (wf * t).cos(),
                move |t| -f0 * wf * wf * (wf * t).sin(),
            );
            let period = if gamma == 0.0 && f0 == 0.0 && nu != 0.0 { Some(2.0 * PI / nu.abs()) } else { None };
            ParameterSchedule {
                mass: Arc::new(mass),
                omega_sq: Arc::new(omega_sq),
                force: Arc::new(force),
                period,
                ..ParameterSchedule::constant(m0, big * big)
            }
        }
    };
    sched.label = format!("preset {preset}");
    Ok(sched)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consts(pairs: &[(&str, f64)]) -> Constants {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn preset_a_is_constant() {
        let s = make_preset(Preset::A, &consts(&[("m", 1.0), ("ω₀", 1.0), ("F₀", 0.5)])).unwrap();
        for t in [0.0, 1.3, 7.0] {
            assert_eq!(s.m(t), 1.0);
            assert_eq!(s.omega_sq(t), 1.0);
            assert_eq!(s.f(t), 0.5);
            assert_eq!(s.y(t), 0.0);
            assert_eq!(s.g(t), 0.0);
        }
    }

    #[test]
    fn preset_b_mass_grows() {
        let s = make_preset(Preset::B, &consts(&[("m", 1.0), ("omega", 2.0), ("gamma", 0.1)])).unwrap();
        for t in [0.0, 0.5, 3.0] {
            assert!((s.m(t) - (0.2 * t).exp()).abs() < 1e-15 * s.m(t));
            assert!((s.m_dot(t) - 0.2 * (0.2 * t).exp()).abs() < 1e-14);
            assert_eq!(s.omega_sq(t), 4.0);
        }
    }

    #[test]
    fn preset_d_degenerate_limit_is_constant() {
        let c = consts(&[("m0", 1.0), ("Omega", 1.0), ("gamma", 0.0), ("mu", 0.0), ("nu", 1.0)]);
        let s = make_preset(Preset::D, &c).unwrap();
        for t in [0.0, 0.9, 4.0] {
            assert_eq!(s.m(t), 1.0);
            assert_eq!(s.m_dot(t), 0.0);
            assert_eq!(s.omega_sq(t), 1.0);
        }
    }

    #[test]
    fn preset_d_frequency_uses_second_derivative_of_root_mass() {
        let c = consts(&[("m0", 1.3), ("Omega", 1.0), ("gamma", 0.05), ("mu", 0.2), ("nu", 2.0)]);
        let s = make_preset(Preset::D, &c).unwrap();
        for t in [0.1, 1.7, 3.3] {
            let h = 1e-4;
            let root = |x: f64| s.m(x).sqrt();
            let dd = (root(t + h) - 2.0 * root(t) + root(t - h)) / (h * h);
            assert!((s.omega_sq(t) - (1.0 + dd / root(t))).abs() < 1e-6);
            let dm = (s.m(t + h) - s.m(t - h)) / (2.0 * h);
            assert!((s.m_dot(t) - dm).abs() < 1e-7);
            let dw = (s.omega_sq(t + h) - s.omega_sq(t - h)) / (2.0 * h);
            assert!((s.omega_sq.derivative(t) - dw).abs() < 1e-6);
            let d2m = (s.m_dot(t + h) - s.m_dot(t - h)) / (2.0 * h);
            assert!((s.mass.second_derivative(t) - d2m).abs() < 1e-6);
        }
    }

    #[test]
    fn preset_errors() {
        assert!(matches!("Q".parse::<Preset>(), Err(Error::UnknownPreset(_))));
        assert!(matches!(
            make_preset(Preset::A, &consts(&[("m", 1.0), ("omega0", 1.0)])),
            Err(Error::MissingConstant { name: "F0", .. })
        ));
        assert!(matches!(
            make_preset(Preset::A, &consts(&[("m", -1.0), ("omega0", 1.0), ("F0", 0.0)])),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn validation_catches_inverted_frequency() {
        let mut s = ParameterSchedule::constant(1.0, 1.0);
        s.cross = Arc::new(Constant(2.0));
        let v = validate(&s, (0.0, 1.0), 10);
        assert_eq!(v.len(), 10);
        assert!(v.iter().all(|x| x.invariant == "ω²−Y²>0"));
    }

    #[test]
    fn presets_validate_on_natural_windows() {
        let b = consts(&[("m", 1.0), ("omega", 2.0), ("gamma", 0.1)]);
        let s = make_preset(Preset::B, &b).unwrap();
        assert!(validate(&s, (0.0, 10.0), 100).is_empty());
        let c = consts(&[("m", 1.0), ("omega", 3.0), ("F0", 0.7), ("omega_e", 2.0)]);
        let s = make_preset(Preset::C, &c).unwrap();
        assert_eq!(s.period, Some(PI));
        assert!(validate(&s, (0.0, 10.0), 50).is_empty());
    }

    #[test]
    fn wrong_period_is_flagged() {
        let c = consts(&[("m", 1.0), ("omega", 3.0), ("F0", 0.7), ("omega_e", 2.0)]);
        let s = make_preset(Preset::C, &c).unwrap().with_period(Some(1.0));
        assert!(validate(&s, (0.0, 3.0), 20).iter().any(|v| v.invariant == "F τ-periodic"));
    }

    #[test]
    fn ratio_and_irrational_forms_of_preset_c() {
        let c = consts(&[("m", 1.0), ("omega", 3.0), ("F0", 0.7), ("r", 3.0), ("r_e", 2.0)]);
        let s = make_preset(Preset::C, &c).unwrap();
        assert!((s.period.unwrap() - PI).abs() < 1e-15);
        assert!((Preset::C.cyclic_period(&c).unwrap().unwrap() - 2.0 * PI).abs() < 1e-15);
        let c = consts(&[("m", 1.0), ("omega", 1.0), ("F0", 0.7), ("irrational", 1.0)]);
        let s = make_preset(Preset::C, &c).unwrap();
        assert!((s.period.unwrap() - 2.0 * PI / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn s_representation_examples() {
        let s = ParameterSchedule::constant(2.0, 9.0);
        let r = to_s_representation(&s).at(0.3).unwrap();
        assert_eq!(r.s1, Complex64::new(0.0, 0.0));
        assert_eq!(r.s3, Complex64::new(0.0, 0.0));
        assert_eq!(r.s2, 1.5);

        let a = make_preset(Preset::A, &consts(&[("m", 1.0), ("omega0", 1.0), ("F0", 0.5)])).unwrap();
        let r = to_s_representation(&a).at(2.0).unwrap();
        assert!((r.s3 - Complex64::new(-0.5 / 2f64.sqrt(), 0.0)).norm() < 1e-15);

        let mut bad = ParameterSchedule::constant(1.0, -1.0);
        bad.label = "bad".into();
        assert!(to_s_representation(&bad).at(0.0).is_err());
    }

    #[test]
    fn spline_reproduces_cubic_data_interior() {
        let t: Vec<f64> = (0..=40).map(|k| k as f64 * 0.1).collect();
        let v: Vec<f64> = t.iter().map(|x| (1.3 * x).sin()).collect();
        let s = CubicSpline::natural(&t, &v).unwrap();
        for x in [0.55, 1.23, 2.9] {
            assert!((s.value(x) - (1.3 * x).sin()).abs() < 1e-4);
            assert!((s.derivative(x) - 1.3 * (1.3 * x).cos()).abs() < 1e-3);
        }
        for (x, y) in t.iter().zip(&v) {
            assert!((s.value(*x) - y).abs() < 1e-14);
        }
        assert!(CubicSpline::natural(&[0.0, 0.0], &[1.0, 2.0]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn s3_linear_in_drives(m in 0.2f64..5.0, w in 0.2f64..4.0, f in -3.0f64..3.0, g in -3.0f64..3.0, y in -0.1f64..0.1, t in -2.0f64..2.0) {
                let mut s = ParameterSchedule::constant(m, w * w);
                s.cross = Arc::new(Constant(y));
                let one = s.with_drives(Arc::new(Constant(f)), Arc::new(Constant(g)));
                let two = s.with_drives(Arc::new(Constant(2.0 * f)), Arc::new(Constant(2.0 * g)));
                let a = to_s_representation(&one).at(t).unwrap();
                let b = to_s_representation(&two).at(t).unwrap();
                prop_assert_eq!(b.s3, a.s3 * 2.0);
                prop_assert!((a.s1.norm() - y.abs() / 2.0).abs() < 1e-15);
                prop_assert_eq!(a.s1.re, 0.0);
                prop_assert_eq!(a.s2, w / 2.0);
            }
        }
    }
}

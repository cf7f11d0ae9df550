//! Scenario configuration. Unknown keys are rejected so that typos surface as
//! config errors rather than silently falling back to defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use gdo_core::classical::CConstants;
use gdo_core::driving::Beta0;
use gdo_core::schedule::{make_preset, Constant, CubicSpline, ParameterSchedule, Preset, SharedProfile};
use gdo_core::wavefunction::MAX_N;
use num_complex::Complex64;
use serde::Deserialize;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    States,
    Residuals,
    Moments,
    Cis,
    Berry,
    Oracle,
    Sweep,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tables {
    pub t: Vec<f64>,
    pub mass: Vec<f64>,
    pub omega_sq: Vec<f64>,
    #[serde(default)]
    pub cross: Option<Vec<f64>>,
    #[serde(default)]
    pub force: Option<Vec<f64>>,
    #[serde(default)]
    pub momentum_drive: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexValue {
    fn value(&self) -> Complex64 {
        match *self {
            ComplexValue::Real(x) => Complex64::new(x, 0.0),
            ComplexValue::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitConstants {
    pub c1: ComplexValue,
    pub c2: f64,
    pub c3: ComplexValue,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum CSpec {
    Keyword(String),
    Explicit(ExplicitConstants),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum BetaSpec {
    Keyword(String),
    Pair([f64; 2]),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_points")]
    pub points: usize,
    /// Half-width in packet widths; the default adapts to the level.
    #[serde(default)]
    pub half_width_sigmas: Option<f64>,
}

fn default_points() -> usize {
    gdo_core::wavefunction::DEFAULT_POINTS
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    #[serde(default = "default_oracle_points")]
    pub points: usize,
    #[serde(default = "default_span")]
    pub span_sigmas: f64,
    #[serde(default = "default_steps")]
    pub steps_per_period: f64,
    /// Propagation length; one characteristic period when absent.
    #[serde(default)]
    pub duration: Option<f64>,
}

fn default_oracle_points() -> usize {
    gdo_core::oracle::DEFAULT_POINTS
}
fn default_span() -> f64 {
    gdo_core::oracle::DEFAULT_SPAN_SIGMAS
}
fn default_steps() -> f64 {
    gdo_core::oracle::DEFAULT_STEPS_PER_PERIOD
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self { points: default_oracle_points(), span_sigmas: default_span(), steps_per_period: default_steps(), duration: None }
    }
}

/// Allowed values of every check, before `--tol-scale`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub norm: f64,
    pub eigen_residual: f64,
    pub schrodinger_residual: f64,
    pub invariant_odes: f64,
    pub linear_odes: f64,
    pub beta_quadrature: f64,
    pub moments: f64,
    pub berry_discrepancy: f64,
    pub oracle_infidelity: f64,
    pub oracle_norm_drift: f64,
    pub sweep_ratio_low: f64,
    pub sweep_ratio_high: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            norm: 1e-8,
            eigen_residual: 1e-6,
            schrodinger_residual: 1e-4,
            invariant_odes: 1e-7,
            linear_odes: 1e-7,
            beta_quadrature: 1e-8,
            moments: 1e-4,
            berry_discrepancy: 1e-6,
            oracle_infidelity: 1e-4,
            oracle_norm_drift: 1e-8,
            sweep_ratio_low: 3.5,
            sweep_ratio_high: 4.5,
        }
    }
}

impl Tolerances {
    /// Scale every tolerance; the convergence-ratio band widens about 4.
    pub fn scaled(&self, x: f64) -> Self {
        let mid = 0.5 * (self.sweep_ratio_low + self.sweep_ratio_high);
        Self {
            norm: self.norm * x,
            eigen_residual: self.eigen_residual * x,
            schrodinger_residual: self.schrodinger_residual * x,
            invariant_odes: self.invariant_odes * x,
            linear_odes: self.linear_odes * x,
            beta_quadrature: self.beta_quadrature * x,
            moments: self.moments * x,
            berry_discrepancy: self.berry_discrepancy * x,
            oracle_infidelity: self.oracle_infidelity * x,
            oracle_norm_drift: self.oracle_norm_drift * x,
            sweep_ratio_low: mid - (mid - self.sweep_ratio_low) * x,
            sweep_ratio_high: mid + (self.sweep_ratio_high - mid) * x,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
    #[serde(default)]
    pub tables: Option<Tables>,
    /// Start of the cyclic-state interval.
    #[serde(default)]
    pub t0: Option<f64>,
    /// Period `τ` for the cyclic-state and Berry-phase tasks.
    #[serde(default)]
    pub period: Option<f64>,
    #[serde(default)]
    pub window: Option<[f64; 2]>,
    #[serde(default)]
    pub c_constants: Option<CSpec>,
    #[serde(default)]
    pub beta0: Option<BetaSpec>,
    #[serde(default = "default_levels")]
    pub quantum_numbers: Vec<usize>,
    #[serde(default)]
    pub sample_times: Option<Vec<f64>>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub oracle: Option<OracleSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_levels() -> Vec<usize> {
    vec![0]
}

/// A validated scenario ready to run.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub preset: Option<Preset>,
    pub constants: BTreeMap<String, f64>,
    pub schedule: ParameterSchedule,
    pub window: (f64, f64),
    pub t0: f64,
    pub period: Option<f64>,
    pub characteristic_period: f64,
    pub c: Option<CConstants>,
    pub beta0: Beta0,
    pub levels: Vec<usize>,
    pub sample_times: Vec<f64>,
    pub grid: Option<GridSpec>,
    pub oracle: OracleSpec,
    pub tolerances: Tolerances,
    pub tasks: Vec<Task>,
    pub output_dir: Option<PathBuf>,
}

impl Scenario {
    pub fn has(&self, task: Task) -> bool {
        self.tasks.contains(&task)
    }
}

pub fn load(path: &Path) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|ConfigError(msg)| ConfigError(format!("{}: {msg}", path.display())))
}

pub fn parse(text: &str) -> Result<Scenario, ConfigError> {
    let raw: ScenarioConfig = serde_json::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
    validate(raw)
}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

fn spline(t: &[f64], v: &[f64], field: &str) -> Result<SharedProfile, ConfigError> {
    Ok(Arc::new(CubicSpline::natural(t, v).map_err(|e| bad(format!("tables.{field}: {e}")))?))
}

fn table_schedule(tables: &Tables) -> Result<ParameterSchedule, ConfigError> {
    let t = &tables.t;
    let optional = |v: &Option<Vec<f64>>, field: &str| -> Result<SharedProfile, ConfigError> {
        match v {
            Some(v) => spline(t, v, field),
            None => Ok(Arc::new(Constant(0.0))),
        }
    };
    Ok(ParameterSchedule {
        mass: spline(t, &tables.mass, "mass")?,
        cross: optional(&tables.cross, "cross")?,
        omega_sq: spline(t, &tables.omega_sq, "omega_sq")?,
        force: optional(&tables.force, "force")?,
        momentum_drive: optional(&tables.momentum_drive, "momentum_drive")?,
        period: None,
        t0: t[0],
        label: "tables".into(),
    })
}

fn validate(raw: ScenarioConfig) -> Result<Scenario, ConfigError> {
    if raw.tasks.is_empty() {
        return Err(bad("tasks: at least one task is required"));
    }
    let mut tasks = raw.tasks.clone();
    tasks.sort();
    tasks.dedup();
    if raw.quantum_numbers.is_empty() {
        return Err(bad("quantum_numbers: at least one level is required"));
    }
    if let Some(&n) = raw.quantum_numbers.iter().find(|&&n| n > MAX_N) {
        return Err(bad(format!("quantum_numbers: {n} exceeds the maximum {MAX_N}")));
    }

    let (preset, schedule, natural, char_period, preset_period) = match (&raw.preset, &raw.tables) {
        (Some(_), Some(_)) => return Err(bad("give either preset or tables, not both")),
        (None, None) => return Err(bad("one of preset or tables is required")),
        (Some(name), None) => {
            let p: Preset = name.parse().map_err(|e| bad(format!("preset: {e}")))?;
            let sched = make_preset(p, &raw.constants).map_err(|e| bad(format!("constants: {e}")))?;
            let natural = p.natural_window(&raw.constants).map_err(|e| bad(format!("constants: {e}")))?;
            let char_period = p.characteristic_period(&raw.constants).map_err(|e| bad(format!("constants: {e}")))?;
            let cyc = p.cyclic_period(&raw.constants).map_err(|e| bad(format!("constants: {e}")))?;
            let declared = sched.period;
            (Some(p), sched, natural, char_period, cyc.or(declared))
        }
        (None, Some(tables)) => {
            if !raw.constants.is_empty() {
                return Err(bad("constants: only meaningful with a preset"));
            }
            let sched = table_schedule(tables)?;
            let (a, b) = (tables.t[0], tables.t[tables.t.len() - 1]);
            (None, sched, (a, b), b - a, None)
        }
    };

    let period = raw.period.or(preset_period);
    if let Some(tau) = period {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(bad(format!("period: {tau} must be positive")));
        }
    }
    let needs_period = tasks.iter().any(|t| matches!(t, Task::Cis | Task::Berry));
    if needs_period && period.is_none() {
        return Err(bad("period: required for the cis and berry tasks with this schedule"));
    }

    let mut window = match raw.window {
        Some([a, b]) if b > a => (a, b),
        Some([a, b]) => return Err(bad(format!("window: [{a}, {b}] is empty"))),
        None => natural,
    };
    let t0 = raw.t0.unwrap_or(window.0);
    if needs_period && raw.window.is_none() {
        // the g₋ periodicity test needs two periods of data
        let tau = period.unwrap_or_default();
        window.0 = window.0.min(t0);
        window.1 = window.1.max(window.0 + 2.0 * tau).max(t0 + tau);
    }
    if t0 < window.0 || t0 > window.1 {
        return Err(bad(format!("t0: {t0} is outside the window [{}, {}]", window.0, window.1)));
    }
    if raw.tables.is_some() && (window.0 < natural.0 || window.1 > natural.1) {
        return Err(bad("window: must lie inside the table time range"));
    }

    let c = match &raw.c_constants {
        None => None,
        Some(CSpec::Keyword(k)) if k == "default" => None,
        Some(CSpec::Keyword(k)) => return Err(bad(format!("c_constants: unknown keyword \"{k}\" (use \"default\")"))),
        Some(CSpec::Explicit(e)) => Some(CConstants { c1: e.c1.value(), c2: Complex64::new(e.c2, 0.0), c3: e.c3.value() }),
    };
    let beta0 = match &raw.beta0 {
        None => Beta0::Zero,
        Some(BetaSpec::Keyword(k)) if k == "zero" => Beta0::Zero,
        Some(BetaSpec::Keyword(k)) if k == "comoving" => Beta0::Comoving,
        Some(BetaSpec::Keyword(k)) => return Err(bad(format!("beta0: unknown keyword \"{k}\" (use \"zero\", \"comoving\" or [re, im])"))),
        Some(BetaSpec::Pair([re, im])) => Beta0::Value(Complex64::new(*re, *im)),
    };

    let sample_times = match raw.sample_times {
        Some(ts) => {
            if ts.is_empty() {
                return Err(bad("sample_times: must not be empty"));
            }
            if let Some(t) = ts.iter().find(|&&t| t < window.0 || t > window.1) {
                return Err(bad(format!("sample_times: {t} is outside the window [{}, {}]", window.0, window.1)));
            }
            ts
        }
        None => {
            let (a, b) = window;
            gdo_core::linspace(a + 0.1 * (b - a), b - 0.1 * (b - a), 5).collect()
        }
    };
    if let Some(g) = &raw.grid {
        if g.points < 64 {
            return Err(bad("grid.points: need at least 64"));
        }
        if let Some(w) = g.half_width_sigmas {
            if !(w > 0.0) {
                return Err(bad("grid.half_width_sigmas: must be positive"));
            }
        }
    }
    let oracle = raw.oracle.unwrap_or_default();
    if oracle.points < 64 || !(oracle.span_sigmas > 0.0) || !(oracle.steps_per_period >= 1.0) {
        return Err(bad("oracle: need points >= 64, span_sigmas > 0 and steps_per_period >= 1"));
    }

    let name = raw.name.unwrap_or_else(|| match preset {
        Some(p) => format!("preset-{p}"),
        None => "tables".into(),
    });
    Ok(Scenario {
        name,
        preset,
        constants: raw.constants,
        schedule,
        window,
        t0,
        period,
        characteristic_period: char_period,
        c,
        beta0,
        levels: raw.quantum_numbers,
        sample_times,
        grid: raw.grid,
        oracle,
        tolerances: raw.tolerances,
        tasks,
        output_dir: raw.output_dir,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_preset_config() {
        let s = parse(r#"{"preset": "C", "constants": {"m": 1, "omega": 3, "F0": 0.7, "r": 3, "r_e": 2}, "tasks": ["cis"]}"#).unwrap();
        assert_eq!(s.preset, Some(Preset::C));
        assert!((s.period.unwrap() - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!(s.window.1 >= 4.0 * std::f64::consts::PI - 1e-12);
        assert_eq!(s.sample_times.len(), 5);
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            r#"{"preset": "A", "constants": {"m": 1, "omega0": 1, "F0": 0.5}, "tasks": []}"#,
            r#"{"preset": "A", "constants": {"m": 1, "omega0": 1, "F0": 0.5}, "tasks": ["states"], "colour": 1}"#,
            r#"{"preset": "Z", "tasks": ["states"]}"#,
            r#"{"preset": "A", "constants": {"m": 1}, "tasks": ["states"]}"#,
            r#"{"preset": "A", "constants": {"m": 1, "omega0": 1, "F0": 0.5}, "tasks": ["dance"]}"#,
            r#"{"preset": "A", "constants": {"m": 1, "omega0": 1, "F0": 0.5}, "tasks": ["states"], "quantum_numbers": [65]}"#,
            r#"{"preset": "A", "constants": {"m": 1, "omega0": 1, "F0": 0.5}, "tasks": ["states"], "beta0": "sideways"}"#,
            r#"{"tables": {"t": [0, 1, 2], "mass": [1, 1, 1], "omega_sq": [1, 1, 1]}, "tasks": ["cis"]}"#,
            r#"{"tasks": ["states"]}"#,
        ];
        for c in cases {
            assert!(parse(c).is_err(), "{c}");
        }
    }

    #[test]
    fn table_schedule_and_explicit_constants() {
        let s = parse(
            r#"{"tables": {"t": [0, 1, 2, 3], "mass": [1, 1, 1, 1], "omega_sq": [4, 4, 4, 4], "force": [0, 0.1, 0.2, 0.1]},
                "c_constants": {"c1": [0.25, 0], "c2": 0.5, "c3": 0.25}, "beta0": [0.1, -0.2],
                "tasks": ["states", "residuals"], "quantum_numbers": [0, 2]}"#,
        )
        .unwrap();
        assert_eq!(s.window, (0.0, 3.0));
        assert!((s.schedule.f(1.0) - 0.1).abs() < 1e-12);
        assert!(s.c.is_some());
        assert_eq!(s.beta0, Beta0::Value(Complex64::new(0.1, -0.2)));
    }

    #[test]
    fn tolerance_scaling() {
        let t = Tolerances::default().scaled(2.0);
        assert_eq!(t.schrodinger_residual, 2e-4);
        assert!((t.sweep_ratio_low - 3.0).abs() < 1e-12 && (t.sweep_ratio_high - 5.0).abs() < 1e-12);
    }
}

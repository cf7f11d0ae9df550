//! Executes the tasks of a scenario and assembles `report.json`.

use std::fs;
use std::path::{Path, PathBuf};

use gdo_core::driving::{check_linear_odes, DriveState};
use gdo_core::geometric::{self, CyclicReport};
use gdo_core::invariant::check_invariant_odes;
use gdo_core::oracle::{self, convergence_ratios, fidelity_sweep, propagate, write_sweep_csv};
use gdo_core::pipeline::build_drive;
use gdo_core::wavefunction::{
    centered_grid, default_grid, eigen_residual_of_sample, eval_psi, moments, predicted_variances,
    schrodinger_residual, PacketShape,
};
use gdo_core::{linspace, Error};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Scenario, Task, Tolerances};

/// A pipeline failure tagged with the module that raised it.
#[derive(Debug)]
pub struct PipelineError {
    pub module: &'static str,
    pub error: Error,
}

impl std::fmt::Display for PipelineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}", self.module, self.error)
    }
}

type Result<T> = std::result::Result<T, PipelineError>;

trait Tag<T> {
    fn tag(self, module: &'static str) -> Result<T>;
}

impl<T> Tag<T> for gdo_core::Result<T> {
    fn tag(self, module: &'static str) -> Result<T> {
        self.map_err(|error| PipelineError { module, error })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub module: &'static str,
    pub invariant: String,
    pub measured: f64,
    /// Upper bound, or the upper end of a band.
    pub allowed: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub allowed_min: Option<f64>,
    pub pass: bool,
}

#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    fn at_most(&mut self, module: &'static str, invariant: String, measured: f64, allowed: f64) {
        self.0.push(Check { module, invariant, measured, allowed, allowed_min: None, pass: measured <= allowed });
    }

    fn within(&mut self, module: &'static str, invariant: String, measured: f64, (lo, hi): (f64, f64)) {
        let pass = (lo..=hi).contains(&measured);
        self.0.push(Check { module, invariant, measured, allowed: hi, allowed_min: Some(lo), pass });
    }
}

pub struct Outcome {
    pub report: Value,
    pub passed: bool,
    pub out_dir: PathBuf,
}

fn write_err(e: std::io::Error) -> PipelineError {
    PipelineError { module: "cli", error: Error::Io(e) }
}

fn grid_for(s: &Scenario, ds: &DriveState, n: usize, t: f64) -> Result<Vec<f64>> {
    match &s.grid {
        None => default_grid(ds, n, t).tag("wavefunction"),
        Some(g) => {
            let shape = PacketShape::at(ds, t).tag("wavefunction")?;
            let width = g.half_width_sigmas.unwrap_or_else(|| 8f64.max((2.0 * n as f64 + 1.0).sqrt() + 6.0));
            Ok(centered_grid(&shape, n, g.points, width))
        }
    }
}

fn cyclic_json(r: &CyclicReport) -> Value {
    json!({
        "tau": r.tau,
        "t_start": r.t_start,
        "theta0": r.theta0,
        "sigma0": [r.sigma0.re, r.sigma0.im],
        "is_cis": r.is_cis,
        "winding": r.winding,
        "reason": r.reason,
        "tol_theta": r.tol_theta,
        "tol_sigma": r.tol_sigma,
        "g_minus_deviation": r.g_minus_deviation,
        "per_n": r.per_n.iter().map(|b| json!({
            "n": b.n,
            "chi": b.chi,
            "gamma_bp": b.gamma,
            "gamma_reconstructed": b.gamma_reconstructed,
            "discrepancy": b.discrepancy,
            "partials": {
                "level_integral": b.partials.level_integral,
                "h0_term": b.partials.h0_term,
                "xi_term": b.partials.xi_term,
                "zeta_term": b.partials.zeta_term,
            },
        })).collect::<Vec<_>>(),
    })
}

/// Grid for the oracle covering the packet over `[t0, t1]`.
fn oracle_grid(s: &Scenario, ds: &DriveState, t0: f64, t1: f64) -> Result<Vec<f64>> {
    let (mut lo, mut hi, mut sigma) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for t in linspace(t0, t1, 128) {
        let shape = PacketShape::at(ds, t).tag("wavefunction")?;
        lo = lo.min(shape.center());
        hi = hi.max(shape.center());
        sigma = sigma.max(shape.sigma());
    }
    let half = 0.5 * (hi - lo) + s.oracle.span_sigmas * sigma;
    Ok(oracle::uniform_grid(0.5 * (lo + hi), half, s.oracle.points))
}

pub fn run(s: &Scenario, out_dir: &Path, tol: &Tolerances) -> Result<Outcome> {
    fs::create_dir_all(out_dir).map_err(write_err)?;
    let ds = build_drive(&s.schedule, s.window, s.c, s.beta0).tag("driving")?;
    let inv = ds.invariant();
    let mut checks = Checks::default();
    let mut report = serde_json::Map::new();
    report.insert("scenario".into(), json!(s.name));
    report.insert("preset".into(), json!(s.preset.map(|p| p.to_string())));
    report.insert("constants".into(), json!(s.constants));
    report.insert("window".into(), json!([s.window.0, s.window.1]));
    report.insert("tasks".into(), json!(s.tasks.iter().map(|t| format!("{t:?}").to_lowercase()).collect::<Vec<_>>()));
    report.insert("omega_i".into(), json!(inv.omega_i()));
    report.insert("beta0".into(), json!([ds.beta0().re, ds.beta0().im]));

    if s.has(Task::States) {
        inv.basis().write_csv(&out_dir.join("classical.csv"), 512).tag("classical")?;
        inv.write_csv(&out_dir.join("invariant.csv"), 512).tag("invariant")?;
        ds.write_csv(&out_dir.join("beta.csv"), 512).tag("driving")?;
        let states = out_dir.join("states");
        fs::create_dir_all(&states).map_err(write_err)?;
        let mut rows = Vec::new();
        for &n in &s.levels {
            for (k, &t) in s.sample_times.iter().enumerate() {
                let grid = grid_for(s, &ds, n, t)?;
                let sample = eval_psi(n, &ds, t, &grid).tag("wavefunction")?;
                sample.write_csv(&states.join(format!("psi_n{n}_t{k}.csv")), &s.name).tag("wavefunction")?;
                let norm_err = (sample.norm_sq() - 1.0).abs();
                let phi: Vec<_> = sample.psi.iter().map(|z| z * num_complex::Complex64::from_polar(1.0, -sample.alpha_n)).collect();
                let eig = eigen_residual_of_sample(&phi, n, &ds, t, &grid).tag("wavefunction")?;
                checks.at_most("wavefunction", format!("|‖ψ{n}‖² − 1| at t={t}"), norm_err, tol.norm);
                checks.at_most("wavefunction", format!("eigen residual n={n} t={t}"), eig, tol.eigen_residual);
                rows.push(json!({"n": n, "t": t, "alpha": sample.alpha_n, "delta_q": sample.delta_q, "delta_p": sample.delta_p, "norm_error": norm_err, "eigen_residual": eig}));
            }
        }
        report.insert("states".into(), Value::Array(rows));
    }

    if s.has(Task::Residuals) {
        let invariant_dev = check_invariant_odes(inv, &s.schedule).tag("invariant")?;
        let linear_dev = check_linear_odes(&ds, inv, &s.schedule).tag("driving")?;
        let quad_dev = ds.quadrature_deviation().tag("driving")?;
        checks.at_most("invariant", "g equations of motion".into(), invariant_dev, tol.invariant_odes);
        checks.at_most("driving", "g₁, g₂, g₃ equations of motion".into(), linear_dev, tol.linear_odes);
        checks.at_most("driving", "β by ODE vs quadrature".into(), quad_dev, tol.beta_quadrature);
        let mut rows = Vec::new();
        for &n in &s.levels {
            for &t in &s.sample_times {
                let grid = grid_for(s, &ds, n, t)?;
                let r = schrodinger_residual(n, &ds, t, &grid, None).tag("wavefunction")?;
                checks.at_most("wavefunction", format!("Schrödinger residual n={n} t={t}"), r, tol.schrodinger_residual);
                rows.push(json!({"n": n, "t": t, "residual": r}));
            }
        }
        report.insert(
            "residuals".into(),
            json!({"invariant_odes": invariant_dev, "linear_odes": linear_dev, "beta_quadrature": quad_dev, "schrodinger": rows}),
        );
    }

    if s.has(Task::Moments) {
        let mut rows = Vec::new();
        for &n in &s.levels {
            for &t in &s.sample_times {
                let grid = grid_for(s, &ds, n, t)?;
                let m = moments(&eval_psi(n, &ds, t, &grid).tag("wavefunction")?).tag("wavefunction")?;
                let (vq, vp) = predicted_variances(n, &PacketShape::at(&ds, t).tag("wavefunction")?);
                let (eq, ep) = (((m.var_q - vq) / vq).abs(), ((m.var_p - vp) / vp).abs());
                checks.at_most("wavefunction", format!("var_q n={n} t={t}"), eq, tol.moments);
                checks.at_most("wavefunction", format!("var_p n={n} t={t}"), ep, tol.moments);
                rows.push(json!({"n": n, "t": t, "mean_q": m.mean_q, "var_q": m.var_q, "mean_p": m.mean_p, "var_p": m.var_p, "predicted_var_q": vq, "predicted_var_p": vp}));
            }
        }
        report.insert("moments".into(), Value::Array(rows));
    }

    if s.has(Task::Cis) || s.has(Task::Berry) {
        let tau = s.period.expect("validated");
        let levels: &[usize] = if s.has(Task::Berry) { &s.levels } else { &[] };
        let r = geometric::analyze(&ds, tau, s.t0, levels).tag("geometric")?;
        if s.has(Task::Berry) {
            if r.is_cis {
                for b in &r.per_n {
                    checks.at_most("geometric", format!("Berry phase routes agree n={}", b.n), b.discrepancy, tol.berry_discrepancy);
                }
            } else {
                checks.0.push(Check {
                    module: "geometric",
                    invariant: format!("cyclic initial state required for the Berry phase: {}", r.reason.clone().unwrap_or_default()),
                    measured: 0.0,
                    allowed: 1.0,
                    allowed_min: Some(1.0),
                    pass: false,
                });
            }
        }
        report.insert("geometric".into(), cyclic_json(&r));
    }

    if s.has(Task::Oracle) {
        let duration = s.oracle.duration.unwrap_or(s.characteristic_period);
        let (t0, t1) = (s.window.0, (s.window.0 + duration).min(s.window.1));
        let dt = s.characteristic_period / s.oracle.steps_per_period;
        let grid = oracle_grid(s, &ds, t0, t1)?;
        let dir = out_dir.join("oracle");
        fs::create_dir_all(&dir).map_err(write_err)?;
        let mut rows = Vec::new();
        for &n in &s.levels {
            let psi0 = eval_psi(n, &ds, t0, &grid).tag("wavefunction")?.psi;
            let target = eval_psi(n, &ds, t1, &grid).tag("wavefunction")?.psi;
            let r = propagate(&s.schedule, &grid, &psi0, t0, t1, dt).tag("oracle")?.with_reference(&target).tag("oracle")?;
            let fidelity = r.fidelity.unwrap_or(0.0);
            r.write_csv(&dir.join(format!("psi_n{n}.csv"))).tag("oracle")?;
            checks.at_most("oracle", format!("1 − fidelity n={n}"), 1.0 - fidelity, tol.oracle_infidelity);
            checks.at_most("oracle", format!("norm drift n={n}"), r.norm_drift, tol.oracle_norm_drift);
            rows.push(json!({"n": n, "t0": t0, "t1": t1, "dt": r.dt, "steps": r.steps, "fidelity": fidelity, "norm_drift": r.norm_drift, "max_hermiticity_defect": r.max_hermiticity_defect}));
        }
        report.insert("oracle".into(), Value::Array(rows));
    }

    if s.has(Task::Sweep) {
        let n = s.levels[0];
        let period = s.characteristic_period;
        let (t0, t1) = (s.window.0, (s.window.0 + period).min(s.window.1));
        let grid = oracle_grid(s, &ds, t0, t1)?;
        let dts = [period / 50.0, period / 100.0, period / 200.0];
        let rows = fidelity_sweep(&s.schedule, &grid, t0, &[t1], &dts, |t| Ok(eval_psi(n, &ds, t, &grid)?.psi)).tag("oracle")?;
        write_sweep_csv(&rows, &out_dir.join("sweep.csv")).tag("oracle")?;
        let ratios = convergence_ratios(&rows);
        for (k, &ratio) in ratios.iter().enumerate() {
            checks.within("oracle", format!("dt-halving error ratio {k}"), ratio, (tol.sweep_ratio_low, tol.sweep_ratio_high));
        }
        report.insert(
            "sweep".into(),
            json!({"n": n, "rows": rows.iter().map(|r| json!({"t": r.t, "dt": r.dt, "fidelity": r.fidelity, "distance": r.distance, "norm_drift": r.norm_drift})).collect::<Vec<_>>(), "ratios": ratios}),
        );
    }

    let passed = checks.0.iter().all(|c| c.pass);
    let failures: Vec<&Check> = checks.0.iter().filter(|c| !c.pass).collect();
    report.insert("failures".into(), json!(failures));
    report.insert("checks".into(), json!(checks.0));
    report.insert("passed".into(), json!(passed));
    Ok(Outcome { report: Value::Object(report), passed, out_dir: out_dir.to_path_buf() })
}

//! Python bindings: build a scenario from a preset and query its exact
//! states, cyclic-state conditions, Berry phases and the oracle.

use std::collections::BTreeMap;

use gdo_core::driving::{check_linear_odes, Beta0, DriveState};
use gdo_core::geometric;
use gdo_core::invariant::check_invariant_odes;
use gdo_core::oracle;
use gdo_core::pipeline::preset_drive;
use gdo_core::schedule::Preset;
use gdo_core::wavefunction::{self, PacketShape};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: gdo_core::Error) -> PyErr {
    match e {
        gdo_core::Error::UnknownPreset(_)
        | gdo_core::Error::MissingConstant { .. }
        | gdo_core::Error::InvalidParameter { .. }
        | gdo_core::Error::OutsideWindow { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse_beta0(beta0: Option<&Bound<'_, PyAny>>) -> PyResult<Beta0> {
    let Some(obj) = beta0 else { return Ok(Beta0::Zero) };
    if let Ok(s) = obj.extract::<String>() {
        return match s.as_str() {
            "zero" => Ok(Beta0::Zero),
            "comoving" => Ok(Beta0::Comoving),
            other => Err(PyValueError::new_err(format!("beta0: unknown keyword {other:?}"))),
        };
    }
    Ok(Beta0::Value(obj.extract::<Complex64>()?))
}

/// A preset scenario solved over its window.
#[pyclass(module = "gdo", frozen)]
struct Scenario {
    preset: Preset,
    constants: BTreeMap<String, f64>,
    ds: DriveState,
}

#[pymethods]
impl Scenario {
    #[new]
    #[pyo3(signature = (preset, constants, window = None, beta0 = None))]
    fn new(
        preset: &str,
        constants: BTreeMap<String, f64>,
        window: Option<(f64, f64)>,
        beta0: Option<&Bound<'_, PyAny>>,
    ) -> PyResult<Self> {
        let preset: Preset = preset.parse().map_err(err)?;
        let ds = preset_drive(preset, &constants, window, parse_beta0(beta0)?).map_err(err)?;
        Ok(Self { preset, constants, ds })
    }

    #[getter]
    fn preset(&self) -> String {
        self.preset.to_string()
    }

    #[getter]
    fn window(&self) -> (f64, f64) {
        self.ds.window()
    }

    #[getter]
    fn omega_i(&self) -> f64 {
        self.ds.invariant().omega_i()
    }

    fn characteristic_period(&self) -> PyResult<f64> {
        self.preset.characteristic_period(&self.constants).map_err(err)
    }

    /// `(g₋, g₀, g₊)` at `t`.
    fn g(&self, t: f64) -> PyResult<(f64, f64, f64)> {
        self.ds.invariant().ensure_contains(t).map_err(err)?;
        let g = self.ds.invariant().g(t);
        Ok((g.g_minus, g.g_zero, g.g_plus))
    }

    fn theta(&self, t: f64) -> PyResult<f64> {
        self.ds.invariant().theta(t).map_err(err)
    }

    fn beta(&self, t: f64) -> PyResult<Complex64> {
        self.ds.beta(t).map_err(err)
    }

    /// Default sampling grid for level `n` at `t`.
    fn grid(&self, n: usize, t: f64) -> PyResult<Vec<f64>> {
        wavefunction::default_grid(&self.ds, n, t).map_err(err)
    }

    /// `ψₙ(q, t)` sampled on `grid`.
    fn psi(&self, n: usize, t: f64, grid: Vec<f64>) -> PyResult<Vec<Complex64>> {
        Ok(wavefunction::eval_psi(n, &self.ds, t, &grid).map_err(err)?.psi)
    }

    fn schrodinger_residual(&self, n: usize, t: f64) -> PyResult<f64> {
        let grid = wavefunction::default_grid(&self.ds, n, t).map_err(err)?;
        wavefunction::schrodinger_residual(n, &self.ds, t, &grid, None).map_err(err)
    }

    /// Grid moments next to the closed-form variances.
    fn moments<'py>(&self, py: Python<'py>, n: usize, t: f64) -> PyResult<Bound<'py, PyDict>> {
        let grid = wavefunction::default_grid(&self.ds, n, t).map_err(err)?;
        let m = wavefunction::moments(&wavefunction::eval_psi(n, &self.ds, t, &grid).map_err(err)?).map_err(err)?;
        let (vq, vp) = wavefunction::predicted_variances(n, &PacketShape::at(&self.ds, t).map_err(err)?);
        let d = PyDict::new(py);
        d.set_item("mean_q", m.mean_q)?;
        d.set_item("var_q", m.var_q)?;
        d.set_item("mean_p", m.mean_p)?;
        d.set_item("var_p", m.var_p)?;
        d.set_item("predicted_var_q", vq)?;
        d.set_item("predicted_var_p", vp)?;
        Ok(d)
    }

    /// Largest deviations of the closed forms from direct ODE integration.
    fn check_odes(&self) -> PyResult<(f64, f64)> {
        let inv = self.ds.invariant();
        let sched = self.ds.schedule();
        Ok((check_invariant_odes(inv, sched).map_err(err)?, check_linear_odes(&self.ds, inv, sched).map_err(err)?))
    }

    /// Cyclic-state verdict, plus Berry phases for `levels` when cyclic.
    #[pyo3(signature = (tau, t_start = 0.0, levels = Vec::new()))]
    fn cyclic<'py>(&self, py: Python<'py>, tau: f64, t_start: f64, levels: Vec<usize>) -> PyResult<Bound<'py, PyDict>> {
        let r = geometric::analyze(&self.ds, tau, t_start, &levels).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("tau", r.tau)?;
        d.set_item("theta0", r.theta0)?;
        d.set_item("sigma0", r.sigma0)?;
        d.set_item("is_cis", r.is_cis)?;
        d.set_item("winding", r.winding)?;
        d.set_item("reason", r.reason)?;
        let per_n = r
            .per_n
            .iter()
            .map(|b| {
                let e = PyDict::new(py);
                e.set_item("n", b.n)?;
                e.set_item("chi", b.chi)?;
                e.set_item("gamma_bp", b.gamma)?;
                e.set_item("gamma_reconstructed", b.gamma_reconstructed)?;
                e.set_item("discrepancy", b.discrepancy)?;
                e.set_item("h0_term", b.partials.h0_term)?;
                e.set_item("xi_term", b.partials.xi_term)?;
                e.set_item("zeta_term", b.partials.zeta_term)?;
                Ok(e)
            })
            .collect::<PyResult<Vec<_>>>()?;
        d.set_item("per_n", per_n)?;
        Ok(d)
    }

    /// Propagate `ψₙ` with Crank–Nicolson from the window start to `t1`;
    /// returns `(fidelity, norm_drift)`.
    #[pyo3(signature = (n, t1, dt = None, points = oracle::DEFAULT_POINTS))]
    fn propagate(&self, py: Python<'_>, n: usize, t1: f64, dt: Option<f64>, points: usize) -> PyResult<(f64, f64)> {
        let t0 = self.ds.window().0;
        let period = self.characteristic_period()?;
        let dt = dt.unwrap_or(period / oracle::DEFAULT_STEPS_PER_PERIOD);
        let (mut lo, mut hi, mut sigma) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
        for t in gdo_core::linspace(t0, t1, 128) {
            let s = PacketShape::at(&self.ds, t).map_err(err)?;
            lo = lo.min(s.center());
            hi = hi.max(s.center());
            sigma = sigma.max(s.sigma());
        }
        let grid = oracle::uniform_grid(0.5 * (lo + hi), 0.5 * (hi - lo) + oracle::DEFAULT_SPAN_SIGMAS * sigma, points);
        let psi0 = wavefunction::eval_psi(n, &self.ds, t0, &grid).map_err(err)?.psi;
        let target = wavefunction::eval_psi(n, &self.ds, t1, &grid).map_err(err)?.psi;
        let sched = self.ds.schedule().clone();
        let r = py
            .detach(move || oracle::propagate(&sched, &grid, &psi0, t0, t1, dt)?.with_reference(&target))
            .map_err(err)?;
        Ok((r.fidelity.unwrap_or(0.0), r.norm_drift))
    }

    fn __repr__(&self) -> String {
        let (a, b) = self.ds.window();
        format!("Scenario(preset={:?}, window=({a}, {b}))", self.preset.to_string())
    }
}

/// `(name, required, optional, description)` for every preset.
#[pyfunction]
fn list_presets() -> Vec<(String, Vec<String>, Vec<String>, String)> {
    Preset::ALL
        .iter()
        .map(|p| {
            let names = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
            (p.to_string(), names(p.required()), names(p.optional()), p.description().to_string())
        })
        .collect()
}

/// Exact states and geometric phases of generalized driven oscillators.
#[pymodule]
fn gdo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_function(wrap_pyfunction!(list_presets, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

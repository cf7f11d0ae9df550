//! Crank–Nicolson propagation of the time-dependent Schrödinger equation on a
//! uniform grid with Dirichlet boundaries.
//!
//! This module deliberately knows nothing about invariants or analytic
//! states: it sees the schedule and sampled wavefunctions only, so agreement
//! with the analytic solutions is independent evidence.

use std::io::Write;
use std::path::Path;

use log::debug;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fd::uniform_spacing;
use crate::schedule::ParameterSchedule;

pub const DEFAULT_POINTS: usize = 4096;
/// Grid half-width in units of the packet width.
pub const DEFAULT_SPAN_SIGMAS: f64 = 12.0;
/// Steps per characteristic period.
pub const DEFAULT_STEPS_PER_PERIOD: f64 = 2000.0;
pub const MAX_NORM_DRIFT: f64 = 1e-4;
pub const MAX_BOUNDARY_AMPLITUDE: f64 = 1e-6;
pub const MAX_INITIAL_BOUNDARY: f64 = 1e-10;

/// Uniform grid of `points` nodes on `[center − half_width, center + half_width]`.
pub fn uniform_grid(center: f64, half_width: f64, points: usize) -> Vec<f64> {
    crate::linspace(center - half_width, center + half_width, points).collect()
}

/// Banded Hamiltonian: `lower[j] = H[j+1][j]`, `upper[j] = H[j][j+1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<Complex64>,
    pub diag: Vec<Complex64>,
    pub upper: Vec<Complex64>,
}

impl Tridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `max |H − H†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let diag = self.diag.iter().map(|d| d.im.abs() * 2.0);
        let off = self.upper.iter().zip(&self.lower).map(|(u, l)| (u - l.conj()).norm());
        diag.chain(off).fold(0.0, f64::max)
    }

    pub fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        let n = self.len();
        (0..n)
            .map(|j| {
                let mut v = self.diag[j] * f[j];
                if j > 0 {
                    v += self.lower[j - 1] * f[j - 1];
                }
                if j + 1 < n {
                    v += self.upper[j] * f[j + 1];
                }
                v
            })
            .collect()
    }
}

/// Second-order discretization of `H_T(t)`: three-point kinetic term,
/// symmetrized `−(iY/2)(q D₁ + D₁ q)`, centered `iG D₁`, diagonal potential.
pub fn assemble_hamiltonian(sched: &ParameterSchedule, grid: &[f64], h: f64, t: f64) -> Tridiagonal {
    let n = grid.len();
    let (m, w2, y, f, g) = (sched.m(t), sched.omega_sq(t), sched.y(t), sched.f(t), sched.g(t));
    let kin = 1.0 / (2.0 * m * h * h);
    let i = Complex64::i();
    let diag = grid.iter().map(|&q| Complex64::new(2.0 * kin + 0.5 * m * w2 * q * q - f * q, 0.0)).collect();
    let mut upper = Vec::with_capacity(n - 1);
    let mut lower = Vec::with_capacity(n - 1);
    for j in 0..n - 1 {
        let qs = grid[j] + grid[j + 1];
        let mixed = -i * y * qs / (4.0 * h);
        let drive = i * g / (2.0 * h);
        upper.push(-kin + mixed + drive);
        lower.push(-kin - mixed - drive);
    }
    Tridiagonal { lower, diag, upper }
}

/// Solve `(a, b, c) x = d` with the Thomas algorithm; `a` is the subdiagonal.
fn thomas(a: &[Complex64], b: &[Complex64], c: &[Complex64], d: &mut [Complex64], scratch: &mut [Complex64]) -> Result<()> {
    let n = b.len();
    let mut denom = b[0];
    if denom.norm() == 0.0 {
        return Err(Error::Propagator("singular Crank–Nicolson matrix".into()));
    }
    scratch[0] = c[0] / denom;
    d[0] /= denom;
    for j in 1..n {
        denom = b[j] - a[j - 1] * scratch[j - 1];
        if denom.norm() == 0.0 {
            return Err(Error::Propagator("singular Crank–Nicolson matrix".into()));
        }
        if j + 1 < n {
            scratch[j] = c[j] / denom;
        }
        d[j] = (d[j] - a[j - 1] * d[j - 1]) / denom;
    }
    for j in (0..n - 1).rev() {
        let next = d[j + 1];
        d[j] -= scratch[j] * next;
    }
    Ok(())
}

/// `h Σ |ψ|²`, the norm conserved exactly by the scheme.
pub fn grid_norm_sq(psi: &[Complex64], h: f64) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * h
}

/// `|⟨a|b⟩| / (‖a‖ ‖b‖)`.
pub fn overlap(a: &[Complex64], b: &[Complex64], h: f64) -> f64 {
    let ip: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>() * h;
    ip.norm() / (grid_norm_sq(a, h) * grid_norm_sq(b, h)).sqrt()
}

fn boundary_amplitude(psi: &[Complex64]) -> f64 {
    psi[0].norm().max(psi[psi.len() - 1].norm())
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagationResult {
    pub grid: Vec<f64>,
    pub psi_final: Vec<Complex64>,
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    pub steps: usize,
    /// `|⟨ψ_reference(t1)|ψ(t1)⟩|` once a reference has been attached.
    pub fidelity: Option<f64>,
    /// `|‖ψ(t1)‖² − 1|` for the unit-normalized initial state.
    pub norm_drift: f64,
    pub max_boundary_amplitude: f64,
    pub max_hermiticity_defect: f64,
}

impl PropagationResult {
    /// Attach the fidelity against a reference sampled on the same grid.
    pub fn with_reference(mut self, reference: &[Complex64]) -> Result<Self> {
        if reference.len() != self.grid.len() {
            return Err(Error::Propagator(format!(
                "reference has {} samples, grid has {}",
                reference.len(),
                self.grid.len()
            )));
        }
        let h = uniform_spacing(&self.grid)?;
        let ip: Complex64 = reference.iter().zip(&self.psi_final).map(|(x, y)| x.conj() * y).sum::<Complex64>() * h;
        self.fidelity = Some(ip.norm() / grid_norm_sq(reference, h).sqrt());
        Ok(self)
    }

    /// `q, re_psi, im_psi, abs_psi_sq`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["q", "re_psi", "im_psi", "abs_psi_sq"])?;
        for (q, z) in self.grid.iter().zip(&self.psi_final) {
            w.write_record([q.to_string(), z.re.to_string(), z.im.to_string(), z.norm_sqr().to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Propagate `psi0` from `t0` to `t1` with steps no longer than `dt`.
///
/// `psi0` is normalized on entry. Fails when the norm drifts by more than
/// `1e-4` or the boundary amplitude exceeds `1e-6`.
pub fn propagate(
    sched: &ParameterSchedule,
    grid: &[f64],
    psi0: &[Complex64],
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<PropagationResult> {
    let h = uniform_spacing(grid)?;
    if psi0.len() != grid.len() {
        return Err(Error::Propagator(format!("ψ0 has {} samples, grid has {}", psi0.len(), grid.len())));
    }
    if !(dt > 0.0) || !(t1 > t0) {
        return Err(Error::Propagator(format!("need dt > 0 and t1 > t0, got dt = {dt}, [{t0}, {t1}]")));
    }
    let norm0 = grid_norm_sq(psi0, h);
    if !(norm0 > 0.0) || !norm0.is_finite() {
        return Err(Error::Propagator("initial state has zero or non-finite norm".into()));
    }
    let mut psi: Vec<Complex64> = psi0.iter().map(|z| z / norm0.sqrt()).collect();
    let edge0 = boundary_amplitude(&psi);
    if edge0 > MAX_INITIAL_BOUNDARY {
        return Err(Error::Propagator(format!("initial boundary amplitude {edge0:.3e} exceeds {MAX_INITIAL_BOUNDARY:e}")));
    }

    let steps = ((t1 - t0) / dt).ceil().max(1.0) as usize;
    let dt = (t1 - t0) / steps as f64;
    let m_min = (0..=16).map(|k| sched.m(t0 + (t1 - t0) * k as f64 / 16.0)).fold(f64::INFINITY, f64::min);
    if dt > h * h * m_min {
        debug!("dt = {dt:.3e} exceeds h²·M_min = {:.3e}; accuracy may be limited", h * h * m_min);
    }

    let n = grid.len();
    let half = Complex64::new(0.0, 0.5 * dt);
    let one = Complex64::new(1.0, 0.0);
    let mut rhs = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); n];
    let mut lhs_diag = vec![Complex64::new(0.0, 0.0); n];
    let mut lhs_lower = vec![Complex64::new(0.0, 0.0); n - 1];
    let mut lhs_upper = vec![Complex64::new(0.0, 0.0); n - 1];
    let mut max_edge = edge0;
    let mut max_defect: f64 = 0.0;

    for k in 0..steps {
        let t_mid = t0 + (k as f64 + 0.5) * dt;
        let ham = assemble_hamiltonian(sched, grid, h, t_mid);
        max_defect = max_defect.max(ham.hermiticity_defect());
        let hpsi = ham.apply(&psi);
        for j in 0..n {
            rhs[j] = psi[j] - half * hpsi[j];
            lhs_diag[j] = one + half * ham.diag[j];
        }
        for j in 0..n - 1 {
            lhs_lower[j] = half * ham.lower[j];
            lhs_upper[j] = half * ham.upper[j];
        }
        thomas(&lhs_lower, &lhs_diag, &lhs_upper, &mut rhs, &mut scratch)?;
        std::mem::swap(&mut psi, &mut rhs);

        let edge = boundary_amplitude(&psi);
        max_edge = max_edge.max(edge);
        if edge > MAX_BOUNDARY_AMPLITUDE {
            return Err(Error::Propagator(format!(
                "boundary amplitude {edge:.3e} exceeds {MAX_BOUNDARY_AMPLITUDE:e} at t = {}",
                t_mid + 0.5 * dt
            )));
        }
        let drift = (grid_norm_sq(&psi, h) - 1.0).abs();
        if !(drift <= MAX_NORM_DRIFT) {
            return Err(Error::Propagator(format!(
                "norm drift {drift:.3e} exceeds {MAX_NORM_DRIFT:e} at t = {}; unstable",
                t_mid + 0.5 * dt
            )));
        }
    }
    let norm_drift = (grid_norm_sq(&psi, h) - 1.0).abs();
    Ok(PropagationResult {
        grid: grid.to_vec(),
        psi_final: psi,
        t0,
        t1,
        dt,
        steps,
        fidelity: None,
        norm_drift,
        max_boundary_amplitude: max_edge,
        max_hermiticity_defect: max_defect,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub t: f64,
    pub dt: f64,
    pub fidelity: f64,
    /// `√(2(1 − fidelity))`, the phase-insensitive distance to the reference.
    pub distance: f64,
    pub norm_drift: f64,
}

/// Propagate from `t0` to each of `times` for every step in `dt_list`,
/// comparing with `reference(t)` sampled on `grid`.
pub fn fidelity_sweep<R>(
    sched: &ParameterSchedule,
    grid: &[f64],
    t0: f64,
    times: &[f64],
    dt_list: &[f64],
    mut reference: R,
) -> Result<Vec<SweepRow>>
where
    R: FnMut(f64) -> Result<Vec<Complex64>>,
{
    let psi0 = reference(t0)?;
    let mut rows = Vec::with_capacity(times.len() * dt_list.len());
    for &t in times {
        let target = reference(t)?;
        for &dt in dt_list {
            let r = propagate(sched, grid, &psi0, t0, t, dt)?.with_reference(&target)?;
            let fidelity = r.fidelity.unwrap_or(0.0);
            rows.push(SweepRow {
                t,
                dt: r.dt,
                fidelity,
                distance: (2.0 * (1.0 - fidelity).max(0.0)).sqrt(),
                norm_drift: r.norm_drift,
            });
        }
    }
    Ok(rows)
}

/// Ratios `distance(dt) / distance(dt/2)` for consecutive rows of a sweep
/// at one time with halving steps.
pub fn convergence_ratios(rows: &[SweepRow]) -> Vec<f64> {
    rows.windows(2).filter(|w| w[0].t == w[1].t).map(|w| w[0].distance / w[1].distance).collect()
}

/// `t, dt, fidelity, distance, norm_drift`.
pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "dt", "fidelity", "distance", "norm_drift"])?;
    for r in rows {
        w.write_record([r.t, r.dt, r.fidelity, r.distance, r.norm_drift].map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Snapshot CSV `q, re_psi, im_psi` with a comment header.
pub fn write_snapshot(path: &Path, t: f64, grid: &[f64], psi: &[Complex64]) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "# t={t}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["q", "re_psi", "im_psi"])?;
    for (q, z) in grid.iter().zip(psi) {
        w.write_record([q.to_string(), z.re.to_string(), z.im.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

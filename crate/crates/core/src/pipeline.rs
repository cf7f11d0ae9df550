//! Convenience builders that chain schedule → classical basis → invariant → `β`.

use std::sync::Arc;

use crate::classical::{solve_classical, CConstants, InitialData};
use crate::driving::{solve_beta, Beta0, DriveState};
use crate::error::Result;
use crate::invariant::build_shared;
use crate::schedule::{make_preset, Constants, ParameterSchedule, Preset};

/// Tolerance of the classical integration used by the builders.
pub const CLASSICAL_TOL: f64 = 1e-12;

/// Solve the whole chain for `sched` on `window`. `c = None` selects the
/// default constants for the basis.
pub fn build_drive(
    sched: &ParameterSchedule,
    window: (f64, f64),
    c: Option<CConstants>,
    beta0: Beta0,
) -> Result<DriveState> {
    let basis = Arc::new(solve_classical(sched, window, InitialData::default(), CLASSICAL_TOL)?);
    let c = c.unwrap_or_else(|| CConstants::default_for(&basis));
    let inv = build_shared(basis, c)?;
    solve_beta(&inv, sched, beta0)
}

/// Build a preset over `window`, or over its natural window when `None`.
pub fn preset_drive(
    preset: Preset,
    constants: &Constants,
    window: Option<(f64, f64)>,
    beta0: Beta0,
) -> Result<DriveState> {
    let sched = make_preset(preset, constants)?;
    let window = match window {
        Some(w) => w,
        None => preset.natural_window(constants)?,
    };
    build_drive(&sched, window, None, beta0)
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised while building or evaluating a scenario.
///
/// Each variant names the stage that failed so a runner can report where a
/// pipeline stopped.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("preset {preset}: missing constant `{name}`")]
    MissingConstant { preset: &'static str, name: &'static str },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("schedule: {0}")]
    Schedule(String),

    #[error("ode solver: {0}")]
    Solver(String),

    #[error("quadrature did not converge on [{a}, {b}]: estimated error {error:e}")]
    Quadrature { a: f64, b: f64, error: f64 },

    #[error("time {t} is outside the window [{start}, {end}]")]
    OutsideWindow { t: f64, start: f64, end: f64 },

    #[error("invariant: {0}")]
    Invariant(String),

    #[error("wave function: {0}")]
    WaveFunction(String),

    #[error("cyclic analysis: {0}")]
    Cyclic(String),

    #[error("propagator: {0}")]
    Propagator(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

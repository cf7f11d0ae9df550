//! Quantum generalized driven oscillator: classical solutions, invariants,
//! exact wave functions, geometric phases and a numerical reference solver.

pub mod driving;
pub mod error;
pub mod fd;
pub mod geometric;
pub mod invariant;
pub mod ode;
pub mod oracle;
pub mod pipeline;
pub mod quadrature;
pub mod classical;
pub mod schedule;
pub mod wavefunction;

pub use error::{Error, Result};

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> + Clone {
    let step = if n > 1 { (b - a) / (n - 1) as f64 } else { 0.0 };
    (0..n).map(move |k| if k + 1 == n && n > 1 { b } else { a + step * k as f64 })
}

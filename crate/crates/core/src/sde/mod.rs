//! Exponential-Euler integration of truncated SDEs in real coordinates,
//! counter-addressed noise, coupled (nudged) pairs and martingale tails.
//!
//! Ensembles are embarrassingly parallel: path `p` uses noise stream `p`,
//! and [`ensemble`] collects results in path order, so every reduction is
//! independent of thread scheduling.

mod coupled;
mod dynamics;
mod integrate;
mod martingale;
mod noise;

pub use coupled::{coupled_integrate, BetaBound, CoupledRecord, CoupledTrajectory, Nudge, PathIntegrand};
pub use dynamics::{weighted_norm_sq, Dynamics, StepFactors, TestSystem};
pub use integrate::{
    first_crossing, first_exit_time, integrate, integrate_with, step_size_check, write_ensemble_csv, RecordSpec,
    StepCheck, TimeGrid, Trajectory, OVERFLOW_GUARD,
};
pub use martingale::{martingale_tail_probe, MartingaleRecord, TailReport, TailRow};
pub use noise::NoiseStream;

use rayon::prelude::*;

/// Default step size.
pub const DEFAULT_DT: f64 = 1e-3;

/// Runs `f(path)` for `0..paths` in parallel, results in path order.
pub fn ensemble<T: Send>(paths: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..paths).into_par_iter().map(f).collect()
}

/// Like [`ensemble`] but stops at the first error (in path order).
pub fn try_ensemble<T: Send>(paths: usize, f: impl Fn(usize) -> crate::Result<T> + Sync + Send) -> crate::Result<Vec<T>> {
    ensemble(paths, f).into_iter().collect()
}

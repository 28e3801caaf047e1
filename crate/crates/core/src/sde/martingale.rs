use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{proportion_se, wilson, Z95};

/// A sampled martingale path with its quadratic variation and the running
/// supremum `Xi_t = sup_{s <= t} (M_s - kappa <M>_s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleRecord {
    pub kappa: f64,
    pub m: Vec<f64>,
    pub qv: Vec<f64>,
    pub xi: Vec<f64>,
}

impl MartingaleRecord {
    pub fn from_path(m: Vec<f64>, qv: Vec<f64>, kappa: f64) -> Result<Self> {
        if m.len() != qv.len() || m.is_empty() {
            return Err(Error::Layout("martingale path and quadratic variation differ in length".into()));
        }
        if m[0] != 0.0 || qv[0] != 0.0 {
            return Err(Error::Layout("martingale must start at 0".into()));
        }
        if qv.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Layout("quadratic variation decreases".into()));
        }
        if !(kappa > 0.0) {
            return Err(Error::Config(format!("kappa {kappa} must be positive")));
        }
        let mut sup = f64::NEG_INFINITY;
        let xi = m
            .iter()
            .zip(&qv)
            .map(|(a, q)| {
                sup = sup.max(a - kappa * q);
                sup
            })
            .collect();
        Ok(MartingaleRecord { kappa, m, qv, xi })
    }

    pub fn supremum(&self) -> f64 {
        *self.xi.last().expect("nonempty path")
    }
}

/// One row of the tail report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub r: f64,
    /// `exp(-2 kappa R)`.
    pub bound: f64,
    pub hits: usize,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    pub se: f64,
    /// Bound at or above the lower Wilson end.
    pub bound_holds: bool,
    /// Estimate within 3 standard errors of the exponential law.
    pub tight: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub kappa: f64,
    pub paths: usize,
    pub horizon: f64,
    pub dt: f64,
    pub rows: Vec<TailRow>,
    /// Fraction of paths whose supremum still grew in the last tenth of
    /// the horizon.
    pub late_fraction: f64,
    pub horizon_warning: bool,
}

impl TailReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.bound_holds && r.tight)
    }
}

/// Supremum of `B_t - kappa t` over `[0, horizon]` for one Brownian path,
/// and the time it was attained.
///
/// Each step draws the Gaussian endpoint and then the exact maximum of the
/// Brownian bridge between the endpoints,
/// `(a + b + sqrt((b - a)^2 - 2 dt ln U)) / 2`, so the supremum has the law
/// of the continuous-time one.
fn drifted_supremum(rng: &mut ChaCha8Rng, kappa: f64, dt: f64, steps: usize) -> (f64, usize) {
    let sd = dt.sqrt();
    let drift = kappa * dt;
    let mut a = 0.0f64;
    let mut sup = 0.0f64;
    let mut at = 0;
    for step in 0..steps {
        let z: f64 = rng.sample(StandardNormal);
        let b = a + sd * z - drift;
        let u: f64 = 1.0 - rng.gen::<f64>();
        let top = 0.5 * (a + b + ((b - a) * (b - a) - 2.0 * dt * u.ln()).sqrt());
        if top > sup {
            sup = top;
            at = step;
        }
        a = b;
    }
    (sup, at)
}

/// Monte Carlo estimate of `P(Xi_kappa >= R)` for Brownian `M` (where
/// `<M>_t = t`), checked against the tail bound `exp(-2 kappa R)`.
///
/// For Brownian motion `Xi_kappa` is exactly exponential with rate
/// `2 kappa`, so the bound is also the exact value; rows additionally test
/// that the estimate lies within 3 standard errors of it.
pub fn martingale_tail_probe(kappa: f64, r_grid: &[f64], paths: usize, horizon: f64, dt: f64, seed: u64) -> Result<TailReport> {
    if !(kappa > 0.0) || !(horizon > 0.0) || !(dt > 0.0) || paths == 0 {
        return Err(Error::Config("tail probe needs kappa, horizon, dt > 0 and at least one path".into()));
    }
    if r_grid.iter().any(|&r| !(r >= 0.0)) {
        return Err(Error::Config("tail levels must be nonnegative".into()));
    }
    let steps = (horizon / dt).ceil() as usize;
    let dt = horizon / steps as f64;
    let late = steps - steps / 10;
    let sups: Vec<(f64, usize)> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            drifted_supremum(&mut rng, kappa, dt, steps)
        })
        .collect();
    let late_count = sups.iter().filter(|(_, at)| *at >= late).count();
    let late_fraction = late_count as f64 / paths as f64;
    let rows = r_grid
        .iter()
        .map(|&r| {
            let hits = sups.iter().filter(|(s, _)| *s >= r).count();
            let estimate = hits as f64 / paths as f64;
            let bound = (-2.0 * kappa * r).exp();
            let (lo, hi) = wilson(hits, paths, Z95);
            let exact_se = (bound * (1.0 - bound) / paths as f64).sqrt();
            let se = proportion_se(hits, paths);
            // at R = 0 the law is degenerate: every path hits
            let tight = (estimate - bound).abs() <= 3.0 * exact_se.max(se) || estimate == bound;
            TailRow { r, bound, hits, estimate, lo, hi, se, bound_holds: bound >= lo, tight }
        })
        .collect();
    Ok(TailReport { kappa, paths, horizon, dt, rows, late_fraction, horizon_warning: late_fraction > 0.01 })
}

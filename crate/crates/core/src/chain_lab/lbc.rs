use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{condition_c_exact, liminf_hitting, ConditionC, FiniteChain, MetricChoice, CONVERGENCE_TOL};
use crate::error::{Error, Result};

/// Where the implication stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LbcOutcome {
    /// `liminf_t P^t(x, {V <= R}) < 1/2` for some `x`: `R` too small.
    LevelSetTooSmall,
    /// `min_{V <= R} P^T(x, B(z, eps)) = 0` (or `{V <= R}` is empty).
    IrreducibilityFails,
    ConclusionHolds,
    /// Premises true, conclusion false: a bug or a misuse of the statement.
    ConclusionFails,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LbcExactReport {
    /// Largest `P^t V - h(t) V - C` seen on the checked grid (`<= 0`).
    pub lyapunov_gap: f64,
    pub level_set: Vec<usize>,
    /// Chebyshev lower bound `1 - C / R` on the tail mass of `{V <= R}`.
    pub chebyshev: f64,
    /// Exact `min_x liminf_t P^t(x, {V <= R})`.
    pub level_liminf: f64,
    /// `min_{x in {V <= R}} P^T(x, B(z, eps))`.
    pub p: f64,
    /// `p / 2`.
    pub bound: f64,
    pub direct: ConditionC,
    pub outcome: LbcOutcome,
}

/// Smallest `C >= 0` with `P^t V <= h(t) V + C` for `t = 0..=t_max`.
pub fn fit_lyapunov_constant(chain: &FiniteChain, v: &[f64], h: &dyn Fn(usize) -> f64, t_max: usize) -> f64 {
    let mut pv = DVector::from_column_slice(v);
    let mut c = 0.0f64;
    for t in 0..=t_max {
        if t > 0 {
            pv = &chain.p * pv;
        }
        for (i, &vi) in v.iter().enumerate() {
            c = c.max(pv[i] - h(t) * vi);
        }
    }
    c
}

/// Exact check of the Lyapunov + irreducibility implication on a chain:
/// verifies `P^t V <= h(t) V + C` for `t = 0..=t_check` (error otherwise),
/// the level-set and irreducibility premises, then compares the exact
/// condition-(C) value at `(z, eps)` with `p / 2`.
#[allow(clippy::too_many_arguments)]
pub fn prop_lbc_exact(
    chain: &FiniteChain,
    v: &[f64],
    h: &dyn Fn(usize) -> f64,
    c: f64,
    z: usize,
    eps: f64,
    r: f64,
    t_irr: usize,
    t_check: usize,
) -> Result<LbcExactReport> {
    let n = chain.len();
    if v.len() != n || v.iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::InvalidChain("V must be a non-negative vector on the states".into()));
    }
    let mut pv = DVector::from_column_slice(v);
    let mut gap = f64::NEG_INFINITY;
    for t in 0..=t_check {
        if t > 0 {
            pv = &chain.p * pv;
        }
        for i in 0..n {
            let g = pv[i] - h(t) * v[i] - c;
            gap = gap.max(g);
            if g > CONVERGENCE_TOL {
                return Err(Error::LyapunovPremise(format!("P^{t} V({i}) = {} > h({t}) V + C = {}", pv[i], h(t) * v[i] + c)));
            }
        }
    }
    let level_set: Vec<usize> = (0..n).filter(|&i| v[i] <= r).collect();
    let ball = chain.ball(z, eps, MetricChoice::Rho);
    let direct = condition_c_exact(chain, z, eps, MetricChoice::Rho)?;
    let chebyshev = 1.0 - c / r;
    let mut report = LbcExactReport {
        lyapunov_gap: gap,
        level_set: level_set.clone(),
        chebyshev,
        level_liminf: 0.0,
        p: 0.0,
        bound: 0.0,
        direct,
        outcome: LbcOutcome::IrreducibilityFails,
    };
    if level_set.is_empty() {
        return Ok(report);
    }
    report.level_liminf = (0..n).map(|x| liminf_hitting(chain, x, &level_set)).collect::<Result<Vec<f64>>>()?.into_iter().fold(f64::INFINITY, f64::min);
    let pt = chain.power(t_irr);
    report.p = level_set.iter().map(|&x| ball.iter().map(|&j| pt[(x, j)]).sum::<f64>()).fold(f64::INFINITY, f64::min);
    report.bound = 0.5 * report.p;
    report.outcome = if report.level_liminf < 0.5 - CONVERGENCE_TOL {
        LbcOutcome::LevelSetTooSmall
    } else if report.p <= 0.0 {
        LbcOutcome::IrreducibilityFails
    } else if direct.value >= report.bound - CONVERGENCE_TOL {
        LbcOutcome::ConclusionHolds
    } else {
        LbcOutcome::ConclusionFails
    };
    Ok(report)
}

/// Birth-death chain on `0..n`: up with probability `up`, down with `down`,
/// holding otherwise; reflecting at both ends.
pub fn birth_death(n: usize, up: f64, down: f64) -> Result<FiniteChain> {
    if n == 0 || !(up >= 0.0 && down >= 0.0 && up + down <= 1.0) {
        return Err(Error::InvalidChain(format!("birth-death chain n = {n}, up = {up}, down = {down}")));
    }
    let rows = (0..n)
        .map(|i| {
            let mut r = vec![0.0; n];
            let u = if i + 1 < n { up } else { 0.0 };
            let d = if i > 0 { down } else { 0.0 };
            if i + 1 < n {
                r[i + 1] = u;
            }
            if i > 0 {
                r[i - 1] = d;
            }
            r[i] = 1.0 - u - d;
            r
        })
        .collect();
    FiniteChain::from_rows(rows)
}

/// `(n, up, down)` grid of the birth-death battery: sizes 3 to 12 with
/// downward, balanced and upward drift.
pub fn birth_death_battery() -> Vec<(usize, f64, f64)> {
    let mut out = Vec::new();
    for n in 3..=12 {
        for (up, down) in [(0.1, 0.5), (0.2, 0.4), (0.3, 0.3), (0.25, 0.25), (0.4, 0.2), (0.45, 0.1)] {
            out.push((n, up, down));
        }
    }
    out
}

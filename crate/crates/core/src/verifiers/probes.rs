use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{CurvePoint, EnsembleEstimate, Sampling, TestFunctionDictionary, VerdictReport};
use crate::error::{Error, Result};
use crate::models::{LyapunovForm, Model};
use crate::sde::{integrate, try_ensemble, weighted_norm_sq, Dynamics, NoiseStream, RecordSpec, TimeGrid};
use crate::stats::{mean_se, proportion_se, wilson, Z95};

pub const LYAPUNOV_REF: &str = "E V(u_t) <= h(t) V(x) + C, h(t) = e^{-rate t}";
pub const CONTINUITY_REF: &str = "limsup_{x->z} limsup_{t->inf} |P_t f(x) - P_t f(z)| = 0";
pub const LOWER_BOUND_REF: &str = "inf_x liminf_{t->inf} P_t(x, B(z, eps)) > 0";
pub const IRREDUCIBILITY_REF: &str = "inf_{x in {V <= R}} P_T(x, B(z, eps)) > 0";
pub const STABILITY_REF: &str = "<f, P_t mu> -> <f, mu_*> for bounded Lipschitz f";
pub const COMPOSITION_REF: &str = "P_t(x, {V <= R}) >= 1 - P_t V(x) / R; liminf_t P_t(x, B(z, eps)) >= p/2";

/// Runs the ensemble from `x0` and maps every recorded state through `obs`.
fn observe<T: Send>(
    model: &Model,
    x0: &[f64],
    grid: &TimeGrid,
    s: &Sampling,
    stream0: u64,
    obs: impl Fn(&[f64]) -> T + Sync,
) -> Result<(Vec<f64>, Vec<Vec<T>>)> {
    let spec = RecordSpec { stride: s.stride.max(1), keep_states: true, ..Default::default() };
    let dim = model.dim();
    let paths = try_ensemble(s.paths, |p| {
        let tr = integrate(model, x0, grid, &NoiseStream::new(s.seed, stream0 + p as u64, dim), &spec)?;
        Ok((tr.times, tr.states.iter().map(|x| obs(x)).collect::<Vec<T>>()))
    })?;
    let times = paths.first().map(|p| p.0.clone()).unwrap_or_default();
    Ok((times, paths.into_iter().map(|p| p.1).collect()))
}

fn window(times: &[f64], t_tail: f64) -> Vec<usize> {
    times.iter().enumerate().filter(|(_, &t)| t >= t_tail - 1e-9 * t_tail.abs().max(1.0)).map(|(i, _)| i).collect()
}

fn check_window(times: &[f64], t_tail: f64) -> Result<Vec<usize>> {
    let w = window(times, t_tail);
    if w.is_empty() {
        return Err(Error::InvalidGrid(format!("tail window starts at {t_tail}, after the last output time")));
    }
    Ok(w)
}

fn check_state(model: &Model, x: &[f64]) -> Result<()> {
    if x.len() != model.dim() {
        return Err(Error::Layout(format!("{} coordinates for a {}-dimensional model", x.len(), model.dim())));
    }
    Ok(())
}

// ---------------------------------------------------------------- Lyapunov

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovRow {
    pub x0: usize,
    pub t: f64,
    pub mean: f64,
    pub se: f64,
    pub bound: f64,
    pub ok: bool,
    /// Frequency of `{V(u_t) <= level}` when a level is requested.
    pub below_level: Option<f64>,
    pub chebyshev_ok: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub form: LyapunovForm,
    /// `V(x0)` per initial condition.
    pub initial: Vec<f64>,
    pub paths: usize,
    pub rows: Vec<LyapunovRow>,
    /// Fitted `h(t) = e^{-rate t}`.
    pub fitted_rate: f64,
    /// Smallest `C` with `mean <= h(t) V(x) + C` at every row.
    pub fitted_constant: f64,
    pub fitted_constant_se: f64,
    pub level: Option<f64>,
    pub passed: bool,
}

/// Ensemble mean of the model's Lyapunov functional against its bound.
///
/// With `level = Some(R)` also checks the Chebyshev step
/// `freq(V <= R) >= 1 - (h(t) V(x) + C) / R - 3 s.e.` with the fitted pair.
pub fn lyapunov_verify(model: &Model, x0s: &[Vec<f64>], s: &Sampling, level: Option<f64>) -> Result<LyapunovReport> {
    let form = model.lyapunov();
    let grid = s.grid()?;
    let weights = model.weights();
    let v = |x: &[f64]| weighted_norm_sq(weights, x, form.exponent);
    let mut rows = Vec::new();
    let mut initial = Vec::new();
    let mut samples: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut times = Vec::new();
    for (i, x0) in x0s.iter().enumerate() {
        check_state(model, x0)?;
        let (ts, vals) = observe(model, x0, &grid, s, 0, v)?;
        let v0 = v(x0);
        initial.push(v0);
        for (k, &t) in ts.iter().enumerate() {
            let col: Vec<f64> = vals.iter().map(|p| p[k]).collect();
            let (mean, se) = mean_se(&col);
            let bound = form.bound(v0, t);
            rows.push(LyapunovRow { x0: i, t, mean, se, bound, ok: mean <= bound + 3.0 * se, below_level: None, chebyshev_ok: None });
        }
        times = ts;
        samples.push(vals);
    }
    let (mut fitted, mut fitted_se) = (f64::NEG_INFINITY, 0.0);
    for r in &rows {
        let c = r.mean - (-form.rate * r.t).exp() * initial[r.x0];
        if c > fitted {
            fitted = c;
            fitted_se = r.se;
        }
    }
    let fitted = fitted.max(0.0);
    if let Some(lv) = level {
        let per_x0 = times.len();
        for r in rows.iter_mut() {
            let k = times.iter().position(|&t| t == r.t).unwrap_or(0);
            let hits = samples[r.x0].iter().filter(|p| p[k] <= lv).count();
            let freq = hits as f64 / s.paths as f64;
            let need = 1.0 - ((-form.rate * r.t).exp() * initial[r.x0] + fitted) / lv;
            r.below_level = Some(freq);
            r.chebyshev_ok = Some(freq >= need - 3.0 * proportion_se(hits, s.paths));
        }
        debug_assert_eq!(rows.len(), per_x0 * x0s.len());
    }
    let passed = rows.iter().all(|r| r.ok && r.chebyshev_ok != Some(false));
    Ok(LyapunovReport {
        form,
        initial,
        paths: s.paths,
        rows,
        fitted_rate: form.rate,
        fitted_constant: fitted,
        fitted_constant_se: fitted_se,
        level,
        passed,
    })
}

impl LyapunovReport {
    pub fn verdict(&self) -> VerdictReport {
        let c = self.fitted_constant;
        let se = self.fitted_constant_se;
        let curve = self
            .rows
            .iter()
            .map(|r| CurvePoint { x: r.x0 as f64, t: r.t, value: r.mean, lo: r.mean - 3.0 * r.se, hi: r.mean + 3.0 * r.se })
            .collect();
        VerdictReport::new("lyapunov", LYAPUNOV_REF, c, [c - 3.0 * se, c + 3.0 * se], self.passed)
            .with_curve(curve)
            .flag(c > self.form.constant, "fitted constant above the analytic constant")
    }
}

// ------------------------------------------------------ eventual continuity

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuityRow {
    pub radius: f64,
    /// `max_{f, t in window, direction} |E f(u_t^x) - E f(u_t^z)|`.
    pub d: f64,
    pub se: f64,
    pub direction: usize,
    pub function: usize,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub rows: Vec<ContinuityRow>,
    pub lipschitz: f64,
    pub window: [f64; 2],
    pub dictionary_size: usize,
    pub paths: usize,
    pub monotone: bool,
    pub smallest_ok: bool,
    pub passed: bool,
}

/// Eventual-continuity probe with common random numbers: path `p` of every
/// start `z + radius * direction` uses the same noise as path `p` from `z`.
/// Directions are rescaled to unit length in the dictionary's norm.
#[allow(clippy::too_many_arguments)]
pub fn eventual_continuity_probe(
    model: &Model,
    z: &[f64],
    radii: &[f64],
    directions: &[Vec<f64>],
    dict: &TestFunctionDictionary,
    t_tail: f64,
    s: &Sampling,
) -> Result<ContinuityReport> {
    check_state(model, z)?;
    if radii.is_empty() || radii.iter().any(|r| !(*r >= 0.0)) || radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("radii must be non-negative and strictly descending".into()));
    }
    if directions.is_empty() {
        return Err(Error::Config("at least one direction is needed".into()));
    }
    let zero = vec![0.0; z.len()];
    let mut units = Vec::new();
    for d in directions {
        check_state(model, d)?;
        let n = dict.distance(d, &zero);
        if !(n > 0.0) {
            return Err(Error::Config("zero direction".into()));
        }
        units.push(d.iter().map(|v| v / n).collect::<Vec<f64>>());
    }
    let grid = s.grid()?;
    let spec = RecordSpec { stride: s.stride.max(1), keep_states: true, ..Default::default() };
    let dim = model.dim();
    let starts: Vec<Vec<f64>> = radii
        .iter()
        .flat_map(|&r| units.iter().map(move |u| z.iter().zip(u).map(|(a, b)| a + r * b).collect::<Vec<f64>>()))
        .collect();

    // per path: times, then [start][window time][function] differences
    let per_path = try_ensemble(s.paths, |p| {
        let noise = NoiseStream::new(s.seed, p as u64, dim);
        let base = integrate(model, z, &grid, &noise, &spec)?;
        let w = check_window(&base.times, t_tail)?;
        let fz: Vec<Vec<f64>> = w.iter().map(|&k| dict.eval_all(&base.states[k])).collect();
        let mut out = Vec::with_capacity(starts.len());
        for x in &starts {
            let tr = integrate(model, x, &grid, &noise, &spec)?;
            out.push(
                w.iter()
                    .zip(&fz)
                    .map(|(&k, fz)| dict.eval_all(&tr.states[k]).iter().zip(fz).map(|(a, b)| a - b).collect::<Vec<f64>>())
                    .collect::<Vec<_>>(),
            );
        }
        Ok((w.iter().map(|&k| base.times[k]).collect::<Vec<f64>>(), out))
    })?;
    let times = per_path[0].0.clone();
    let nd = units.len();
    let mut rows = Vec::new();
    for (ri, &radius) in radii.iter().enumerate() {
        let mut best = ContinuityRow { radius, d: 0.0, se: 0.0, direction: 0, function: 0, t: times[0] };
        let mut first = true;
        for di in 0..nd {
            let si = ri * nd + di;
            for (k, &t) in times.iter().enumerate() {
                for f in 0..dict.len() {
                    let col: Vec<f64> = per_path.iter().map(|p| p.1[si][k][f]).collect();
                    let (m, se) = mean_se(&col);
                    if first || m.abs() > best.d {
                        best = ContinuityRow { radius, d: m.abs(), se, direction: di, function: f, t };
                        first = false;
                    }
                }
            }
        }
        rows.push(best);
    }
    let monotone = rows.windows(2).all(|w| w[1].d <= w[0].d + 2.0 * (w[0].se.powi(2) + w[1].se.powi(2)).sqrt());
    let lip = dict.max_lipschitz();
    let last = rows.last().expect("nonempty radii");
    let smallest_ok = last.d <= 2.0 * last.se + 0.01 * lip * last.radius;
    Ok(ContinuityReport {
        window: [times[0], *times.last().unwrap()],
        rows,
        lipschitz: lip,
        dictionary_size: dict.len(),
        paths: s.paths,
        monotone,
        smallest_ok,
        passed: monotone && smallest_ok,
    })
}

impl ContinuityReport {
    pub fn verdict(&self) -> VerdictReport {
        let last = self.rows.last().expect("nonempty");
        let curve = self
            .rows
            .iter()
            .map(|r| CurvePoint { x: r.radius, t: r.t, value: r.d, lo: (r.d - 2.0 * r.se).max(0.0), hi: r.d + 2.0 * r.se })
            .collect();
        VerdictReport::new(
            "eventual_continuity",
            CONTINUITY_REF,
            last.d,
            [(last.d - 2.0 * last.se).max(0.0), last.d + 2.0 * last.se],
            self.passed,
        )
        .with_curve(curve)
        .flag(!self.monotone, "D(radius) not monotone within 2 s.e.")
        .flag(!self.smallest_ok, "smallest-radius D above tolerance")
    }
}

// ------------------------------------------------------------ condition (C)

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallFrequency {
    pub x0: usize,
    pub t: f64,
    pub hits: usize,
    pub freq: f64,
    pub se: f64,
    pub lo: f64,
    pub hi: f64,
}

impl BallFrequency {
    fn new(x0: usize, t: f64, hits: usize, n: usize) -> Self {
        let (lo, hi) = wilson(hits, n, Z95);
        BallFrequency { x0, t, hits, freq: hits as f64 / n as f64, se: proportion_se(hits, n), lo, hi }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub z: Vec<f64>,
    pub eps: f64,
    pub window: [f64; 2],
    pub paths: usize,
    /// Every (x0, window time) frequency.
    pub rows: Vec<BallFrequency>,
    /// Per x0, the minimizing window time (the liminf estimate).
    pub liminf: Vec<BallFrequency>,
    /// The infimum over x0.
    pub inf: BallFrequency,
    pub passed: bool,
}

impl LowerBoundReport {
    pub fn estimate(&self) -> EnsembleEstimate {
        EnsembleEstimate { estimate: self.inf.freq, se: self.inf.se, paths: self.paths, window: self.window }
    }

    pub fn verdict(&self) -> VerdictReport {
        let curve = self
            .rows
            .iter()
            .map(|r| CurvePoint { x: r.x0 as f64, t: r.t, value: r.freq, lo: r.lo, hi: r.hi })
            .collect();
        VerdictReport::new("condition_c", LOWER_BOUND_REF, self.inf.freq, [self.inf.lo, self.inf.hi], self.passed)
            .with_curve(curve)
            .flag(self.inf.hits == 0, "ball never hit in the tail window")
    }
}

fn ball_hits<'a>(model: &'a Model, z: &[f64], eps: f64) -> impl Fn(&[f64]) -> bool + Sync + 'a {
    let weights = model.weights();
    let r = model.metric_exponent();
    let z = z.to_vec();
    move |x: &[f64]| {
        let d: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a - b).collect();
        weighted_norm_sq(weights, &d, r) < eps * eps
    }
}

/// Condition (C) probe: per start, the minimum over the tail window of the
/// frequency of `{|u_t - z| < eps}`; then the infimum over starts.
pub fn lower_bound_probe(model: &Model, z: &[f64], eps: f64, x0s: &[Vec<f64>], t_tail: f64, s: &Sampling) -> Result<LowerBoundReport> {
    check_state(model, z)?;
    if !(eps > 0.0) || x0s.is_empty() {
        return Err(Error::Config("need eps > 0 and at least one start".into()));
    }
    let grid = s.grid()?;
    let hit = ball_hits(model, z, eps);
    let mut rows = Vec::new();
    let mut liminf = Vec::new();
    let mut win = [0.0, 0.0];
    for (i, x0) in x0s.iter().enumerate() {
        check_state(model, x0)?;
        let (times, vals) = observe(model, x0, &grid, s, 0, &hit)?;
        let w = check_window(&times, t_tail)?;
        win = [times[w[0]], times[*w.last().unwrap()]];
        let mut worst: Option<BallFrequency> = None;
        for &k in &w {
            let hits = vals.iter().filter(|p| p[k]).count();
            let b = BallFrequency::new(i, times[k], hits, s.paths);
            rows.push(b);
            if worst.map_or(true, |m| b.hits < m.hits) {
                worst = Some(b);
            }
        }
        liminf.push(worst.unwrap());
    }
    let inf = *liminf.iter().min_by_key(|b| b.hits).unwrap();
    Ok(LowerBoundReport { z: z.to_vec(), eps, window: win, paths: s.paths, rows, liminf, inf, passed: inf.lo > 0.0 })
}

// ------------------------------------------------------ uniform irreducibility

/// Time for deterministic decay at `rate` from radius `R` into `eps/2`:
/// `log(2 (R + 1) / eps) / rate`.
pub fn irreducibility_time(r: f64, eps: f64, rate: f64) -> f64 {
    (2.0 * (r + 1.0) / eps).ln() / rate
}

/// Starting points in `{V <= R}`: the origin, then alternately points on the
/// boundary sphere and at radius `sqrt(R U)` inside, in random directions.
pub fn energy_ball_samples(weights: &[f64], exponent: f64, r: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = weights.len();
    let mut out = vec![vec![0.0; n]];
    while out.len() < count {
        let d: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = weighted_norm_sq(weights, &d, exponent).sqrt();
        if norm == 0.0 {
            continue;
        }
        let radius = if out.len() % 2 == 1 { r.sqrt() } else { (r * rng.gen::<f64>()).sqrt() };
        out.push(d.iter().map(|v| v * radius / norm).collect());
    }
    out.truncate(count.max(1));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrreducibilityReport {
    pub t: f64,
    pub eps: f64,
    pub paths: usize,
    pub per_x0: Vec<BallFrequency>,
    pub min: BallFrequency,
    pub passed: bool,
}

impl IrreducibilityReport {
    pub fn verdict(&self) -> VerdictReport {
        let curve = self
            .per_x0
            .iter()
            .map(|r| CurvePoint { x: r.x0 as f64, t: r.t, value: r.freq, lo: r.lo, hi: r.hi })
            .collect();
        VerdictReport::new("irreducibility", IRREDUCIBILITY_REF, self.min.freq, [self.min.lo, self.min.hi], self.passed)
            .with_curve(curve)
    }
}

/// Minimum over starts of the frequency of `{|u_T - z| < eps}`.
/// `s.horizon` is ignored; the run length is `t`.
pub fn uniform_irreducibility_probe(model: &Model, z: &[f64], eps: f64, x0s: &[Vec<f64>], t: f64, s: &Sampling) -> Result<IrreducibilityReport> {
    check_state(model, z)?;
    if !(eps > 0.0) || !(t > 0.0) || x0s.is_empty() {
        return Err(Error::Config("need eps > 0, T > 0 and at least one start".into()));
    }
    let s = Sampling { horizon: t, stride: usize::MAX, ..*s };
    let grid = s.grid()?;
    let hit = ball_hits(model, z, eps);
    let mut per_x0 = Vec::new();
    for (i, x0) in x0s.iter().enumerate() {
        check_state(model, x0)?;
        let (times, vals) = observe(model, x0, &grid, &s, 0, &hit)?;
        let k = times.len() - 1;
        per_x0.push(BallFrequency::new(i, times[k], vals.iter().filter(|p| p[k]).count(), s.paths));
    }
    let min = *per_x0.iter().min_by_key(|b| b.hits).unwrap();
    Ok(IrreducibilityReport { t: grid.t1(), eps, paths: s.paths, per_x0, min, passed: min.lo > 0.0 })
}

// ------------------------------------------------------------- stability

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub t: f64,
    pub d: f64,
    /// Pooled s.e. of the maximizing function.
    pub se: f64,
    pub function: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub rows: Vec<DistanceRow>,
    pub floor: f64,
    pub paths: usize,
    pub passed: bool,
}

/// Dual-Lipschitz distance between the laws started at `x` and `y`,
/// estimated from independent ensembles (streams `0..P` for `x`,
/// `P..2P` for `y`).
pub fn stability_distance(model: &Model, x: &[f64], y: &[f64], dict: &TestFunctionDictionary, floor: f64, s: &Sampling) -> Result<StabilityReport> {
    check_state(model, x)?;
    check_state(model, y)?;
    let grid = s.grid()?;
    let f = |u: &[f64]| dict.eval_all(u);
    let (times, fx) = observe(model, x, &grid, s, 0, f)?;
    let (_, fy) = observe(model, y, &grid, s, s.paths as u64, f)?;
    let mut rows = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let mut best = DistanceRow { t, d: -1.0, se: 0.0, function: 0 };
        for j in 0..dict.len() {
            let (mx, sx) = mean_se(&fx.iter().map(|p| p[k][j]).collect::<Vec<_>>());
            let (my, sy) = mean_se(&fy.iter().map(|p| p[k][j]).collect::<Vec<_>>());
            if (mx - my).abs() > best.d {
                best = DistanceRow { t, d: (mx - my).abs(), se: (sx * sx + sy * sy).sqrt(), function: j };
            }
        }
        rows.push(best);
    }
    let last = rows.last().expect("grid has a final time");
    let passed = last.d <= 3.0 * last.se + floor;
    Ok(StabilityReport { rows, floor, paths: s.paths, passed })
}

impl StabilityReport {
    pub fn final_row(&self) -> DistanceRow {
        *self.rows.last().expect("nonempty")
    }

    pub fn verdict(&self) -> VerdictReport {
        let l = self.final_row();
        let curve = self.rows.iter().map(|r| CurvePoint { x: 0.0, t: r.t, value: r.d, lo: (r.d - 3.0 * r.se).max(0.0), hi: r.d + 3.0 * r.se }).collect();
        VerdictReport::new("stability", STABILITY_REF, l.d, [(l.d - 3.0 * l.se).max(0.0), l.d + 3.0 * l.se], self.passed).with_curve(curve)
    }
}

// ------------------------------------------------------------ composition

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositionReport {
    /// `1 - (h(t) max V(x) + C) / R` with the fitted pair.
    pub markov: f64,
    pub markov_ok: bool,
    /// Irreducibility estimate and its s.e.
    pub p: f64,
    pub p_se: f64,
    /// `markov * p`, at least `p / 2` when `markov_ok`.
    pub composed: f64,
    pub direct: f64,
    pub direct_se: f64,
    pub passed: bool,
}

/// Assembles the Lyapunov, irreducibility and condition-(C) reports:
/// checks the Chebyshev level, then that the direct liminf estimate is at
/// least `p/2` up to three pooled standard errors.
pub fn prop_lbc_composition(
    lyapunov: Option<&LyapunovReport>,
    irreducibility: Option<&IrreducibilityReport>,
    direct: Option<&LowerBoundReport>,
    r: f64,
    t: f64,
) -> Result<CompositionReport> {
    let ly = lyapunov.ok_or_else(|| Error::MissingPrerequisite("lyapunov report".into()))?;
    let ir = irreducibility.ok_or_else(|| Error::MissingPrerequisite("irreducibility report".into()))?;
    let lb = direct.ok_or_else(|| Error::MissingPrerequisite("condition (C) report".into()))?;
    if !(r > 0.0) {
        return Err(Error::Config(format!("energy level R = {r}")));
    }
    let vmax = ly.initial.iter().copied().fold(0.0, f64::max);
    let markov = 1.0 - ((-ly.fitted_rate * t).exp() * vmax + ly.fitted_constant) / r;
    let p = ir.min.freq;
    let se = (lb.inf.se.powi(2) + (0.5 * ir.min.se).powi(2)).sqrt();
    let markov_ok = markov >= 0.5;
    Ok(CompositionReport {
        markov,
        markov_ok,
        p,
        p_se: ir.min.se,
        composed: markov * p,
        direct: lb.inf.freq,
        direct_se: lb.inf.se,
        passed: markov_ok && lb.inf.freq + 3.0 * se >= 0.5 * p,
    })
}

impl CompositionReport {
    pub fn verdict(&self) -> VerdictReport {
        VerdictReport::new("lbc_composition", COMPOSITION_REF, 0.5 * self.p, [0.5 * (self.p - 3.0 * self.p_se), 0.5 * (self.p + 3.0 * self.p_se)], self.passed)
            .flag(!self.markov_ok, "Chebyshev level below 1/2: R too small for the fitted Lyapunov pair")
    }
}

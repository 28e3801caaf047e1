use std::io::Write;

use serde::{Deserialize, Serialize};

use super::dynamics::{weighted_norm_sq, Dynamics, StepFactors};
use super::noise::NoiseStream;
use crate::error::{Error, Result};

/// Norm above which a path is declared blown up.
pub const OVERFLOW_GUARD: f64 = 1e12;

/// Uniform time grid `t0, t0 + dt, ..., t0 + steps dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, steps: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() || !t0.is_finite() {
            return Err(Error::InvalidGrid(format!("dt = {dt}, t0 = {t0}")));
        }
        Ok(TimeGrid { t0, dt, steps })
    }

    /// Grid on `[0, horizon]` with step close to (never above) `dt`.
    pub fn covering(horizon: f64, dt: f64) -> Result<Self> {
        if !(horizon >= 0.0) {
            return Err(Error::InvalidGrid(format!("horizon {horizon}")));
        }
        let steps = (horizon / dt - 1e-9).ceil().max(0.0) as usize;
        if steps == 0 {
            return TimeGrid::new(0.0, dt, 0);
        }
        TimeGrid::new(0.0, horizon / steps as f64, steps)
    }

    pub fn t1(&self) -> f64 {
        self.t0 + self.steps as f64 * self.dt
    }

    pub fn time(&self, step: usize) -> f64 {
        self.t0 + step as f64 * self.dt
    }

    /// Same interval, half the step.
    pub fn halved(&self) -> Self {
        TimeGrid { t0: self.t0, dt: 0.5 * self.dt, steps: 2 * self.steps }
    }
}

/// What an integration run keeps.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordSpec {
    /// Record every `stride`-th step (the final step is always recorded).
    pub stride: usize,
    /// Extra norm exponents recorded after `|u|` and `||u||`.
    pub norms: Vec<f64>,
    /// Exponent of the running integral `int_0^t ||u_s||_r^2 ds`.
    pub integral: Option<f64>,
    pub keep_states: bool,
}

impl Default for RecordSpec {
    fn default() -> Self {
        RecordSpec { stride: 1, norms: Vec::new(), integral: None, keep_states: true }
    }
}

impl RecordSpec {
    pub fn every(stride: usize) -> Self {
        RecordSpec { stride: stride.max(1), ..Default::default() }
    }
}

/// Recorded path of one integration run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    /// Step indices of the records.
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    /// States at the recorded steps (empty unless requested).
    pub states: Vec<Vec<f64>>,
    /// Per record: `|u|`, `||u||`, then the extra norms.
    pub functionals: Vec<Vec<f64>>,
    pub norm_exponents: Vec<f64>,
    /// Running trapezoidal integral at the recorded steps.
    pub integral: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last_state(&self) -> Option<&[f64]> {
        self.states.last().map(|s| s.as_slice())
    }

    /// Column of one recorded functional.
    pub fn functional(&self, col: usize) -> Vec<f64> {
        self.functionals.iter().map(|f| f[col]).collect()
    }

    fn header(&self) -> String {
        let mut h = String::from("t,|u|,||u||");
        for r in &self.norm_exponents {
            h.push_str(&format!(",norm_r{r}"));
        }
        if !self.integral.is_empty() {
            h.push_str(",energy_integral");
        }
        h
    }

    fn write_rows(&self, w: &mut impl Write, prefix: &str) -> std::io::Result<()> {
        for (i, t) in self.times.iter().enumerate() {
            write!(w, "{prefix}{t}")?;
            for v in &self.functionals[i] {
                write!(w, ",{v}")?;
            }
            if let Some(v) = self.integral.get(i) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "{}", self.header())?;
        self.write_rows(w, "")
    }
}

/// One CSV for an ensemble, with a leading `path` column.
pub fn write_ensemble_csv(w: &mut impl Write, paths: &[Trajectory]) -> std::io::Result<()> {
    let Some(first) = paths.first() else {
        return writeln!(w, "path,t,|u|,||u||");
    };
    writeln!(w, "path,{}", first.header())?;
    for (p, tr) in paths.iter().enumerate() {
        tr.write_rows(w, &format!("{p},"))?;
    }
    Ok(())
}

pub(crate) fn check_finite(x: &[f64], step: usize) -> Result<()> {
    let n2: f64 = x.iter().map(|v| v * v).sum();
    if !n2.is_finite() || n2 > OVERFLOW_GUARD * OVERFLOW_GUARD {
        return Err(Error::BlowUp { step, norm: n2.sqrt() });
    }
    Ok(())
}

/// Integrates with the increments of a [`NoiseStream`].
pub fn integrate<D: Dynamics + ?Sized>(
    model: &D,
    x0: &[f64],
    grid: &TimeGrid,
    noise: &NoiseStream,
    spec: &RecordSpec,
) -> Result<Trajectory> {
    if noise.dim != model.dim() {
        return Err(Error::Layout(format!("noise dimension {} for a {}-dimensional model", noise.dim, model.dim())));
    }
    let dt = grid.dt;
    integrate_with(model, x0, grid, spec, |step, dw| noise.increments(step as u64, dt, dw))
}

/// Exponential-Euler integration with caller-supplied Brownian increments:
/// `x' = e^{-r dt} x + dt phi1(r dt) N(x) + psi(r dt) sigma(x) dW`.
pub fn integrate_with<D: Dynamics + ?Sized>(
    model: &D,
    x0: &[f64],
    grid: &TimeGrid,
    spec: &RecordSpec,
    mut increments: impl FnMut(usize, &mut [f64]),
) -> Result<Trajectory> {
    let n = model.dim();
    if x0.len() != n {
        return Err(Error::Layout(format!("initial state has {} coordinates, model {}", x0.len(), n)));
    }
    let weights = model.weights();
    let f = StepFactors::new(model.rates(), grid.dt);
    let stride = spec.stride.max(1);

    let mut tr = Trajectory {
        grid: *grid,
        steps: Vec::new(),
        times: Vec::new(),
        states: Vec::new(),
        functionals: Vec::new(),
        norm_exponents: spec.norms.clone(),
        integral: Vec::new(),
    };
    let record = |tr: &mut Trajectory, step: usize, x: &[f64], integral: f64| {
        tr.steps.push(step);
        tr.times.push(grid.time(step));
        let mut vals = vec![weighted_norm_sq(weights, x, 0.0).sqrt(), weighted_norm_sq(weights, x, 1.0).sqrt()];
        vals.extend(spec.norms.iter().map(|&r| weighted_norm_sq(weights, x, r).sqrt()));
        tr.functionals.push(vals);
        if spec.integral.is_some() {
            tr.integral.push(integral);
        }
        if spec.keep_states {
            tr.states.push(x.to_vec());
        }
    };

    let mut x = x0.to_vec();
    check_finite(&x, 0)?;
    let mut nl = vec![0.0; n];
    let mut amp = vec![0.0; n];
    let mut dw = vec![0.0; n];
    let mut integral = 0.0;
    let mut density = spec.integral.map(|r| weighted_norm_sq(weights, &x, r)).unwrap_or(0.0);
    record(&mut tr, 0, &x, integral);
    for step in 0..grid.steps {
        model.explicit_drift(&x, &mut nl)?;
        model.noise_amplitudes(&x, &mut amp);
        increments(step, &mut dw);
        for j in 0..n {
            x[j] = f.decay[j] * x[j] + f.drift[j] * nl[j] + f.noise[j] * amp[j] * dw[j];
        }
        check_finite(&x, step + 1)?;
        if let Some(r) = spec.integral {
            let next = weighted_norm_sq(weights, &x, r);
            integral += 0.5 * grid.dt * (density + next);
            density = next;
        }
        if (step + 1) % stride == 0 || step + 1 == grid.steps {
            record(&mut tr, step + 1, &x, integral);
        }
    }
    Ok(tr)
}

/// Outcome of the step-halving self-check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepCheck {
    pub coarse: f64,
    pub fine: f64,
    pub relative_drift: f64,
    pub passed: bool,
}

/// Re-runs with `dt/2` on the same Brownian path (coarse increments are
/// sums of pairs of fine ones) and compares the final `|u|`; passes when
/// the relative change is below `tolerance`.
pub fn step_size_check<D: Dynamics + ?Sized>(
    model: &D,
    x0: &[f64],
    grid: &TimeGrid,
    noise: &NoiseStream,
    tolerance: f64,
) -> Result<StepCheck> {
    let fine_grid = grid.halved();
    let h = fine_grid.dt;
    let spec = RecordSpec { stride: usize::MAX, keep_states: false, ..Default::default() };
    let mut tmp = vec![0.0; model.dim()];
    let coarse = integrate_with(model, x0, grid, &spec, |step, dw| {
        noise.increments(2 * step as u64, h, dw);
        noise.increments(2 * step as u64 + 1, h, &mut tmp);
        dw.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
    })?;
    let fine = integrate_with(model, x0, &fine_grid, &spec, |step, dw| noise.increments(step as u64, h, dw))?;
    let c = coarse.functionals.last().map_or(0.0, |f| f[0]);
    let f = fine.functionals.last().map_or(0.0, |f| f[0]);
    let scale = c.abs().max(f.abs());
    let relative_drift = if scale == 0.0 { 0.0 } else { (c - f).abs() / scale };
    Ok(StepCheck { coarse: c, fine: f, relative_drift, passed: relative_drift < tolerance })
}

/// First recorded step at which `functional(state) >= threshold`.
pub fn first_exit_time(traj: &Trajectory, functional: impl Fn(&[f64]) -> f64, threshold: f64) -> Option<usize> {
    traj.states.iter().zip(&traj.steps).find(|(x, _)| functional(x) >= threshold).map(|(_, &s)| s)
}

/// Same rule on a plain sequence of values; returns the index.
pub fn first_crossing(values: &[f64], threshold: f64) -> Option<usize> {
    values.iter().position(|&v| v >= threshold)
}

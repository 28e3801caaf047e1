use super::dynamics::{weighted_norm_sq, Dynamics, StepFactors};
use super::integrate::{check_finite, TimeGrid};
use super::noise::NoiseStream;
use crate::error::{Error, Result};

/// Resolved nudging control acting on the second component:
/// `gain P_N (u - u~)`, plus `P_N (N(u) - N(u~))` when `cancel_nonlinear`.
#[derive(Debug, Clone, PartialEq)]
pub struct Nudge {
    pub mask: Vec<bool>,
    pub gain: f64,
    pub cancel_nonlinear: bool,
    /// Convert the control into a Brownian shift and accumulate its cost;
    /// requires nonvanishing noise on every controlled coordinate.
    pub girsanov: bool,
}

/// Integrand of the running time integral, evaluated on the `u` path.
pub type PathIntegrand<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

/// Bound on `|beta|` given `(u, v)`; audited along the path.
pub type BetaBound<'a> = &'a (dyn Fn(&[f64], &[f64]) -> f64 + Sync);

/// Recording options for coupled runs.
#[derive(Clone, Copy)]
pub struct CoupledRecord<'a> {
    pub stride: usize,
    /// Exponent of the norm in which `|v|^2` is recorded.
    pub v_exponent: f64,
    pub integrand: Option<PathIntegrand<'a>>,
    pub beta_bound: Option<BetaBound<'a>>,
    pub keep_states: bool,
}

impl Default for CoupledRecord<'_> {
    fn default() -> Self {
        CoupledRecord { stride: 1, v_exponent: 0.0, integrand: None, beta_bound: None, keep_states: false }
    }
}

/// Paired path `(u, u~)` driven by one noise realisation.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledTrajectory {
    pub grid: TimeGrid,
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    /// `|v_t|^2` in the recorded exponent, `v = u - u~`.
    pub v_norm_sq: Vec<f64>,
    /// `|u_t|^2` (plain energy).
    pub u_norm_sq: Vec<f64>,
    /// `G_t = int_0^t |beta_s|^2 ds` (left-point sum).
    pub girsanov: Vec<f64>,
    /// Running trapezoidal integral of the integrand along `u`.
    pub integral: Vec<f64>,
    /// `max_t |beta_t| / |P_N v_t|` over steps with `P_N v != 0`.
    pub beta_ratio_max: f64,
    /// `max_t |beta_t| / bound(u_t, v_t)` when a bound was supplied.
    pub beta_audit_max: f64,
    pub u_states: Vec<Vec<f64>>,
    pub v_states: Vec<Vec<f64>>,
}

impl CoupledTrajectory {
    pub fn final_v_norm(&self) -> f64 {
        self.v_norm_sq.last().copied().unwrap_or(0.0).sqrt()
    }

    pub fn final_girsanov(&self) -> f64 {
        self.girsanov.last().copied().unwrap_or(0.0)
    }
}

/// Integrates `u` and the nudged copy `u~` with identical increments.
///
/// The difference `v = u - u~` is stepped directly: its linear part
/// `r_j + gain 1_{P_N}` is exact, so `v` decays at exactly the controlled
/// rate without noise, and `x == y` gives `v == 0` bitwise.
pub fn coupled_integrate<D: Dynamics + ?Sized>(
    model: &D,
    x: &[f64],
    y: &[f64],
    nudge: &Nudge,
    grid: &TimeGrid,
    noise: &NoiseStream,
    rec: &CoupledRecord<'_>,
) -> Result<CoupledTrajectory> {
    let n = model.dim();
    if x.len() != n || y.len() != n {
        return Err(Error::Layout("initial states do not match the model".into()));
    }
    if nudge.mask.len() != n {
        return Err(Error::ControlMismatch(format!("control acts on {} coordinates, model has {n}", nudge.mask.len())));
    }
    if !(nudge.gain >= 0.0) || !nudge.gain.is_finite() {
        return Err(Error::ControlMismatch(format!("gain {}", nudge.gain)));
    }
    if noise.dim != n {
        return Err(Error::Layout("noise dimension mismatch".into()));
    }
    let weights = model.weights();
    let rates = model.rates();
    let fu = StepFactors::new(rates, grid.dt);
    let controlled: Vec<f64> =
        rates.iter().zip(&nudge.mask).map(|(&r, &m)| if m { r + nudge.gain } else { r }).collect();
    let fv = StepFactors::new(&controlled, grid.dt);
    let stride = rec.stride.max(1);

    let mut u = x.to_vec();
    let mut v: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let mut ut = vec![0.0; n];
    let (mut nu, mut nut) = (vec![0.0; n], vec![0.0; n]);
    let (mut au, mut aut) = (vec![0.0; n], vec![0.0; n]);
    let mut dw = vec![0.0; n];

    let mut out = CoupledTrajectory {
        grid: *grid,
        steps: Vec::new(),
        times: Vec::new(),
        v_norm_sq: Vec::new(),
        u_norm_sq: Vec::new(),
        girsanov: Vec::new(),
        integral: Vec::new(),
        beta_ratio_max: 0.0,
        beta_audit_max: 0.0,
        u_states: Vec::new(),
        v_states: Vec::new(),
    };
    let push = |out: &mut CoupledTrajectory, step: usize, u: &[f64], v: &[f64], g: f64, integral: f64| {
        out.steps.push(step);
        out.times.push(grid.time(step));
        out.v_norm_sq.push(weighted_norm_sq(weights, v, rec.v_exponent));
        out.u_norm_sq.push(weighted_norm_sq(weights, u, 0.0));
        out.girsanov.push(g);
        out.integral.push(integral);
        if rec.keep_states {
            out.u_states.push(u.to_vec());
            out.v_states.push(v.to_vec());
        }
    };

    check_finite(&u, 0)?;
    check_finite(&v, 0)?;
    let mut g = 0.0;
    let mut integral = 0.0;
    let mut density = rec.integrand.map_or(0.0, |f| f(&u));
    push(&mut out, 0, &u, &v, g, integral);
    for step in 0..grid.steps {
        for j in 0..n {
            ut[j] = u[j] - v[j];
        }
        model.explicit_drift(&u, &mut nu)?;
        model.explicit_drift(&ut, &mut nut)?;
        model.noise_amplitudes(&u, &mut au);
        model.noise_amplitudes(&ut, &mut aut);
        noise.increments(step as u64, grid.dt, &mut dw);

        if nudge.girsanov {
            let (mut beta_sq, mut low_sq) = (0.0, 0.0);
            for j in 0..n {
                if !nudge.mask[j] {
                    continue;
                }
                low_sq += v[j] * v[j];
                let mut c = nudge.gain * v[j];
                if nudge.cancel_nonlinear {
                    c += nu[j] - nut[j];
                }
                if c == 0.0 {
                    continue;
                }
                if aut[j] == 0.0 {
                    return Err(Error::RangeConditionViolated { channel: j });
                }
                let b = c / aut[j];
                beta_sq += b * b;
            }
            if low_sq > 0.0 {
                out.beta_ratio_max = out.beta_ratio_max.max((beta_sq / low_sq).sqrt());
            }
            if let (Some(bound), true) = (rec.beta_bound, beta_sq > 0.0) {
                let b = bound(&u, &v);
                let ratio = if b > 0.0 { beta_sq.sqrt() / b } else { f64::INFINITY };
                out.beta_audit_max = out.beta_audit_max.max(ratio);
            }
            g += beta_sq * grid.dt;
        }

        for j in 0..n {
            let mut dn = nu[j] - nut[j];
            if nudge.cancel_nonlinear && nudge.mask[j] {
                dn = 0.0;
            }
            let noise_u = fu.noise[j] * dw[j];
            u[j] = fu.decay[j] * u[j] + fu.drift[j] * nu[j] + noise_u * au[j];
            v[j] = fv.decay[j] * v[j] + fv.drift[j] * dn + noise_u * (au[j] - aut[j]);
        }
        check_finite(&u, step + 1)?;
        check_finite(&v, step + 1)?;
        if let Some(f) = rec.integrand {
            let next = f(&u);
            integral += 0.5 * grid.dt * (density + next);
            density = next;
        }
        if (step + 1) % stride == 0 || step + 1 == grid.steps {
            push(&mut out, step + 1, &u, &v, g, integral);
        }
    }
    Ok(out)
}

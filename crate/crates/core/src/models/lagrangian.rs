use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::noise::{NoiseFamily, NoiseKind};
use crate::error::{Error, Result};
use crate::spectral::{BasisKind, ModeSet, RealBasis, Spectrum};

/// State dependence of the low-mode covariance factors `q_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QFamily {
    pub alpha: f64,
    pub beta: f64,
    pub s0: f64,
    /// `q_k` varies only for `|k| <= low_cutoff`.
    pub low_cutoff: usize,
}

/// Parameters of the Lagrangian observation process in Fourier coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagrangianParams {
    /// Space dimension (1 or 2).
    pub dim: usize,
    pub cutoff: usize,
    /// Sobolev index of the state space.
    pub m: f64,
    /// `gamma(k) = gamma_scale |k|^gamma_power`.
    #[serde(default = "one")]
    pub gamma_scale: f64,
    #[serde(default = "two")]
    pub gamma_power: f64,
    /// Per-coordinate covariance `e(k) = e_scale |k|^{-e_decay}`.
    pub e_scale: f64,
    pub e_decay: f64,
    /// `None` means `q_k == 1` (additive noise).
    #[serde(default)]
    pub q: Option<QFamily>,
    pub rank: usize,
    /// Nudging gain; defaults to `28 K^2 ||Q||`.
    #[serde(default)]
    pub gain: Option<f64>,
    /// Exponent of the summability condition on the covariance.
    #[serde(default = "half")]
    pub energy_alpha: f64,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn half() -> f64 {
    0.5
}

/// Coordinates `(a_k, b_k)` per component with
/// `da = (-gamma(k) a + (u(0).k) b) dt + ...`, `db = (-gamma(k) b - (u(0).k) a) dt + ...`,
/// noise variance `q_k(u) gamma(k) e(k)` per coordinate.
#[derive(Debug, Clone)]
pub struct LagrangianModel {
    pub params: LagrangianParams,
    pub basis: RealBasis,
    pub noise: NoiseFamily,
    pub rank: usize,
    pub level: f64,
    pub gamma_star: f64,
    /// `C_B` with `|v(0)| <= C_B |v|_m`.
    pub point_constant: f64,
    rates: Vec<f64>,
    cov: Vec<f64>,
}

impl LagrangianModel {
    pub fn new(params: LagrangianParams) -> Result<Self> {
        let modes = ModeSet::new(params.dim, params.cutoff)?;
        let basis = RealBasis::new(&modes, BasisKind::Componentwise(params.dim))?;
        if !(params.gamma_scale > 0.0) || !(params.e_scale >= 0.0) {
            return Err(Error::Config("gamma_scale must be positive and e_scale nonnegative".into()));
        }
        let rates: Vec<f64> =
            basis.coords().iter().map(|c| params.gamma_scale * c.k.norm().powf(params.gamma_power)).collect();
        let cov: Vec<f64> = basis.coords().iter().map(|c| params.e_scale * c.k.norm().powf(-params.e_decay)).collect();
        let base = rates.iter().zip(&cov).map(|(g, e)| (g * e).sqrt()).collect();
        let kind = match &params.q {
            None => NoiseKind::Additive,
            Some(q) => NoiseKind::LowMode {
                alpha: q.alpha,
                beta: q.beta,
                s0: q.s0,
                cutoff: (q.low_cutoff * q.low_cutoff) as f64,
            },
        };
        let noise = NoiseFamily::new(kind, base, basis.weights().to_vec(), params.m)?;
        let level = modes.eigenvalue_level(params.rank, Spectrum::Laplacian)?;
        let gamma_star = rates.iter().copied().fold(f64::INFINITY, f64::min);
        // |v(0)| <= sqrt(2) sum_half |a_k| <= sqrt(2 sum_half |k|^{-2m}) |v|_m
        let half: f64 = modes.canonical().iter().map(|&i| modes.mode(i).norm().powf(-2.0 * params.m)).sum();
        let point_constant = (2.0 * half).sqrt();
        Ok(LagrangianModel { basis, noise, rank: params.rank, level, gamma_star, point_constant, rates, cov, params })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn weights(&self) -> &[f64] {
        self.basis.weights()
    }

    pub fn m(&self) -> f64 {
        self.params.m
    }

    /// `K`, the Lipschitz constant of `q_k^{1/2}`.
    pub fn k_lipschitz(&self) -> f64 {
        self.noise.sqrt_q_lipschitz()
    }

    /// `||Q|| = sum_{low} |k|^{2m} gamma(k) e(k)`.
    pub fn q_norm(&self) -> f64 {
        let cutoff = self.params.q.as_ref().map_or(0.0, |q| (q.low_cutoff * q.low_cutoff) as f64);
        self.basis
            .weights()
            .iter()
            .zip(self.noise.base())
            .filter(|(&w, _)| w <= cutoff)
            .map(|(&w, a)| w.powf(self.params.m) * a * a)
            .sum()
    }

    /// Default gain `28 K^2 ||Q||`; `gamma_*` when that vanishes (additive
    /// noise, where any positive gain works).
    pub fn default_gain(&self) -> f64 {
        let g = 28.0 * self.k_lipschitz().powi(2) * self.q_norm();
        if g > 0.0 {
            g
        } else {
            self.gamma_star
        }
    }

    pub fn gain(&self) -> f64 {
        self.params.gain.unwrap_or_else(|| self.default_gain())
    }

    /// Upper `q` bound (1 without state dependence).
    pub fn beta(&self) -> f64 {
        self.params.q.as_ref().map_or(1.0, |q| q.beta)
    }

    /// `u(0)` per component.
    pub fn point_value(&self, x: &[f64]) -> [f64; 2] {
        let mut p = [0.0; 2];
        for (c, v) in self.basis.coords().iter().zip(x) {
            if !c.sine {
                p[c.component] += std::f64::consts::SQRT_2 * v;
            }
        }
        p
    }

    pub fn transport(&self, x: &[f64], out: &mut [f64]) {
        let p = self.point_value(x);
        let coords = self.basis.coords();
        for ((pair, xv), o) in coords.chunks_exact(2).zip(x.chunks_exact(2)).zip(out.chunks_exact_mut(2)) {
            let k = pair[0].k.as_f64();
            let c = p[0] * k[0] + p[1] * k[1];
            o[0] = c * xv[1];
            o[1] = -c * xv[0];
        }
    }

    /// Lyapunov constant `(beta/2) sum_j |k_j|^{2m} e_j`: each coordinate
    /// satisfies `E x_j^2 <= e^{-2 gamma_j t} x_j^2 + beta e_j / 2`.
    pub fn lyapunov_constant(&self) -> f64 {
        let m = self.params.m;
        0.5 * self.beta() * self.basis.weights().iter().zip(&self.cov).map(|(w, e)| w.powf(m) * e).sum::<f64>()
    }

    /// Truncated `sum gamma^alpha |k|^{2(m+1)} Tr E(k)`.
    pub fn energy_norm(&self) -> f64 {
        let (m, a) = (self.params.m, self.params.energy_alpha);
        self.rates.iter().zip(self.basis.weights()).zip(&self.cov).map(|((g, w), e)| g.powf(a) * w.powf(m + 1.0) * e).sum()
    }

    /// `int_0^inf sup_k e^{-gamma(k) t} |k| dt` over the retained modes,
    /// by composite Simpson on `[0, 40 / gamma_*]`.
    pub fn decay_integral(&self) -> f64 {
        let pairs: Vec<(f64, f64)> =
            self.basis.coords().iter().zip(&self.rates).map(|(c, &g)| (g, c.k.norm())).collect();
        let f = |t: f64| pairs.iter().map(|(g, k)| (-g * t).exp() * k).fold(0.0, f64::max);
        let end = 40.0 / self.gamma_star;
        let n = 20_000;
        let h = end / n as f64;
        let mut s = f(0.0) + f(end);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        s * h / 3.0
    }

    /// Hypothesis report: exact cutoff and low-mode dependence, sampled
    /// `alpha/beta` bounds and Lipschitz audit of `q^{1/2}`.
    pub fn check_hypotheses(&self, samples: usize, seed: u64) -> LReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.basis.dim();
        let (alpha, beta, s0, low) = match &self.params.q {
            Some(q) => (q.alpha, q.beta, q.s0, (q.low_cutoff * q.low_cutoff) as f64),
            None => (1.0, 1.0, 1.0, 0.0),
        };
        let weights = self.basis.weights();
        let m = self.params.m;
        let mut cutoff_exact = true;
        let mut low_only = true;
        let (mut q_min, mut q_max) = (f64::INFINITY, 0.0f64);
        let mut k_observed = 0.0f64;
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            let scale = s0 * 10f64.powf(rng.gen_range(-3.0..3.0));
            let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let nrm = self.basis.norm(&x, m).max(f64::MIN_POSITIVE);
            x.iter().map(|v| v * scale / nrm).collect()
        };
        for i in 0..samples {
            let x = draw(&mut rng);
            let y = if i % 2 == 0 {
                let d = draw(&mut rng);
                let eps = 10f64.powf(rng.gen_range(-6.0..-1.0));
                x.iter().zip(&d).map(|(a, b)| a + eps * b).collect()
            } else {
                draw(&mut rng)
            };
            // perturbing only high modes leaves every amplitude unchanged
            let mut z = x.clone();
            for (zi, &w) in z.iter_mut().zip(weights) {
                if w > low {
                    *zi += 1.0;
                }
            }
            let dist = self.basis.norm(&x.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>(), m);
            for &w in weights {
                let qx = self.noise.sqrt_q(&x, w);
                if w > low && qx != 1.0 {
                    cutoff_exact = false;
                }
                if self.noise.sqrt_q(&z, w) != qx {
                    low_only = false;
                }
                if w <= low {
                    q_min = q_min.min(qx * qx);
                    q_max = q_max.max(qx * qx);
                }
                if dist > 0.0 {
                    k_observed = k_observed.max((qx - self.noise.sqrt_q(&y, w)).abs() / dist);
                }
            }
        }
        if q_min.is_infinite() {
            q_min = 1.0;
            q_max = 1.0;
        }
        let k_declared = self.k_lipschitz();
        let tol = 1.0 + 1e-6;
        let bounds_ok = q_min >= alpha / tol && q_max <= beta * tol;
        let k_ok = k_observed <= k_declared * tol;
        let control_covers_low = self.level >= low;
        LReport {
            samples,
            cutoff_exact,
            low_mode_only: low_only,
            alpha,
            beta,
            q_min,
            q_max,
            bounds_ok,
            k_declared,
            k_observed,
            k_ok,
            gamma_star: self.gamma_star,
            energy_norm: self.energy_norm(),
            decay_integral: self.decay_integral(),
            truncation_relative: true,
            control_covers_low,
            passed: cutoff_exact && low_only && bounds_ok && k_ok && control_covers_low,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LReport {
    pub samples: usize,
    pub cutoff_exact: bool,
    pub low_mode_only: bool,
    pub alpha: f64,
    pub beta: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub bounds_ok: bool,
    pub k_declared: f64,
    pub k_observed: f64,
    pub k_ok: bool,
    pub gamma_star: f64,
    pub energy_norm: f64,
    pub decay_integral: f64,
    /// The two sums above are over the retained modes only.
    pub truncation_relative: bool,
    /// The control range contains every state-dependent mode.
    pub control_covers_low: bool,
    pub passed: bool,
}

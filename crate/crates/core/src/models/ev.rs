use serde::{Deserialize, Serialize};

use super::fluid::{calibrate_smoothed_trilinear, FluidCore};
use super::noise::NoiseFamily;
use super::ns::{default_cd_samples, default_cd_seed};
use super::{NoiseConfig, ThresholdCheck};
use crate::error::{Error, Result};
use crate::spectral::{ModeSet, Spectrum};

/// Parameters of the damped Euler-Voigt model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvParams {
    pub nu: f64,
    /// Regularisation exponent, `gamma > 2/3`.
    pub gamma: f64,
    pub cutoff: usize,
    pub noise: NoiseConfig,
    #[serde(default)]
    pub rank: Option<usize>,
    /// Constant of the rank condition; 1 unless configured.
    #[serde(default = "one")]
    pub c_ev: f64,
    /// Trilinear constant in the weak metric; calibrated when absent.
    #[serde(default)]
    pub ct: Option<f64>,
    #[serde(default = "default_cd_samples")]
    pub ct_samples: usize,
    #[serde(default = "default_cd_seed")]
    pub ct_seed: u64,
}

fn one() -> f64 {
    1.0
}

/// `du = (-nu u + B(u_g, u_g)) dt + sigma(u) dW` with `u_g = Lambda^{-gamma} u`.
///
/// Distances are measured in `H^{-gamma/2}` (exponent `-gamma/2`).
#[derive(Debug, Clone)]
pub struct EvModel {
    pub params: EvParams,
    pub nu: f64,
    pub gamma: f64,
    pub rank: usize,
    pub level: f64,
    /// `C_T` in `|<B(v_g, u_g), v_g>| <= C_T ||v||_{-gamma/2}^2 ||u||_{1-gamma/2}`.
    pub ct: f64,
    pub noise: NoiseFamily,
    pub(crate) core: FluidCore,
    rates: Vec<f64>,
}

impl EvModel {
    pub fn new(params: EvParams) -> Result<Self> {
        if !(params.gamma > 2.0 / 3.0) {
            return Err(Error::ExponentOutOfRange(params.gamma));
        }
        if !(params.nu > 0.0) {
            return Err(Error::Config(format!("damping {} must be positive", params.nu)));
        }
        let gamma = params.gamma;
        let modes = ModeSet::new(2, params.cutoff)?;
        let core = FluidCore::new(&modes, gamma)?;
        let weights = core.basis.weights().to_vec();
        let noise = params.noise.build(&weights, -0.5 * gamma)?;
        let ct = match params.ct {
            Some(c) if c > 0.0 => c,
            Some(c) => return Err(Error::Config(format!("C_T = {c} must be positive"))),
            None => calibrate_smoothed_trilinear(&modes, gamma, -0.5 * gamma, 1.0 - 0.5 * gamma, params.ct_samples.max(1), params.ct_seed)?,
        };
        let b0 = noise.b0(2.0 - 0.5 * gamma);
        let threshold = params.c_ev * b0 / params.nu.powi(3);
        let p = 0.5 * gamma - 1.0 / 3.0;
        let rank = match params.rank {
            Some(n) => {
                modes.eigenvalue_level(n, Spectrum::Laplacian)?;
                n
            }
            None => modes.first_rank_where(Spectrum::Laplacian, |l| l.powf(p) > threshold).unwrap_or(modes.len()),
        };
        let level = modes.eigenvalue_level(rank, Spectrum::Laplacian)?;
        let rates = vec![params.nu; weights.len()];
        Ok(EvModel { nu: params.nu, gamma, rank, level, ct, noise, core, rates, params })
    }

    /// Metric exponent `-gamma/2`.
    pub fn metric_exponent(&self) -> f64 {
        -0.5 * self.gamma
    }

    /// Bound on `||rho(u)||^2_{H^{1-gamma/2}}`, `rho` the curl of the noise.
    pub fn b0(&self) -> f64 {
        self.noise.b0(2.0 - 0.5 * self.gamma)
    }

    /// Squared Lipschitz constant in the weak metric.
    pub fn lipschitz_weak(&self) -> f64 {
        self.noise.lipschitz_sq(self.metric_exponent())
    }

    pub fn weights(&self) -> &[f64] {
        self.core.basis.weights()
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn check_ev3(&self) -> Result<ThresholdCheck> {
        check_ev3(self.core.basis.modes(), self.rank, self.nu, self.gamma, self.params.c_ev, self.b0())
    }

    /// Default gain `nu lambda_N^{gamma/2 - 1/3} / 2`.
    pub fn default_gain(&self) -> f64 {
        0.5 * self.nu * self.level.powf(0.5 * self.gamma - 1.0 / 3.0)
    }
}

/// `lambda_N^{gamma/2 - 1/3} > C nu^{-3} B0`; the check compares the powered
/// level with the threshold.
pub fn check_ev3(modes: &ModeSet, rank: usize, nu: f64, gamma: f64, c_ev: f64, b0: f64) -> Result<ThresholdCheck> {
    if !(gamma > 2.0 / 3.0) {
        return Err(Error::ExponentOutOfRange(gamma));
    }
    let level = modes.eigenvalue_level(rank, Spectrum::Laplacian)?;
    Ok(ThresholdCheck::new(level.powf(0.5 * gamma - 1.0 / 3.0), c_ev * b0 / nu.powi(3)))
}

use serde::{Deserialize, Serialize};

use super::fluid::FluidCore;
use super::noise::NoiseFamily;
use super::{NoiseConfig, ThresholdCheck};
use crate::error::{Error, Result};
use crate::spectral::{calibrate_cd, ModeSet, Spectrum};

/// Parameters of the truncated 2D Navier-Stokes model on the torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NsParams {
    pub nu: f64,
    /// Truncation `M`: modes with `0 < |k|_inf <= M`.
    pub cutoff: usize,
    pub noise: NoiseConfig,
    /// Control rank `N`; defaults to the smallest rank passing H3.
    #[serde(default)]
    pub rank: Option<usize>,
    /// Trilinear constant; calibrated when absent.
    #[serde(default)]
    pub cd: Option<f64>,
    #[serde(default = "default_cd_samples")]
    pub cd_samples: usize,
    #[serde(default = "default_cd_seed")]
    pub cd_seed: u64,
}

pub(crate) fn default_cd_samples() -> usize {
    4000
}

pub(crate) fn default_cd_seed() -> u64 {
    1
}

/// `du = (-nu A u + B(u, u)) dt + sigma(u) dW`, Galerkin-truncated.
#[derive(Debug, Clone)]
pub struct NsModel {
    pub params: NsParams,
    pub nu: f64,
    pub cd: f64,
    pub rank: usize,
    /// `lambda_N`.
    pub level: f64,
    pub noise: NoiseFamily,
    pub(crate) core: FluidCore,
    rates: Vec<f64>,
}

impl NsModel {
    pub fn new(params: NsParams) -> Result<Self> {
        if !(params.nu > 0.0) {
            return Err(Error::Config(format!("viscosity {} must be positive", params.nu)));
        }
        let modes = ModeSet::new(2, params.cutoff)?;
        let core = FluidCore::new(&modes, 0.0)?;
        let weights = core.basis.weights().to_vec();
        let noise = params.noise.build(&weights, 0.0)?;
        let cd = match params.cd {
            Some(c) if c > 0.0 => c,
            Some(c) => return Err(Error::Config(format!("C_D = {c} must be positive"))),
            None => calibrate_cd(&modes, params.cd_samples.max(1), params.cd_seed)?,
        };
        let threshold = h3_threshold(params.nu, noise.lipschitz_sq(0.0), noise.b0(0.0), cd);
        let rank = match params.rank {
            Some(n) => {
                modes.eigenvalue_level(n, Spectrum::Laplacian)?;
                n
            }
            None => modes.first_rank_where(Spectrum::Laplacian, |l| l > threshold).unwrap_or(modes.len()),
        };
        let level = modes.eigenvalue_level(rank, Spectrum::Laplacian)?;
        let rates = weights.iter().map(|w| params.nu * w).collect();
        Ok(NsModel { nu: params.nu, cd, rank, level, noise, core, rates, params })
    }

    pub fn b0(&self) -> f64 {
        self.noise.b0(0.0)
    }

    pub fn lipschitz(&self) -> f64 {
        self.noise.lipschitz_sq(0.0)
    }

    pub fn weights(&self) -> &[f64] {
        self.core.basis.weights()
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// `lambda_N > L/nu + C_D^2 B0 / nu^3`.
    pub fn check_h3(&self) -> ThresholdCheck {
        ThresholdCheck::new(self.level, h3_threshold(self.nu, self.lipschitz(), self.b0(), self.cd))
    }

    /// Default nudging gain `nu lambda_N / 2`.
    pub fn default_gain(&self) -> f64 {
        0.5 * self.nu * self.level
    }
}

pub fn h3_threshold(nu: f64, l: f64, b0: f64, cd: f64) -> f64 {
    l / nu + cd * cd * b0 / nu.powi(3)
}

/// H3 on an explicit set of constants: the smallest level in the sorted
/// eigenvalue list that passes, with its rank.
pub fn check_h3(modes: &ModeSet, rank: usize, nu: f64, l: f64, b0: f64, cd: f64) -> Result<ThresholdCheck> {
    let level = modes.eigenvalue_level(rank, Spectrum::Laplacian)?;
    Ok(ThresholdCheck::new(level, h3_threshold(nu, l, b0, cd)))
}

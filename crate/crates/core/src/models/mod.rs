//! The three simulated SPDE models, their noise families and hypothesis
//! checks, behind one [`Model`] type that the integrators accept.
//!
//! Every model lives in real orthonormal coordinates of a [`RealBasis`]:
//! divergence-free stream coordinates for Navier-Stokes and Euler-Voigt,
//! componentwise coordinates for the Lagrangian process.

mod ev;
mod fluid;
mod lagrangian;
mod noise;
mod ns;

use serde::{Deserialize, Serialize};

pub use ev::{check_ev3, EvModel, EvParams};
pub use fluid::{calibrate_smoothed_trilinear, FluidCore};
pub use lagrangian::{LReport, LagrangianModel, LagrangianParams, QFamily};
pub use noise::{audit_noise, NoiseAudit, NoiseFamily, NoiseKind};
pub use ns::{check_h3, h3_threshold, NsModel, NsParams};

use crate::error::{Error, Result};
use crate::sde::{Dynamics, Nudge, TestSystem};
use crate::spectral::{RealBasis, SpectralState, Spectrum};

pub const MODEL_SCHEMA: &str = "ergoverify-model-v1";

/// `level > threshold`, with the margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCheck {
    pub level: f64,
    pub threshold: f64,
    pub holds: bool,
    pub margin: f64,
}

impl ThresholdCheck {
    pub fn new(level: f64, threshold: f64) -> Self {
        ThresholdCheck { level, threshold, holds: level > threshold, margin: level - threshold }
    }
}

fn default_floor() -> f64 {
    0.5
}

/// Noise configuration shared by the two fluid models.
///
/// Channel `j` drives coordinate `j` with base amplitude
/// `amplitude |k_j|^{-decay}`, zero above `support` (a `|k|^2` level).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseConfig {
    Additive {
        amplitude: f64,
        #[serde(default)]
        decay: f64,
        #[serde(default)]
        support: Option<f64>,
    },
    Saturated {
        amplitude: f64,
        #[serde(default)]
        decay: f64,
        #[serde(default)]
        support: Option<f64>,
        s0: f64,
        /// Lower bound of the saturation factor; must be positive for the
        /// pseudo-inverse to stay bounded.
        #[serde(default = "default_floor")]
        floor: f64,
        /// `|k|^2` level of the modes entering the saturation argument.
        cutoff: f64,
    },
    LowMode {
        amplitude: f64,
        #[serde(default)]
        decay: f64,
        #[serde(default)]
        support: Option<f64>,
        alpha: f64,
        beta: f64,
        s0: f64,
        cutoff: f64,
    },
}

impl NoiseConfig {
    pub fn build(&self, weights: &[f64], arg_exponent: f64) -> Result<NoiseFamily> {
        let (amplitude, decay, support, kind) = match *self {
            NoiseConfig::Additive { amplitude, decay, support } => (amplitude, decay, support, NoiseKind::Additive),
            NoiseConfig::Saturated { amplitude, decay, support, s0, floor, cutoff } => {
                (amplitude, decay, support, NoiseKind::Saturated { s0, floor, cutoff })
            }
            NoiseConfig::LowMode { amplitude, decay, support, alpha, beta, s0, cutoff } => {
                (amplitude, decay, support, NoiseKind::LowMode { alpha, beta, s0, cutoff })
            }
        };
        let base = weights
            .iter()
            .map(|&w| match support {
                Some(s) if w > s => 0.0,
                _ => amplitude * w.powf(-0.5 * decay),
            })
            .collect();
        NoiseFamily::new(kind, base, weights.to_vec(), arg_exponent)
    }
}

/// Serialisable form of the diagonal test systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestParams {
    pub rates: Vec<f64>,
    pub weights: Vec<f64>,
    pub amplitudes: Vec<f64>,
    #[serde(default)]
    pub double_well: f64,
}

impl From<&TestSystem> for TestParams {
    fn from(s: &TestSystem) -> Self {
        TestParams {
            rates: s.rates.clone(),
            weights: s.weights.clone(),
            amplitudes: s.amplitudes.clone(),
            double_well: s.double_well,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    NavierStokes(NsParams),
    Lagrangian(LagrangianParams),
    EulerVoigt(EvParams),
    Test(TestParams),
}

/// Versioned model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub schema: String,
    pub model: ModelSpec,
}

impl ModelConfig {
    pub fn new(model: ModelSpec) -> Self {
        ModelConfig { schema: MODEL_SCHEMA.into(), model }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ModelConfig = serde_json::from_str(text)?;
        if cfg.schema != MODEL_SCHEMA {
            return Err(Error::Config(format!("model schema {:?}, expected {MODEL_SCHEMA:?}", cfg.schema)));
        }
        Ok(cfg)
    }

    pub fn build(&self) -> Result<Model> {
        self.model.build()
    }
}

impl ModelSpec {
    pub fn build(&self) -> Result<Model> {
        Ok(match self {
            ModelSpec::NavierStokes(p) => Model::Ns(NsModel::new(p.clone())?),
            ModelSpec::Lagrangian(p) => Model::Lagrangian(LagrangianModel::new(p.clone())?),
            ModelSpec::EulerVoigt(p) => Model::EulerVoigt(EvModel::new(p.clone())?),
            ModelSpec::Test(p) => {
                let s = TestSystem {
                    rates: p.rates.clone(),
                    weights: p.weights.clone(),
                    amplitudes: p.amplitudes.clone(),
                    double_well: p.double_well,
                };
                s.validate()?;
                Model::Test(s)
            }
        })
    }
}

/// `E |u_t|_r^2 <= e^{-rate t} |x|_r^2 + constant`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovForm {
    pub exponent: f64,
    pub rate: f64,
    pub constant: f64,
}

impl LyapunovForm {
    pub fn bound(&self, initial_sq: f64, t: f64) -> f64 {
        (-self.rate * t).exp() * initial_sq + self.constant
    }
}

/// Exponential weight `h_p(t) = (rate - (p+1) lipschitz / 2) t - coefficient int_0^t f(u_s) ds`
/// of the coupling statistic `E[|v_t|_r^{2p} e^{p h_p(t)}] <= |x - y|_r^{2p}`,
/// with `f(u) = ||u||_s^2` or `||Q_N u||_s` (see [`DecayWeight::integrand`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayWeight {
    pub v_exponent: f64,
    pub rate: f64,
    pub lipschitz: f64,
    pub coefficient: f64,
    pub integrand_exponent: f64,
    /// Squared norm in the integrand (fluids) or plain norm (Lagrangian).
    pub squared: bool,
    /// Restrict the integrand to the complement of `P_N`.
    pub high_only: bool,
}

impl DecayWeight {
    pub fn rate_p(&self, p: f64) -> f64 {
        self.rate - 0.5 * (p + 1.0) * self.lipschitz
    }

    pub fn integrand(&self, weights: &[f64], mask: &[bool], x: &[f64]) -> f64 {
        let r = self.integrand_exponent;
        let s: f64 = x
            .iter()
            .zip(weights)
            .zip(mask)
            .filter(|(_, &low)| !(self.high_only && low))
            .map(|((v, w), _)| w.powf(r) * v * v)
            .sum();
        if self.squared {
            s
        } else {
            s.sqrt()
        }
    }
}

/// A simulated model in real coordinates.
#[derive(Debug, Clone)]
pub enum Model {
    Ns(NsModel),
    Lagrangian(LagrangianModel),
    EulerVoigt(EvModel),
    Test(TestSystem),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Ns(_) => "navier_stokes",
            Model::Lagrangian(_) => "lagrangian",
            Model::EulerVoigt(_) => "euler_voigt",
            Model::Test(_) => "test",
        }
    }

    pub fn basis(&self) -> Option<&RealBasis> {
        match self {
            Model::Ns(m) => Some(&m.core.basis),
            Model::EulerVoigt(m) => Some(&m.core.basis),
            Model::Lagrangian(m) => Some(&m.basis),
            Model::Test(_) => None,
        }
    }

    pub fn noise(&self) -> Option<&NoiseFamily> {
        match self {
            Model::Ns(m) => Some(&m.noise),
            Model::EulerVoigt(m) => Some(&m.noise),
            Model::Lagrangian(m) => Some(&m.noise),
            Model::Test(_) => None,
        }
    }

    /// Exponent of the norm in which distances are measured.
    pub fn metric_exponent(&self) -> f64 {
        match self {
            Model::Ns(_) | Model::Test(_) => 0.0,
            Model::Lagrangian(m) => m.m(),
            Model::EulerVoigt(m) => m.metric_exponent(),
        }
    }

    /// Control rank `N` (1 for test systems).
    pub fn rank(&self) -> usize {
        match self {
            Model::Ns(m) => m.rank,
            Model::Lagrangian(m) => m.rank,
            Model::EulerVoigt(m) => m.rank,
            Model::Test(_) => 1,
        }
    }

    pub fn level(&self) -> f64 {
        match self {
            Model::Ns(m) => m.level,
            Model::Lagrangian(m) => m.level,
            Model::EulerVoigt(m) => m.level,
            Model::Test(s) => s.weights.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn default_gain(&self) -> f64 {
        match self {
            Model::Ns(m) => m.default_gain(),
            Model::Lagrangian(m) => m.gain(),
            Model::EulerVoigt(m) => m.default_gain(),
            Model::Test(s) => s.rates.iter().copied().fold(0.0, f64::max).max(1.0),
        }
    }

    /// The Lagrangian control also cancels the nonlinearity on `P_N`.
    pub fn cancels_nonlinearity(&self) -> bool {
        matches!(self, Model::Lagrangian(_))
    }

    /// Whether the model's structural hypotheses (rank threshold, control
    /// gain) hold; the coupling estimates are only claimed when they do.
    pub fn hypotheses_hold(&self) -> Result<bool> {
        Ok(match self {
            Model::Ns(m) => m.check_h3().holds,
            Model::EulerVoigt(m) => m.check_ev3()?.holds,
            Model::Lagrangian(m) => {
                let need = 0.5 * m.k_lipschitz().powi(2) * m.q_norm();
                let low = m.params.q.as_ref().map_or(0.0, |q| (q.low_cutoff * q.low_cutoff) as f64);
                m.gain() >= need && m.level >= low
            }
            Model::Test(_) => true,
        })
    }

    pub fn nudge(&self, gain: Option<f64>, girsanov: bool) -> Result<Nudge> {
        let gain = gain.unwrap_or_else(|| self.default_gain());
        if !(gain > 0.0) || !gain.is_finite() {
            return Err(Error::ControlMismatch(format!("gain {gain} must be positive")));
        }
        Ok(Nudge { mask: self.low_mask(self.rank())?, gain, cancel_nonlinear: self.cancels_nonlinearity(), girsanov })
    }

    /// `E |u_t|^2` bound in the model's Lyapunov norm.
    pub fn lyapunov(&self) -> LyapunovForm {
        match self {
            Model::Ns(m) => LyapunovForm { exponent: 0.0, rate: 2.0 * m.nu, constant: m.noise.b0(0.0) / (2.0 * m.nu) },
            Model::EulerVoigt(m) => {
                LyapunovForm { exponent: 0.0, rate: 2.0 * m.nu, constant: m.noise.b0(0.0) / (2.0 * m.nu) }
            }
            Model::Lagrangian(m) => {
                LyapunovForm { exponent: m.m(), rate: 2.0 * m.gamma_star, constant: m.lyapunov_constant() }
            }
            Model::Test(s) => {
                // per coordinate: E x^2 <= e^{-2 r t} x^2 + a^2 / (2 r)
                let rate = 2.0 * s.rates.iter().copied().fold(f64::INFINITY, f64::min);
                let constant = s.rates.iter().zip(&s.amplitudes).map(|(r, a)| a * a / (2.0 * r)).sum();
                LyapunovForm { exponent: 0.0, rate, constant }
            }
        }
    }

    /// Weight of the coupling statistic for this model.
    pub fn decay_weight(&self) -> Result<DecayWeight> {
        Ok(match self {
            Model::Ns(m) => DecayWeight {
                v_exponent: 0.0,
                rate: m.nu * m.level,
                lipschitz: m.lipschitz(),
                coefficient: m.cd * m.cd / m.nu,
                integrand_exponent: 1.0,
                squared: true,
                high_only: false,
            },
            Model::EulerVoigt(m) => DecayWeight {
                v_exponent: m.metric_exponent(),
                rate: m.nu,
                lipschitz: m.lipschitz_weak(),
                coefficient: 2.0 * m.ct * m.ct / m.nu,
                integrand_exponent: 1.0 - 0.5 * m.gamma,
                squared: true,
                high_only: false,
            },
            Model::Lagrangian(m) => DecayWeight {
                v_exponent: m.m(),
                rate: 2.0 * m.gamma_star,
                lipschitz: 0.0,
                coefficient: 2.0 * m.point_constant,
                integrand_exponent: m.m() + 1.0,
                squared: false,
                high_only: true,
            },
            Model::Test(s) => {
                if s.double_well != 0.0 || s.amplitudes.iter().any(|&a| a != 0.0) {
                    return Err(Error::Config("decay weight only defined for linear deterministic test systems".into()));
                }
                DecayWeight {
                    v_exponent: 0.0,
                    rate: 0.0,
                    lipschitz: 0.0,
                    coefficient: 0.0,
                    integrand_exponent: 0.0,
                    squared: true,
                    high_only: false,
                }
            }
        })
    }

    fn need_basis(&self) -> Result<&RealBasis> {
        self.basis().ok_or_else(|| Error::Config("test systems have no spectral representation".into()))
    }

    /// Real coordinates of a spectral state.
    pub fn coordinates(&self, u: &SpectralState) -> Result<Vec<f64>> {
        self.need_basis()?.from_state(u)
    }

    pub fn state(&self, x: &[f64]) -> Result<SpectralState> {
        let b = self.need_basis()?;
        if x.len() != b.dim() {
            return Err(Error::Layout(format!("{} coordinates for a {}-dimensional model", x.len(), b.dim())));
        }
        Ok(b.to_state(x))
    }

    /// Full drift at `u`, linear part included.
    pub fn drift_eval(&self, u: &SpectralState) -> Result<SpectralState> {
        let x = self.coordinates(u)?;
        let mut out = vec![0.0; x.len()];
        self.explicit_drift(&x, &mut out)?;
        for ((o, v), r) in out.iter_mut().zip(&x).zip(self.rates()) {
            *o -= r * v;
        }
        self.state(&out)
    }

    /// Channel fields `sigma_j(u)`, one per coordinate.
    pub fn sigma_eval(&self, u: &SpectralState) -> Result<Vec<SpectralState>> {
        let b = self.need_basis()?;
        let x = b.from_state(u)?;
        let mut amp = vec![0.0; x.len()];
        self.noise_amplitudes(&x, &mut amp);
        Ok(amp.iter().enumerate().map(|(j, a)| b.basis_field(j).scale(*a)).collect())
    }
}

impl Dynamics for Model {
    fn dim(&self) -> usize {
        match self {
            Model::Test(s) => s.dim(),
            _ => self.basis().map_or(0, RealBasis::dim),
        }
    }

    fn rates(&self) -> &[f64] {
        match self {
            Model::Ns(m) => m.rates(),
            Model::Lagrangian(m) => m.rates(),
            Model::EulerVoigt(m) => m.rates(),
            Model::Test(s) => &s.rates,
        }
    }

    fn weights(&self) -> &[f64] {
        match self {
            Model::Ns(m) => m.weights(),
            Model::Lagrangian(m) => m.weights(),
            Model::EulerVoigt(m) => m.weights(),
            Model::Test(s) => &s.weights,
        }
    }

    fn explicit_drift(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            Model::Ns(m) => m.core.self_advection(x, out),
            Model::EulerVoigt(m) => m.core.self_advection(x, out),
            Model::Lagrangian(m) => m.transport(x, out),
            Model::Test(s) => return s.explicit_drift(x, out),
        }
        Ok(())
    }

    fn noise_amplitudes(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Model::Test(s) => s.noise_amplitudes(x, out),
            _ => self.noise().expect("spectral model").amplitudes(x, out),
        }
    }

    fn low_mask(&self, rank: usize) -> Result<Vec<bool>> {
        match self {
            Model::Test(s) => s.low_mask(rank),
            _ => {
                let b = self.need_basis()?;
                let level = b.modes().eigenvalue_level(rank, Spectrum::Laplacian)?;
                Ok(b.low_mask(level))
            }
        }
    }
}

/// Report form of the Lagrangian hypothesis checks.
pub fn check_l_hypotheses(model: &LagrangianModel, samples: usize, seed: u64) -> LReport {
    model.check_hypotheses(samples, seed)
}

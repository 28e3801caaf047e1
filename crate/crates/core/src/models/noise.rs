use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sde::weighted_norm_sq;

/// How channel amplitudes respond to the state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseKind {
    /// `sigma_j(u) = a_j`.
    Additive,
    /// `sigma_j(u) = a_j g(r)`, `g(r) = floor + (1 - floor)/(1 + r/s0)` with
    /// `r` the norm of the low part of `u` (`|k|^2 <= cutoff`).
    Saturated { s0: f64, floor: f64, cutoff: f64 },
    /// Low coordinates (`|k|^2 <= cutoff`) get `a_j sqrt(q(r))`, with
    /// `sqrt q = sqrt(alpha) + (sqrt(beta) - sqrt(alpha)) r/(s0 + r)`;
    /// higher coordinates keep `q = 1`.
    LowMode { alpha: f64, beta: f64, s0: f64, cutoff: f64 },
}

/// Diagonal noise: channel `j` drives real coordinate `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseFamily {
    pub kind: NoiseKind,
    base: Vec<f64>,
    weights: Vec<f64>,
    /// Exponent of the norm used for the state dependence (and hence the
    /// norm in which Lipschitz constants are stated).
    arg_exponent: f64,
}

impl NoiseFamily {
    pub fn new(kind: NoiseKind, base: Vec<f64>, weights: Vec<f64>, arg_exponent: f64) -> Result<Self> {
        if base.len() != weights.len() {
            return Err(Error::Layout("noise amplitudes and weights differ in length".into()));
        }
        if base.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::Config("noise amplitudes must be finite and nonnegative".into()));
        }
        match kind {
            NoiseKind::Additive => {}
            NoiseKind::Saturated { s0, floor, .. } => {
                if !(s0 > 0.0) || !(0.0..=1.0).contains(&floor) {
                    return Err(Error::Config(format!("saturated noise needs s0 > 0 and floor in [0, 1], got {s0}, {floor}")));
                }
            }
            NoiseKind::LowMode { alpha, beta, s0, .. } => {
                if !(alpha > 0.0 && alpha <= beta && s0 > 0.0) {
                    return Err(Error::Config(format!("low-mode noise needs 0 < alpha <= beta and s0 > 0, got {alpha}, {beta}, {s0}")));
                }
            }
        }
        Ok(NoiseFamily { kind, base, weights, arg_exponent })
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn arg_exponent(&self) -> f64 {
        self.arg_exponent
    }

    /// Number of channels with nonzero amplitude.
    pub fn channels(&self) -> usize {
        self.base.iter().filter(|&&a| a > 0.0).count()
    }

    fn low_norm(&self, x: &[f64], cutoff: f64) -> f64 {
        let r = self.arg_exponent;
        x.iter()
            .zip(&self.weights)
            .filter(|(_, &w)| w <= cutoff)
            .map(|(v, &w)| if r == 0.0 { v * v } else { w.powf(r) * v * v })
            .sum::<f64>()
            .sqrt()
    }

    /// `sqrt(q_k(x))` for a coordinate of weight `w` (1 outside the
    /// low-mode family).
    pub fn sqrt_q(&self, x: &[f64], w: f64) -> f64 {
        match self.kind {
            NoiseKind::LowMode { alpha, beta, s0, cutoff } if w <= cutoff => {
                let r = self.low_norm(x, cutoff);
                alpha.sqrt() + (beta.sqrt() - alpha.sqrt()) * r / (s0 + r)
            }
            _ => 1.0,
        }
    }

    /// Channel amplitudes at state `x`.
    pub fn amplitudes(&self, x: &[f64], out: &mut [f64]) {
        match self.kind {
            NoiseKind::Additive => out.copy_from_slice(&self.base),
            NoiseKind::Saturated { s0, floor, cutoff } => {
                let r = self.low_norm(x, cutoff);
                let g = floor + (1.0 - floor) / (1.0 + r / s0);
                for (o, a) in out.iter_mut().zip(&self.base) {
                    *o = a * g;
                }
            }
            NoiseKind::LowMode { alpha, beta, s0, cutoff } => {
                let r = self.low_norm(x, cutoff);
                let sq = alpha.sqrt() + (beta.sqrt() - alpha.sqrt()) * r / (s0 + r);
                for ((o, a), &w) in out.iter_mut().zip(&self.base).zip(&self.weights) {
                    *o = if w <= cutoff { a * sq } else { *a };
                }
            }
        }
    }

    pub fn amplitudes_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.amplitudes(x, &mut out);
        out
    }

    /// Largest and smallest possible factor multiplying `a_j`.
    fn factor_range(&self, w: f64) -> (f64, f64) {
        match self.kind {
            NoiseKind::Additive => (1.0, 1.0),
            NoiseKind::Saturated { floor, .. } => (floor, 1.0),
            NoiseKind::LowMode { alpha, beta, cutoff, .. } if w <= cutoff => (alpha.sqrt(), beta.sqrt()),
            NoiseKind::LowMode { .. } => (1.0, 1.0),
        }
    }

    /// Bound on `sum_j |k_j|^{2 r} sigma_j(u)^2` over all states.
    pub fn b0(&self, r: f64) -> f64 {
        self.base
            .iter()
            .zip(&self.weights)
            .map(|(a, &w)| w.powf(r) * (a * self.factor_range(w).1).powi(2))
            .sum()
    }

    /// Squared Lipschitz constant `L` in
    /// `sum_j |k_j|^{2 r} (sigma_j(u) - sigma_j(v))^2 <= L ||u - v||^2`,
    /// the argument measured in the family's own norm.
    pub fn lipschitz_sq(&self, r: f64) -> f64 {
        match self.kind {
            NoiseKind::Additive => 0.0,
            NoiseKind::Saturated { s0, floor, .. } => {
                let slope = (1.0 - floor) / s0;
                slope * slope * self.b0(r)
            }
            NoiseKind::LowMode { cutoff, .. } => {
                let k = self.sqrt_q_lipschitz();
                k * k
                    * self
                        .base
                        .iter()
                        .zip(&self.weights)
                        .filter(|(_, &w)| w <= cutoff)
                        .map(|(a, &w)| w.powf(r) * a * a)
                        .sum::<f64>()
            }
        }
    }

    /// Lipschitz constant `K` of `sqrt(q_k)` (zero unless low-mode).
    pub fn sqrt_q_lipschitz(&self) -> f64 {
        match self.kind {
            NoiseKind::LowMode { alpha, beta, s0, .. } => (beta.sqrt() - alpha.sqrt()) / s0,
            _ => 0.0,
        }
    }

    /// Bound `C_0` on `|beta| / ||w||_r` for `sigma(u) beta = w`, `w`
    /// supported on `mask`. Infinite when a masked channel can vanish.
    pub fn c0(&self, mask: &[bool], r: f64) -> f64 {
        let mut worst = 0.0f64;
        for ((a, &w), &m) in self.base.iter().zip(&self.weights).zip(mask) {
            if !m {
                continue;
            }
            let low = a * self.factor_range(w).0 * w.powf(0.5 * r);
            if low == 0.0 {
                return f64::INFINITY;
            }
            worst = worst.max(1.0 / low);
        }
        worst
    }

    /// Channel weights `beta` with `sigma(x) beta = target`, where the target
    /// lives on the coordinates flagged in `mask`.
    pub fn pseudo_inverse(&self, x: &[f64], target: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
        let amp = self.amplitudes_vec(x);
        let mut beta = vec![0.0; amp.len()];
        for j in 0..amp.len() {
            if !mask[j] {
                if target[j] != 0.0 {
                    return Err(Error::Layout(format!("target has mass outside the controlled range at coordinate {j}")));
                }
                continue;
            }
            if amp[j] == 0.0 {
                return Err(Error::RangeConditionViolated { channel: j });
            }
            beta[j] = target[j] / amp[j];
        }
        Ok(beta)
    }
}

/// Sampled constants compared with the declared ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseAudit {
    pub samples: usize,
    pub norm_exponent: f64,
    pub b0_declared: f64,
    pub b0_observed: f64,
    pub lipschitz_declared: f64,
    pub lipschitz_observed: f64,
    pub passed: bool,
}

/// Random state whose low part has norm spread over several decades
/// around the saturation scale.
fn audit_state(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    let mut x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let target = scale * 10f64.powf(rng.gen_range(-3.0..3.0));
    x.iter_mut().for_each(|v| *v *= target / norm);
    x
}

/// Sampling audit of `B0` and the squared Lipschitz constant in output
/// exponent `r`: random states and nearby pairs (where difference
/// quotients approach the derivative) plus far pairs.
pub fn audit_noise(family: &NoiseFamily, r: f64, samples: usize, seed: u64) -> NoiseAudit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = family.dim();
    let scale = match family.kind {
        NoiseKind::Saturated { s0, .. } | NoiseKind::LowMode { s0, .. } => s0,
        NoiseKind::Additive => 1.0,
    };
    let q = family.arg_exponent;
    let weights = &family.weights;
    let (mut b0, mut lip) = (0.0f64, 0.0f64);
    let (mut su, mut sv) = (vec![0.0; n], vec![0.0; n]);
    for i in 0..samples {
        let x = audit_state(&mut rng, n, scale);
        let y = if i % 2 == 0 {
            let eps = 10f64.powf(rng.gen_range(-6.0..-1.0));
            let d = audit_state(&mut rng, n, scale);
            x.iter().zip(&d).map(|(a, b)| a + eps * b).collect::<Vec<_>>()
        } else {
            audit_state(&mut rng, n, scale)
        };
        family.amplitudes(&x, &mut su);
        family.amplitudes(&y, &mut sv);
        b0 = b0.max(weighted_norm_sq(weights, &su, r));
        let diff: Vec<f64> = su.iter().zip(&sv).map(|(a, b)| a - b).collect();
        let dx: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let den = weighted_norm_sq(weights, &dx, q);
        if den > 0.0 {
            lip = lip.max(weighted_norm_sq(weights, &diff, r) / den);
        }
    }
    let b0_declared = family.b0(r);
    let lipschitz_declared = family.lipschitz_sq(r);
    let tol = 1.0 + 1e-6;
    NoiseAudit {
        samples,
        norm_exponent: r,
        b0_declared,
        b0_observed: b0,
        lipschitz_declared,
        lipschitz_observed: lip,
        passed: b0 <= b0_declared * tol && lip <= lipschitz_declared * tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weights() -> Vec<f64> {
        vec![1.0, 1.0, 2.0, 2.0, 4.0, 4.0]
    }

    #[test]
    fn additive_ignores_state() {
        let f = NoiseFamily::new(NoiseKind::Additive, vec![0.5; 6], weights(), 0.0).unwrap();
        assert_eq!(f.amplitudes_vec(&[0.0; 6]), f.amplitudes_vec(&[3.0, -1.0, 2.0, 0.0, 9.0, 1.0]));
        assert_eq!(f.lipschitz_sq(0.0), 0.0);
        assert!((f.b0(0.0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn saturated_at_zero_is_base() {
        let kind = NoiseKind::Saturated { s0: 0.7, floor: 0.5, cutoff: 2.0 };
        let base = vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let f = NoiseFamily::new(kind, base.clone(), weights(), 0.0).unwrap();
        assert_eq!(f.amplitudes_vec(&[0.0; 6]), base);
        // far out the amplitudes approach the floor but never cross it
        let far = f.amplitudes_vec(&[1e9, 0.0, 0.0, 0.0, 0.0, 0.0]);
        for (a, b) in far.iter().zip(&base) {
            assert!(*a >= 0.5 * b && *a < 0.5000001 * b);
        }
        // only the low part matters
        assert_eq!(f.amplitudes_vec(&[0.0, 0.0, 0.0, 0.0, 5.0, 5.0]), base);
    }

    #[test]
    fn pseudo_inverse_divides_and_round_trips() {
        let f = NoiseFamily::new(NoiseKind::Additive, vec![2.0, 0.5, 1.0, 0.0, 1.0, 1.0], weights(), 0.0).unwrap();
        let mask = [true, true, false, false, false, false];
        let target = [3.0, -1.0, 0.0, 0.0, 0.0, 0.0];
        let beta = f.pseudo_inverse(&[0.0; 6], &target, &mask).unwrap();
        assert_eq!(beta[0], 1.5);
        let amp = f.amplitudes_vec(&[0.0; 6]);
        for j in 0..6 {
            assert!((amp[j] * beta[j] - target[j]).abs() < 1e-12);
        }
        assert_eq!(f.pseudo_inverse(&[0.0; 6], &[0.0; 6], &mask).unwrap(), vec![0.0; 6]);
        let wide = [true, true, true, true, false, false];
        assert!(matches!(
            f.pseudo_inverse(&[0.0; 6], &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0], &wide),
            Err(Error::RangeConditionViolated { channel: 3 })
        ));
        assert!(f.c0(&wide, 0.0).is_infinite());
        assert_eq!(f.c0(&mask, 0.0), 2.0);
    }

    #[test]
    fn audits_respect_declared_constants() {
        for kind in [
            NoiseKind::Additive,
            NoiseKind::Saturated { s0: 0.5, floor: 0.25, cutoff: 2.0 },
            NoiseKind::LowMode { alpha: 0.5, beta: 2.0, s0: 1.0, cutoff: 2.0 },
        ] {
            let f = NoiseFamily::new(kind, vec![0.3, 0.2, 0.5, 0.1, 0.05, 0.05], weights(), 0.5).unwrap();
            let a = audit_noise(&f, 0.5, 1000, 3);
            assert!(a.passed, "{a:?}");
        }
    }

    #[test]
    fn low_mode_bounds() {
        let kind = NoiseKind::LowMode { alpha: 0.5, beta: 2.0, s0: 1.0, cutoff: 1.0 };
        let f = NoiseFamily::new(kind, vec![1.0; 6], weights(), 0.0).unwrap();
        for s in [0.0, 0.3, 10.0, 1e8] {
            let x = [s, 0.0, 0.0, 0.0, 0.0, 0.0];
            let q = f.sqrt_q(&x, 1.0).powi(2);
            assert!((0.5..=2.0).contains(&q));
            assert_eq!(f.sqrt_q(&x, 4.0), 1.0);
        }
        assert!(NoiseFamily::new(NoiseKind::LowMode { alpha: 2.0, beta: 1.0, s0: 1.0, cutoff: 1.0 }, vec![1.0; 6], weights(), 0.0).is_err());
    }
}

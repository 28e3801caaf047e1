use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sde::weighted_norm_sq;

/// `|x - y|_r` with `|x|_r^2 = sum_j w_j^r x_j^2`.
pub fn metric_distance(weights: &[f64], r: f64, x: &[f64], y: &[f64]) -> f64 {
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    weighted_norm_sq(weights, &d, r).sqrt()
}

/// `f(x) = tanh(<x, d>_r)`; Lipschitz in `|.|_r` with constant `|d|_r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub direction: Vec<f64>,
    pub lipschitz: f64,
}

/// Fixed, seeded family of bounded Lipschitz test functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionDictionary {
    pub exponent: f64,
    pub weights: Vec<f64>,
    pub seed: u64,
    pub functions: Vec<TestFunction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzAudit {
    pub samples: usize,
    /// Largest observed `|f(x) - f(y)| / (Lip(f) |x - y|_r)`.
    pub max_ratio: f64,
    pub max_abs: f64,
    pub passed: bool,
}

impl TestFunctionDictionary {
    /// `size` random directions, each scaled to `|d|_r = lipschitz`.
    pub fn new(weights: &[f64], exponent: f64, size: usize, lipschitz: f64, seed: u64) -> Result<Self> {
        if size == 0 || !(lipschitz > 0.0) || weights.is_empty() {
            return Err(Error::Config(format!("dictionary of {size} functions with Lipschitz budget {lipschitz}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut functions = Vec::with_capacity(size);
        while functions.len() < size {
            let d: Vec<f64> = (0..weights.len()).map(|_| rng.sample(StandardNormal)).collect();
            let n = weighted_norm_sq(weights, &d, exponent).sqrt();
            if n > 0.0 {
                let s = lipschitz / n;
                functions.push(TestFunction { direction: d.iter().map(|v| v * s).collect(), lipschitz });
            }
        }
        Ok(TestFunctionDictionary { exponent, weights: weights.to_vec(), seed, functions })
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn max_lipschitz(&self) -> f64 {
        self.functions.iter().map(|f| f.lipschitz).fold(0.0, f64::max)
    }

    pub fn pairing(&self, x: &[f64], d: &[f64]) -> f64 {
        if self.exponent == 0.0 {
            return x.iter().zip(d).map(|(a, b)| a * b).sum();
        }
        x.iter().zip(d).zip(&self.weights).map(|((a, b), w)| w.powf(self.exponent) * a * b).sum()
    }

    pub fn eval(&self, i: usize, x: &[f64]) -> f64 {
        self.pairing(x, &self.functions[i].direction).tanh()
    }

    pub fn eval_all(&self, x: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|i| self.eval(i, x)).collect()
    }

    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        metric_distance(&self.weights, self.exponent, x, y)
    }

    /// Random pairs at several scales; checks the bound by 1 and the
    /// declared Lipschitz constants.
    pub fn audit(&self, samples: usize, seed: u64) -> LipschitzAudit {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.weights.len();
        let (mut max_ratio, mut max_abs) = (0.0f64, 0.0f64);
        for s in 0..samples {
            let scale = 10f64.powf(-2.0 + 4.0 * (s % 5) as f64 / 4.0);
            let x: Vec<f64> = (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
            let y: Vec<f64> = (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
            let d = self.distance(&x, &y);
            for (i, f) in self.functions.iter().enumerate() {
                let (fx, fy) = (self.eval(i, &x), self.eval(i, &y));
                max_abs = max_abs.max(fx.abs()).max(fy.abs());
                if d > 0.0 {
                    max_ratio = max_ratio.max((fx - fy).abs() / (f.lipschitz * d));
                }
            }
        }
        LipschitzAudit { samples, max_ratio, max_abs, passed: max_ratio <= 1.0 + 1e-12 && max_abs <= 1.0 }
    }
}

use crate::error::{Error, Result};

/// A truncated SDE in real coordinates with diagonal noise:
///
/// `dx_j = (-r_j x_j + N_j(x)) dt + sigma_j(x) dW_j`.
///
/// The linear rates `r_j` are integrated exactly; `N` and `sigma` are
/// evaluated at the left end of each step.
pub trait Dynamics: Sync {
    fn dim(&self) -> usize;

    /// Linear decay rate per coordinate.
    fn rates(&self) -> &[f64];

    /// Eigenvalue `|k|^2` attached to each coordinate; norms of exponent
    /// `r` weight coordinate `j` by `weights[j]^r`.
    fn weights(&self) -> &[f64];

    /// Everything in the drift except `-r_j x_j`.
    fn explicit_drift(&self, x: &[f64], out: &mut [f64]) -> Result<()>;

    /// Noise amplitude of the channel driving each coordinate.
    fn noise_amplitudes(&self, x: &[f64], out: &mut [f64]);

    /// Coordinates inside the range of `P_N`.
    fn low_mask(&self, rank: usize) -> Result<Vec<bool>>;
}

/// `sum_j w_j^r x_j^2`.
pub fn weighted_norm_sq(weights: &[f64], x: &[f64], r: f64) -> f64 {
    if r == 0.0 {
        return x.iter().map(|v| v * v).sum();
    }
    x.iter().zip(weights).map(|(v, w)| w.powf(r) * v * v).sum()
}

/// Per-coordinate factors of one exponential-Euler step.
#[derive(Debug, Clone)]
pub struct StepFactors {
    /// `e^{-r dt}`.
    pub decay: Vec<f64>,
    /// `dt * phi1(r dt)`, `phi1(z) = (1 - e^{-z})/z`.
    pub drift: Vec<f64>,
    /// `sqrt((1 - e^{-2 r dt}) / (2 r dt))`: makes the Ornstein-Uhlenbeck
    /// step exact in law.
    pub noise: Vec<f64>,
}

impl StepFactors {
    pub fn new(rates: &[f64], dt: f64) -> Self {
        let mut decay = Vec::with_capacity(rates.len());
        let mut drift = Vec::with_capacity(rates.len());
        let mut noise = Vec::with_capacity(rates.len());
        for &r in rates {
            let z = r * dt;
            decay.push((-z).exp());
            if z == 0.0 {
                drift.push(dt);
                noise.push(1.0);
            } else {
                drift.push(dt * (-(-z).exp_m1() / z));
                noise.push((-(-2.0 * z).exp_m1() / (2.0 * z)).sqrt());
            }
        }
        StepFactors { decay, drift, noise }
    }
}

/// Diagonal test systems: independent (or decoupled) scalar SDEs
/// `dX_j = (-r_j X_j + c (X_j - X_j^3)) dt + a_j dW_j`.
#[derive(Debug, Clone)]
pub struct TestSystem {
    pub rates: Vec<f64>,
    pub weights: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// Strength `c` of the double-well force `x - x^3`.
    pub double_well: f64,
}

impl TestSystem {
    /// `dX = -nu X dt + sqrt(b0) dW`.
    pub fn ornstein_uhlenbeck(nu: f64, b0: f64) -> Self {
        TestSystem { rates: vec![nu], weights: vec![1.0], amplitudes: vec![b0.sqrt()], double_well: 0.0 }
    }

    /// Deterministic linear decay `dx_j = -r_j x_j dt`.
    pub fn linear(rates: Vec<f64>, weights: Vec<f64>) -> Self {
        let n = rates.len();
        TestSystem { rates, weights, amplitudes: vec![0.0; n], double_well: 0.0 }
    }

    /// `dX = (X - X^3) dt + a dW`; two basins at `+-1` when `a = 0`.
    pub fn double_well(a: f64) -> Self {
        TestSystem { rates: vec![0.0], weights: vec![1.0], amplitudes: vec![a], double_well: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.rates.len();
        if n == 0 || self.weights.len() != n || self.amplitudes.len() != n {
            return Err(Error::Layout("test system vectors differ in length".into()));
        }
        Ok(())
    }
}

impl Dynamics for TestSystem {
    fn dim(&self) -> usize {
        self.rates.len()
    }

    fn rates(&self) -> &[f64] {
        &self.rates
    }

    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn explicit_drift(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        for (o, &v) in out.iter_mut().zip(x) {
            *o = self.double_well * (v - v * v * v);
        }
        Ok(())
    }

    fn noise_amplitudes(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.amplitudes);
    }

    /// Ranks count coordinates in order of increasing weight.
    fn low_mask(&self, rank: usize) -> Result<Vec<bool>> {
        let n = self.dim();
        if rank == 0 || rank > n {
            return Err(Error::RankBeyondTruncation { rank, available: n });
        }
        let mut w = self.weights.clone();
        w.sort_by(f64::total_cmp);
        let level = w[rank - 1];
        Ok(self.weights.iter().map(|&v| v <= level).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factors_limit_at_zero_rate() {
        let f = StepFactors::new(&[0.0, 1e-12, 3.0], 0.1);
        assert_eq!(f.decay[0], 1.0);
        assert_eq!(f.drift[0], 0.1);
        assert!((f.drift[1] - 0.1).abs() < 1e-13);
        assert!((f.noise[1] - 1.0).abs() < 1e-12);
        assert!((f.decay[2] - (-0.3f64).exp()).abs() < 1e-16);
        // variance of one exact OU step: (1 - e^{-2 r dt}) / (2 r)
        let var = f.noise[2].powi(2) * 0.1;
        assert!((var - (1.0 - (-0.6f64).exp()) / 6.0).abs() < 1e-15);
    }

    #[test]
    fn low_mask_by_weight() {
        let s = TestSystem::linear(vec![1.0; 4], vec![2.0, 1.0, 1.0, 4.0]);
        assert_eq!(s.low_mask(1).unwrap(), vec![false, true, true, false]);
        assert_eq!(s.low_mask(3).unwrap(), vec![true, true, true, false]);
        assert!(s.low_mask(5).is_err());
    }
}

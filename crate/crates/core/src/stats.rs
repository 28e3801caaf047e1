//! Small statistical helpers shared by the probes.
//!
//! Every reduction sums in slice order, so results never depend on how the
//! samples were scheduled.

use statrs::distribution::{ContinuousCDF, Normal};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Wilson score interval for `hits` successes out of `n` trials.
pub fn wilson(hits: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = hits as f64 / n_f;
    let z2 = z * z;
    let den = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / den;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / den;
    let lo = if hits == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if hits == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Binomial standard error at the estimated proportion.
pub fn proportion_se(hits: usize, n: usize) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    let p = hits as f64 / n as f64;
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").cdf(x)
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Words reserved per step; a step may consume at most this many 32-bit
/// words, which bounds the dimension at a few hundred thousand channels.
const STEP_WORDS: u32 = 20;

/// Counter-addressed Gaussian increments.
///
/// The increment vector for a step depends only on `(seed, stream, step)`,
/// so paths can be generated in any order, on any thread.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseStream {
    pub seed: u64,
    pub stream: u64,
    pub dim: usize,
}

impl NoiseStream {
    pub fn new(seed: u64, stream: u64, dim: usize) -> Self {
        NoiseStream { seed, stream, dim }
    }

    /// Same seed, different stream.
    pub fn with_stream(self, stream: u64) -> Self {
        NoiseStream { stream, ..self }
    }

    fn rng_at(&self, step: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos((step as u128) << STEP_WORDS);
        rng
    }

    /// Standard normals for `step` (unit variance).
    pub fn normals(&self, step: u64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        let mut rng = self.rng_at(step);
        for o in out.iter_mut() {
            *o = rng.sample(StandardNormal);
        }
    }

    /// Brownian increments over a step of length `dt`.
    pub fn increments(&self, step: u64, dt: f64, out: &mut [f64]) {
        self.normals(step, out);
        let s = dt.sqrt();
        out.iter_mut().for_each(|o| *o *= s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn increments_are_addressable() {
        let s = NoiseStream::new(7, 3, 5);
        let mut a = vec![0.0; 5];
        let mut b = vec![0.0; 5];
        s.normals(11, &mut a);
        s.normals(2, &mut b);
        s.normals(11, &mut b);
        assert_eq!(a, b);
        s.normals(12, &mut b);
        assert_ne!(a, b);
    }

    #[test]
    fn distinct_streams_are_uncorrelated() {
        let n = 20_000;
        let a = NoiseStream::new(1, 0, 1);
        let b = a.with_stream(1);
        let (mut x, mut y) = ([0.0], [0.0]);
        let mut sxy = 0.0;
        let (mut sx, mut sy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            a.normals(i, &mut x);
            b.normals(i, &mut y);
            sx += x[0];
            sy += y[0];
            sxx += x[0] * x[0];
            syy += y[0] * y[0];
            sxy += x[0] * y[0];
        }
        let nf = n as f64;
        let cov = sxy / nf - sx * sy / nf / nf;
        let rho = cov / ((sxx / nf - (sx / nf).powi(2)) * (syy / nf - (sy / nf).powi(2))).sqrt();
        assert!(rho.abs() < 4.0 / nf.sqrt(), "rho = {rho}");
        assert!((sxx / nf - 1.0).abs() < 0.05);
    }
}

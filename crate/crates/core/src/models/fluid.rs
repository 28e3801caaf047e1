//! Shared machinery of the two incompressible 2D models.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::spectral::{BasisKind, ModeSet, RealBasis, TriadKernel, CD_FLOOR, CD_SAFETY};

/// Divergence-free real basis plus the triad kernel on it.
#[derive(Debug, Clone)]
pub struct FluidCore {
    pub basis: RealBasis,
    kernel: TriadKernel,
    /// `|k|^{-gamma}` per mode (all ones for Navier-Stokes).
    smoothing: Vec<f64>,
}

impl FluidCore {
    pub fn new(modes: &ModeSet, gamma: f64) -> Result<Self> {
        let basis = RealBasis::new(modes, BasisKind::DivergenceFree2d)?;
        let kernel = TriadKernel::new(modes)?;
        let smoothing = modes.modes().iter().map(|k| if gamma == 0.0 { 1.0 } else { k.norm().powf(-gamma) }).collect();
        Ok(FluidCore { basis, kernel, smoothing })
    }

    fn stream(&self, x: &[f64]) -> Vec<Complex64> {
        let mut s = vec![Complex64::new(0.0, 0.0); self.basis.modes().len()];
        self.basis.to_stream(x, &mut s);
        for (a, f) in s.iter_mut().zip(&self.smoothing) {
            *a *= f;
        }
        s
    }

    /// `B(u_g, u_g)` in coordinates, `u_g` the smoothed field.
    pub fn self_advection(&self, x: &[f64], out: &mut [f64]) {
        let s = self.stream(x);
        self.write_canonical(&s, &s, out);
    }

    /// `B(a_g, b_g)` in coordinates.
    pub fn bilinear(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        let sa = self.stream(a);
        let sb = self.stream(b);
        self.write_canonical(&sa, &sb, out);
    }

    fn write_canonical(&self, sa: &[Complex64], sb: &[Complex64], out: &mut [f64]) {
        let coords = self.basis.coords();
        for (pair, o) in coords.chunks_exact(2).zip(out.chunks_exact_mut(2)) {
            let v = self.kernel.at(pair[0].mode, sa, sb);
            o[0] = std::f64::consts::SQRT_2 * v.re;
            o[1] = -std::f64::consts::SQRT_2 * v.im;
        }
    }

    /// `<B(a_g, b_g), a_g>` in the plain energy pairing.
    pub fn trilinear(&self, a: &[f64], b: &[f64]) -> f64 {
        let sa = self.stream(a);
        let sb = self.stream(b);
        (0..sa.len()).map(|k| (sa[k].conj() * self.kernel.at(k, &sa, &sb)).re).sum()
    }
}

/// Calibrated constant of `|<B(v_g, u_g), v_g>| <= C ||v||_{r_v}^2 ||u||_{r_u}`
/// over seeded random and resonant-triad pairs, times the usual safety
/// factor and with the usual floor.
pub fn calibrate_smoothed_trilinear(
    modes: &ModeSet,
    gamma: f64,
    r_v: f64,
    r_u: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let core = FluidCore::new(modes, gamma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<f64> = None;
    for _ in 0..samples {
        let (v, u) = crate::spectral::nonlinear::calibration_pair(&core.basis, &mut rng);
        let den = core.basis.norm_sq(&v, r_v) * core.basis.norm(&u, r_u);
        if den <= f64::MIN_POSITIVE {
            continue;
        }
        let r = core.trilinear(&v, &u).abs() / den;
        best = Some(best.map_or(r, |b: f64| b.max(r)));
    }
    let best = best.ok_or(Error::DegenerateCalibration)?;
    Ok((CD_SAFETY * best).max(CD_FLOOR))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{ns_bilinear, random_divergence_free};

    #[test]
    fn coordinate_advection_matches_state_form() {
        let m = ModeSet::new(2, 3).unwrap();
        let core = FluidCore::new(&m, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_divergence_free(&core.basis, &mut rng);
        let mut out = vec![0.0; x.len()];
        core.self_advection(&x, &mut out);
        let u = core.basis.to_state(&x);
        let direct = core.basis.from_state(&ns_bilinear(&u, &u).unwrap()).unwrap();
        for (a, b) in out.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-12);
        }
        // skew-symmetry in coordinates
        let dot: f64 = out.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-11);
    }

    #[test]
    fn smoothed_calibration_is_deterministic() {
        let m = ModeSet::new(2, 2).unwrap();
        let a = calibrate_smoothed_trilinear(&m, 1.5, -0.75, 0.25, 200, 4).unwrap();
        assert_eq!(a, calibrate_smoothed_trilinear(&m, 1.5, -0.75, 0.25, 200, 4).unwrap());
        assert!(a >= CD_FLOOR);
    }
}

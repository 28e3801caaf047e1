use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use super::modes::{ModeSet, Wavevector};
use super::state::SpectralState;
use crate::error::{Error, Result};

/// Real field family spanned by a [`RealBasis`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// 2D incompressible velocity fields: one direction `k^perp/|k|` per mode.
    DivergenceFree2d,
    /// Unconstrained real fields with the given number of components.
    Componentwise(usize),
}

/// One real coordinate: a cosine or sine wave at a canonical mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coordinate {
    /// Index of the canonical mode `k` in the mode set.
    pub mode: usize,
    /// Index of `-k`.
    pub partner: usize,
    pub component: usize,
    pub sine: bool,
    pub k: Wavevector,
    /// `|k|^2`.
    pub weight: f64,
}

/// Orthonormal real basis of a truncated field space.
///
/// Coordinates `x_j` are taken against unit-norm cosine/sine fields, so
/// `sum_j w_j^r x_j^2` equals the `r`-weighted norm of the represented
/// state. The basis is ordered like the underlying modes, which makes
/// `P_N` a mask on a prefix of the coordinates.
#[derive(Debug, Clone)]
pub struct RealBasis {
    modes: ModeSet,
    kind: BasisKind,
    coords: Vec<Coordinate>,
    weights: Vec<f64>,
}

impl RealBasis {
    pub fn new(modes: &ModeSet, kind: BasisKind) -> Result<Self> {
        let components = match kind {
            BasisKind::DivergenceFree2d => {
                if modes.dim() != 2 {
                    return Err(Error::InvalidModeSet("divergence-free basis needs 2D modes".into()));
                }
                1
            }
            BasisKind::Componentwise(c) if c >= 1 => c,
            BasisKind::Componentwise(_) => return Err(Error::InvalidModeSet("zero components".into())),
        };
        let mut coords = Vec::new();
        for &i in modes.canonical() {
            let k = modes.mode(i);
            for component in 0..components {
                for sine in [false, true] {
                    coords.push(Coordinate {
                        mode: i,
                        partner: modes.partner(i),
                        component,
                        sine,
                        k,
                        weight: k.norm_sq() as f64,
                    });
                }
            }
        }
        let weights = coords.iter().map(|c| c.weight).collect();
        Ok(RealBasis { modes: modes.clone(), kind, coords, weights })
    }

    pub fn modes(&self) -> &ModeSet {
        &self.modes
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Coordinate] {
        &self.coords
    }

    /// `|k_j|^2` per coordinate.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn state_components(&self) -> usize {
        match self.kind {
            BasisKind::DivergenceFree2d => 2,
            BasisKind::Componentwise(c) => c,
        }
    }

    /// `sum_j |k_j|^{2r} x_j^2`.
    pub fn norm_sq(&self, x: &[f64], r: f64) -> f64 {
        if r == 0.0 {
            return x.iter().map(|v| v * v).sum();
        }
        x.iter().zip(&self.weights).map(|(v, w)| w.powf(r) * v * v).sum()
    }

    pub fn norm(&self, x: &[f64], r: f64) -> f64 {
        self.norm_sq(x, r).sqrt()
    }

    pub fn inner(&self, x: &[f64], y: &[f64], r: f64) -> f64 {
        x.iter().zip(y).zip(&self.weights).map(|((a, b), w)| w.powf(r) * a * b).sum()
    }

    /// Complex amplitude at the canonical mode built from a (cos, sin) pair.
    fn amplitude(cos: f64, sin: f64) -> Complex64 {
        Complex64::new(cos, -sin) * FRAC_1_SQRT_2
    }

    /// Stream amplitudes `s(k)` with `u(k) = s(k) k^perp/|k|` over the full
    /// lattice (divergence-free basis only).
    pub fn to_stream(&self, x: &[f64], out: &mut [Complex64]) {
        debug_assert_eq!(self.kind, BasisKind::DivergenceFree2d);
        for pair in self.coords.chunks_exact(2).zip(x.chunks_exact(2)) {
            let (c, v) = pair;
            let s = Self::amplitude(v[0], v[1]);
            out[c[0].mode] = s;
            out[c[0].partner] = -s.conj();
        }
    }

    /// Inverse of [`to_stream`](Self::to_stream) restricted to canonical modes.
    pub fn from_stream(&self, s: &[Complex64], x: &mut [f64]) {
        for (c, v) in self.coords.chunks_exact(2).zip(x.chunks_exact_mut(2)) {
            let a = s[c[0].mode];
            v[0] = std::f64::consts::SQRT_2 * a.re;
            v[1] = -std::f64::consts::SQRT_2 * a.im;
        }
    }

    pub fn to_state(&self, x: &[f64]) -> SpectralState {
        let comps = self.state_components();
        let mut st = SpectralState::zeros(&self.modes, comps);
        match self.kind {
            BasisKind::DivergenceFree2d => {
                let mut s = vec![Complex64::new(0.0, 0.0); self.modes.len()];
                self.to_stream(x, &mut s);
                for (i, k) in self.modes.modes().iter().enumerate() {
                    let d = k.perp_unit();
                    st.set_coeff(i, 0, s[i] * d[0]);
                    st.set_coeff(i, 1, s[i] * d[1]);
                }
            }
            BasisKind::Componentwise(_) => {
                for (c, v) in self.coords.chunks_exact(2).zip(x.chunks_exact(2)) {
                    let a = Self::amplitude(v[0], v[1]);
                    st.set_coeff(c[0].mode, c[0].component, a);
                    st.set_coeff(c[0].partner, c[0].component, a.conj());
                }
            }
        }
        st
    }

    /// Orthogonal projection of a state onto the basis span.
    pub fn from_state(&self, st: &SpectralState) -> Result<Vec<f64>> {
        if st.modes() != &self.modes || st.components() != self.state_components() {
            return Err(Error::Layout("state does not match basis".into()));
        }
        let mut x = vec![0.0; self.dim()];
        for (c, v) in self.coords.chunks_exact(2).zip(x.chunks_exact_mut(2)) {
            let i = c[0].mode;
            let j = c[0].partner;
            // average k and -k so that non-real inputs project orthogonally
            let (a, b) = match self.kind {
                BasisKind::DivergenceFree2d => {
                    let d = c[0].k.perp_unit();
                    let [u, w] = st.vector(i);
                    let [up, wp] = st.vector(j);
                    (u * d[0] + w * d[1], up * d[0] + wp * d[1])
                }
                BasisKind::Componentwise(_) => (st.coeff(i, c[0].component), st.coeff(j, c[0].component)),
            };
            let s = (a + b.conj()) * 0.5;
            v[0] = std::f64::consts::SQRT_2 * s.re;
            v[1] = -std::f64::consts::SQRT_2 * s.im;
        }
        Ok(x)
    }

    /// Unit basis field for coordinate `j`.
    pub fn basis_field(&self, j: usize) -> SpectralState {
        let mut x = vec![0.0; self.dim()];
        x[j] = 1.0;
        self.to_state(&x)
    }

    /// Mask of coordinates with `|k|^2 <= level`.
    pub fn low_mask(&self, level: f64) -> Vec<bool> {
        self.weights.iter().map(|&w| w <= level).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize) -> Vec<f64> {
        (0..n).map(|i| ((i * 37 % 11) as f64 - 5.0) / (1.0 + i as f64)).collect()
    }

    #[test]
    fn divergence_free_round_trip_and_constraints() {
        let m = ModeSet::new(2, 3).unwrap();
        let b = RealBasis::new(&m, BasisKind::DivergenceFree2d).unwrap();
        assert_eq!(b.dim(), m.len());
        let x = sample(b.dim());
        let st = b.to_state(&x);
        assert!(st.reality_residual() < 1e-15);
        assert!(st.divergence_residual() < 1e-14);
        let y = b.from_state(&st).unwrap();
        for (a, c) in x.iter().zip(&y) {
            assert!((a - c).abs() < 1e-14);
        }
        for r in [0.0, 1.0, -0.5] {
            let lhs = b.norm_sq(&x, r);
            let rhs = st.sobolev_norm_sq(r);
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1.0));
        }
    }

    #[test]
    fn componentwise_round_trip() {
        let m = ModeSet::new(1, 4).unwrap();
        let b = RealBasis::new(&m, BasisKind::Componentwise(1)).unwrap();
        assert_eq!(b.dim(), 8);
        let x = sample(8);
        let st = b.to_state(&x);
        assert!(st.reality_residual() < 1e-15);
        for (a, c) in b.from_state(&st).unwrap().iter().zip(&x) {
            assert!((a - c).abs() < 1e-14);
        }
        assert!((b.norm_sq(&x, 2.0) - st.sobolev_norm_sq(2.0)).abs() < 1e-10);
    }

    #[test]
    fn basis_fields_are_orthonormal() {
        let m = ModeSet::new(2, 2).unwrap();
        let b = RealBasis::new(&m, BasisKind::DivergenceFree2d).unwrap();
        for i in 0..b.dim() {
            for j in 0..b.dim() {
                let g = b.basis_field(i).inner(&b.basis_field(j), 0.0);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-14, "{i} {j} {g}");
            }
        }
    }
}

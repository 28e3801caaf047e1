use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::modes::{ModeSet, Spectrum};
use super::CONSTRAINT_TOL;
use crate::error::{Error, Result};

/// Weight exponent `r` of the norm `sum |k|^{2r} |x(k)|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevWeight(pub f64);

impl SobolevWeight {
    pub fn of(self, k_norm_sq: f64) -> f64 {
        k_norm_sq.powf(self.0)
    }
}

/// Complex Fourier coefficients of a (possibly vector-valued) field.
///
/// Layout is mode-major: the coefficient of component `c` at mode index `i`
/// sits at `i * components + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    modes: ModeSet,
    components: usize,
    coeffs: Vec<Complex64>,
    real: bool,
}

impl SpectralState {
    pub fn zeros(modes: &ModeSet, components: usize) -> Self {
        SpectralState {
            modes: modes.clone(),
            components,
            coeffs: vec![Complex64::new(0.0, 0.0); modes.len() * components],
            real: true,
        }
    }

    pub fn from_coeffs(modes: &ModeSet, components: usize, coeffs: Vec<Complex64>, real: bool) -> Result<Self> {
        if components == 0 || coeffs.len() != modes.len() * components {
            return Err(Error::Layout(format!(
                "{} coefficients for {} modes x {} components",
                coeffs.len(),
                modes.len(),
                components
            )));
        }
        let s = SpectralState { modes: modes.clone(), components, coeffs, real };
        if real {
            let r = s.reality_residual();
            if r > CONSTRAINT_TOL {
                return Err(Error::Layout(format!("reality constraint violated by {r:e}")));
            }
        }
        Ok(s)
    }

    pub fn modes(&self) -> &ModeSet {
        &self.modes
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn coeff(&self, mode: usize, component: usize) -> Complex64 {
        self.coeffs[mode * self.components + component]
    }

    pub fn set_coeff(&mut self, mode: usize, component: usize, value: Complex64) {
        self.coeffs[mode * self.components + component] = value;
    }

    /// Vector coefficient at mode `i` (first two components).
    pub fn vector(&self, i: usize) -> [Complex64; 2] {
        let base = i * self.components;
        let second = if self.components > 1 { self.coeffs[base + 1] } else { Complex64::new(0.0, 0.0) };
        [self.coeffs[base], second]
    }

    pub(crate) fn with_coeffs(&self, coeffs: Vec<Complex64>) -> Self {
        SpectralState { modes: self.modes.clone(), components: self.components, coeffs, real: self.real }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.modes != other.modes || self.components != other.components {
            return Err(Error::Layout("states live on different mode sets".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let c = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(SpectralState { real: self.real && other.real, ..self.with_coeffs(c) })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let c = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(SpectralState { real: self.real && other.real, ..self.with_coeffs(c) })
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.with_coeffs(self.coeffs.iter().map(|c| c * factor).collect())
    }

    /// `max |c(-k) - conj(c(k))|` over modes and components.
    pub fn reality_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.modes.len() {
            let j = self.modes.partner(i);
            for c in 0..self.components {
                worst = worst.max((self.coeff(j, c) - self.coeff(i, c).conj()).norm());
            }
        }
        worst
    }

    /// `max |k . u(k)|` over retained modes; requires a 2D vector field.
    pub fn divergence_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, k) in self.modes.modes().iter().enumerate() {
            let [a, b] = self.vector(i);
            let [k1, k2] = k.as_f64();
            let d = if self.modes.dim() == 1 { a * k1 } else { a * k1 + b * k2 };
            worst = worst.max(d.norm());
        }
        worst
    }

    pub fn is_divergence_free(&self) -> bool {
        self.divergence_residual() <= CONSTRAINT_TOL * self.sobolev_norm(1.0).max(1.0)
    }

    /// `sqrt(sum_k |k|^{2r} |c(k)|^2)`.
    pub fn sobolev_norm(&self, r: f64) -> f64 {
        self.sobolev_norm_sq(r).sqrt()
    }

    pub fn sobolev_norm_sq(&self, r: f64) -> f64 {
        let w = SobolevWeight(r);
        self.modes
            .modes()
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let e: f64 = (0..self.components).map(|c| self.coeff(i, c).norm_sqr()).sum();
                w.of(k.norm_sq() as f64) * e
            })
            .sum()
    }

    /// Real part of `sum_k |k|^{2r} conj(a(k)) . b(k)`.
    pub fn inner(&self, other: &Self, r: f64) -> f64 {
        let w = SobolevWeight(r);
        let mut acc = 0.0;
        for (i, k) in self.modes.modes().iter().enumerate() {
            let mut e = Complex64::new(0.0, 0.0);
            for c in 0..self.components {
                e += self.coeff(i, c).conj() * other.coeff(i, c);
            }
            acc += w.of(k.norm_sq() as f64) * e.re;
        }
        acc
    }

    fn masked(&self, keep: impl Fn(f64) -> bool) -> Self {
        let mut out = self.clone();
        for (i, k) in self.modes.modes().iter().enumerate() {
            if !keep(k.norm_sq() as f64) {
                for c in 0..self.components {
                    out.coeffs[i * self.components + c] = Complex64::new(0.0, 0.0);
                }
            }
        }
        out
    }

    /// `P_N`: keeps every mode with `|k|^2 <= lambda_N` (ties kept together).
    pub fn project_low(&self, rank: usize) -> Result<Self> {
        let level = self.modes.eigenvalue_level(rank, Spectrum::Laplacian)?;
        Ok(self.masked(|l| l <= level))
    }

    /// `Q_N = I - P_N`.
    pub fn project_high(&self, rank: usize) -> Result<Self> {
        let level = self.modes.eigenvalue_level(rank, Spectrum::Laplacian)?;
        Ok(self.masked(|l| l > level))
    }

    /// Multiplies `c(k)` by `|k|^s`.
    pub fn fractional_laplacian(&self, s: f64) -> Self {
        let mut out = self.clone();
        for (i, k) in self.modes.modes().iter().enumerate() {
            let f = k.norm().powf(s);
            for c in 0..self.components {
                out.coeffs[i * self.components + c] *= f;
            }
        }
        out
    }

    /// Removes the component parallel to `k` at every mode (2D vector fields).
    pub fn leray_project(&self) -> Self {
        let mut out = self.clone();
        if self.components < 2 {
            return out;
        }
        for (i, k) in self.modes.modes().iter().enumerate() {
            let [k1, k2] = k.as_f64();
            let n2 = k1 * k1 + k2 * k2;
            let [a, b] = self.vector(i);
            let p = (a * k1 + b * k2) / n2;
            out.coeffs[i * self.components] = a - p * k1;
            out.coeffs[i * self.components + 1] = b - p * k2;
        }
        out
    }

    /// Point value `x(0) = sum_k c(k)` per component (real part for real fields).
    pub fn value_at_origin(&self) -> Vec<f64> {
        (0..self.components)
            .map(|c| (0..self.modes.len()).map(|i| self.coeff(i, c)).sum::<Complex64>().re)
            .collect()
    }

    pub fn to_record(&self) -> StateRecord {
        StateRecord {
            dim: self.modes.dim(),
            cutoff: self.modes.cutoff(),
            ordering: ModeSet::ORDERING.to_string(),
            components: self.components,
            real: self.real,
            coeffs: self.coeffs.iter().map(|c| [c.re, c.im]).collect(),
        }
    }

    pub fn from_record(rec: &StateRecord) -> Result<Self> {
        if rec.ordering != ModeSet::ORDERING {
            return Err(Error::Layout(format!("unknown ordering `{}`", rec.ordering)));
        }
        let modes = ModeSet::new(rec.dim, rec.cutoff)?;
        let coeffs = rec.coeffs.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
        SpectralState::from_coeffs(&modes, rec.components, coeffs, rec.real)
    }
}

/// Self-describing JSON form of a [`SpectralState`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateRecord {
    pub dim: usize,
    pub cutoff: usize,
    pub ordering: String,
    #[serde(default = "one")]
    pub components: usize,
    #[serde(default = "yes")]
    pub real: bool,
    pub coeffs: Vec<[f64; 2]>,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl Serialize for SpectralState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_record().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpectralState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = StateRecord::deserialize(d)?;
        SpectralState::from_record(&rec).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Wavevector;

    fn single(modes: &ModeSet, k: Wavevector, value: f64) -> SpectralState {
        let mut s = SpectralState::zeros(modes, 1);
        s.real = false;
        s.set_coeff(modes.index_of(k).unwrap(), 0, Complex64::new(value, 0.0));
        s
    }

    #[test]
    fn norm_examples() {
        let m = ModeSet::new(2, 3).unwrap();
        assert_eq!(SpectralState::zeros(&m, 2).sobolev_norm(0.7), 0.0);
        assert_eq!(single(&m, Wavevector(1, 0), 1.0).sobolev_norm(0.0), 1.0);
        let s = single(&m, Wavevector(2, 1), 1.0);
        assert!((s.sobolev_norm(1.0) - 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn projection_of_lowest_level_leaves_nothing_high() {
        let m = ModeSet::new(2, 3).unwrap();
        let s = single(&m, Wavevector(0, 1), 2.0);
        let q = s.project_high(4).unwrap();
        assert_eq!(q.sobolev_norm(0.0), 0.0);
        assert!(matches!(s.project_low(49), Err(Error::RankBeyondTruncation { .. })));
    }

    #[test]
    fn fractional_laplacian_scales_by_norm_power() {
        let m = ModeSet::new(2, 3).unwrap();
        let s = single(&m, Wavevector(0, 2), 1.0);
        let t = s.fractional_laplacian(1.0);
        assert_eq!(t.coeff(m.index_of(Wavevector(0, 2)).unwrap(), 0).re, 2.0);
        assert_eq!(s.fractional_laplacian(0.0), s);
    }

    #[test]
    fn record_rejects_unknown_ordering() {
        let m = ModeSet::new(1, 2).unwrap();
        let mut rec = SpectralState::zeros(&m, 1).to_record();
        rec.ordering = "natural".into();
        assert!(SpectralState::from_record(&rec).is_err());
        let bad = r#"{"dim":1,"cutoff":2,"ordering":"lex-|k|2","coeffs":[],"extra":1}"#;
        assert!(serde_json::from_str::<StateRecord>(bad).is_err());
    }

    #[test]
    fn reality_enforced_on_construction() {
        let m = ModeSet::new(1, 1).unwrap();
        let c = vec![Complex64::new(1.0, 1.0), Complex64::new(1.0, 1.0)];
        assert!(SpectralState::from_coeffs(&m, 1, c.clone(), true).is_err());
        assert!(SpectralState::from_coeffs(&m, 1, c, false).is_ok());
    }
}

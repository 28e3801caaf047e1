use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer wavevector. One-dimensional sets keep the second entry at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Wavevector(pub i32, pub i32);

impl Wavevector {
    pub fn norm_sq(self) -> i64 {
        let (a, b) = (self.0 as i64, self.1 as i64);
        a * a + b * b
    }

    pub fn norm(self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    pub fn neg(self) -> Self {
        Wavevector(-self.0, -self.1)
    }

    pub fn sup_norm(self) -> i32 {
        self.0.abs().max(self.1.abs())
    }

    pub fn as_f64(self) -> [f64; 2] {
        [self.0 as f64, self.1 as f64]
    }

    /// Canonical half-lattice representative: first nonzero entry positive.
    pub fn is_canonical(self) -> bool {
        self.0 > 0 || (self.0 == 0 && self.1 > 0)
    }

    /// Unit vector `k^perp / |k|`, the divergence-free direction at `k`.
    pub fn perp_unit(self) -> [f64; 2] {
        let n = self.norm();
        [-(self.1 as f64) / n, self.0 as f64 / n]
    }
}

impl fmt::Display for Wavevector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.0, self.1)
    }
}

/// Which eigenvalue sequence orders the modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Spectrum {
    /// `|k|^2`, the (Stokes) Laplacian.
    Laplacian,
    /// `|k|^s`, a fractional power of the Laplacian.
    Fractional(f64),
}

impl Spectrum {
    pub fn eigenvalue(self, k: Wavevector) -> f64 {
        match self {
            Spectrum::Laplacian => k.norm_sq() as f64,
            Spectrum::Fractional(s) => k.norm().powf(s),
        }
    }
}

#[derive(Debug)]
struct ModeTable {
    dim: usize,
    cutoff: usize,
    modes: Vec<Wavevector>,
    lookup: Vec<i32>,
    partner: Vec<usize>,
    canonical: Vec<usize>,
}

/// Retained wavevectors `{k in Z^d : 0 < |k|_inf <= M}` in canonical order.
///
/// Cloning is cheap; the table is shared.
#[derive(Clone)]
pub struct ModeSet(Arc<ModeTable>);

impl fmt::Debug for ModeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModeSet")
            .field("dim", &self.0.dim)
            .field("cutoff", &self.0.cutoff)
            .field("len", &self.0.modes.len())
            .finish()
    }
}

impl PartialEq for ModeSet {
    fn eq(&self, other: &Self) -> bool {
        self.0.dim == other.0.dim && self.0.cutoff == other.0.cutoff
    }
}

impl ModeSet {
    pub const ORDERING: &'static str = "lex-|k|2";

    pub fn new(dim: usize, cutoff: usize) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidModeSet(format!("dimension {dim} (need 1 or 2)")));
        }
        if cutoff == 0 {
            return Err(Error::InvalidModeSet("cutoff must be positive".into()));
        }
        let m = cutoff as i32;
        let mut modes = Vec::new();
        let second = if dim == 2 { -m..=m } else { 0..=0 };
        for k1 in -m..=m {
            for k2 in second.clone() {
                if k1 != 0 || k2 != 0 {
                    modes.push(Wavevector(k1, k2));
                }
            }
        }
        modes.sort_by_key(|k| (k.norm_sq(), k.0, k.1));

        let side = 2 * cutoff + 1;
        let mut lookup = vec![-1i32; side.pow(dim as u32)];
        for (i, k) in modes.iter().enumerate() {
            lookup[Self::slot(dim, cutoff, *k)] = i as i32;
        }
        let find = |k: Wavevector| lookup[Self::slot(dim, cutoff, k)] as usize;
        let partner = modes.iter().map(|k| find(k.neg())).collect();
        let canonical = (0..modes.len()).filter(|&i| modes[i].is_canonical()).collect();
        Ok(ModeSet(Arc::new(ModeTable { dim, cutoff, modes, lookup, partner, canonical })))
    }

    fn slot(dim: usize, cutoff: usize, k: Wavevector) -> usize {
        let side = 2 * cutoff as i32 + 1;
        let a = (k.0 + cutoff as i32) as usize;
        if dim == 1 {
            a
        } else {
            a * side as usize + (k.1 + cutoff as i32) as usize
        }
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn cutoff(&self) -> usize {
        self.0.cutoff
    }

    pub fn len(&self) -> usize {
        self.0.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.modes.is_empty()
    }

    pub fn modes(&self) -> &[Wavevector] {
        &self.0.modes
    }

    pub fn mode(&self, i: usize) -> Wavevector {
        self.0.modes[i]
    }

    pub fn index_of(&self, k: Wavevector) -> Option<usize> {
        let m = self.0.cutoff as i32;
        if k.sup_norm() > m || (k.0 == 0 && k.1 == 0) || (self.0.dim == 1 && k.1 != 0) {
            return None;
        }
        let i = self.0.lookup[Self::slot(self.0.dim, self.0.cutoff, k)];
        (i >= 0).then_some(i as usize)
    }

    /// Index of `-k` for the mode at index `i`.
    pub fn partner(&self, i: usize) -> usize {
        self.0.partner[i]
    }

    /// Indices of the canonical half-lattice representatives, in mode order.
    pub fn canonical(&self) -> &[usize] {
        &self.0.canonical
    }

    /// Sorted eigenvalue list with multiplicity (one entry per lattice point).
    pub fn eigenvalues(&self, spectrum: Spectrum) -> Vec<f64> {
        let mut v: Vec<f64> = self.modes().iter().map(|&k| spectrum.eigenvalue(k)).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// The `n`-th value (1-based) of the sorted eigenvalue list.
    pub fn eigenvalue_level(&self, n: usize, spectrum: Spectrum) -> Result<f64> {
        if n == 0 || n > self.len() {
            return Err(Error::RankBeyondTruncation { rank: n, available: self.len() });
        }
        Ok(self.eigenvalues(spectrum)[n - 1])
    }

    /// Smallest rank `n` whose level passes `pred`, scanning the sorted list.
    pub fn first_rank_where(&self, spectrum: Spectrum, pred: impl Fn(f64) -> bool) -> Option<usize> {
        self.eigenvalues(spectrum).iter().position(|&l| pred(l)).map(|i| i + 1)
    }
}

/// The `n`-th value (1-based) of an arbitrary eigenvalue list, sorted with
/// multiplicity.
pub fn eigenvalue_level_in(values: &[f64], n: usize) -> Result<f64> {
    if n == 0 || n > values.len() {
        return Err(Error::RankBeyondTruncation { rank: n, available: values.len() });
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v[n - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_is_a_bijection() {
        let m = ModeSet::new(2, 3).unwrap();
        assert_eq!(m.len(), 7 * 7 - 1);
        for (i, &k) in m.modes().iter().enumerate() {
            assert_eq!(m.index_of(k), Some(i));
            assert_eq!(m.mode(m.partner(i)), k.neg());
        }
        assert_eq!(m.index_of(Wavevector(0, 0)), None);
        assert_eq!(m.index_of(Wavevector(4, 0)), None);
        assert_eq!(m.canonical().len(), m.len() / 2);
    }

    #[test]
    fn ordering_is_lexicographic_on_norm_then_entries() {
        let m = ModeSet::new(2, 2).unwrap();
        let keys: Vec<_> = m.modes().iter().map(|k| (k.norm_sq(), k.0, k.1)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(m.mode(0), Wavevector(-1, 0));
    }

    #[test]
    fn eigenvalue_levels_on_the_torus() {
        let m = ModeSet::new(2, 4).unwrap();
        assert_eq!(m.eigenvalue_level(1, Spectrum::Laplacian).unwrap(), 1.0);
        assert_eq!(m.eigenvalue_level(5, Spectrum::Laplacian).unwrap(), 2.0);
        assert_eq!(m.eigenvalue_level(9, Spectrum::Laplacian).unwrap(), 4.0);
        assert!(m.eigenvalue_level(81, Spectrum::Laplacian).is_err());
        assert!(m.eigenvalue_level(0, Spectrum::Laplacian).is_err());
    }

    #[test]
    fn one_dimensional_sets() {
        let m = ModeSet::new(1, 3).unwrap();
        assert_eq!(m.len(), 6);
        assert_eq!(m.eigenvalue_level(5, Spectrum::Laplacian).unwrap(), 9.0);
        assert_eq!(m.eigenvalue_level(1, Spectrum::Fractional(1.0)).unwrap(), 1.0);
        assert!(ModeSet::new(3, 2).is_err());
        assert_eq!(eigenvalue_level_in(&[9.0], 1).unwrap(), 9.0);
        assert!(eigenvalue_level_in(&[9.0], 2).is_err());
        assert_eq!(eigenvalue_level_in(&[4.0, 1.0, 2.0, 1.0], 3).unwrap(), 2.0);
        assert!(ModeSet::new(2, 0).is_err());
    }
}

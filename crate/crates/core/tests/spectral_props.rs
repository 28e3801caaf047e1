use ergoverify::spectral::{
    lagrangian_mode_drift, ns_bilinear, BasisKind, ModeSet, RealBasis, SpectralState, Spectrum,
};
use proptest::prelude::*;

fn coords(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, n)
}

fn basis(cutoff: usize) -> RealBasis {
    RealBasis::new(&ModeSet::new(2, cutoff).unwrap(), BasisKind::DivergenceFree2d).unwrap()
}

fn state_and_rank() -> impl Strategy<Value = (Vec<f64>, usize)> {
    let n = basis(3).dim();
    (coords(n), 1..=n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval((x, _) in state_and_rank()) {
        let b = basis(3);
        let u = b.to_state(&x);
        let lhs = u.sobolev_norm_sq(0.0);
        let coeff_sum: f64 = u.coeffs().iter().map(|c| c.norm_sqr()).sum();
        prop_assert!((lhs - coeff_sum).abs() <= 1e-12 * lhs.max(1.0));
        prop_assert!((b.norm_sq(&x, 0.0) - lhs).abs() <= 1e-12 * lhs.max(1.0));
    }

    #[test]
    fn projector_algebra((x, rank) in state_and_rank()) {
        let u = basis(3).to_state(&x);
        let p = u.project_low(rank).unwrap();
        let q = u.project_high(rank).unwrap();
        prop_assert_eq!(p.add(&q).unwrap(), u.clone());
        prop_assert_eq!(p.project_low(rank).unwrap(), p.clone());
        prop_assert_eq!(q.project_high(rank).unwrap(), q.clone());
        prop_assert_eq!(p.project_high(rank).unwrap().sobolev_norm(0.0), 0.0);
        prop_assert_eq!(q.project_low(rank).unwrap().sobolev_norm(0.0), 0.0);
    }

    #[test]
    fn generalized_poincare((x, rank) in state_and_rank()) {
        let u = basis(3).to_state(&x);
        let level = u.modes().eigenvalue_level(rank, Spectrum::Laplacian).unwrap();
        let p = u.project_low(rank).unwrap();
        let q = u.project_high(rank).unwrap();
        prop_assert!(p.sobolev_norm_sq(1.0) <= level * p.sobolev_norm_sq(0.0) * (1.0 + 1e-12) + 1e-300);
        prop_assert!(q.sobolev_norm_sq(0.0) * level <= q.sobolev_norm_sq(1.0) * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn ns_skew_symmetry(x in coords(basis(3).dim()), y in coords(basis(3).dim())) {
        let b = basis(3);
        let u = b.to_state(&x);
        let v = b.to_state(&y);
        let t = ns_bilinear(&u, &v).unwrap().inner(&v, 0.0);
        prop_assert!(t.abs() < 1e-11, "{}", t);
        let w = ns_bilinear(&u, &v).unwrap();
        prop_assert!(w.is_divergence_free());
        prop_assert!(w.reality_residual() < 1e-12);
    }

    #[test]
    fn fractional_round_trip(x in coords(basis(2).dim()), s in -3.0f64..3.0) {
        let u = basis(2).to_state(&x);
        let back = u.fractional_laplacian(s).fractional_laplacian(-s);
        prop_assert!(back.sub(&u).unwrap().sobolev_norm(0.0) <= 1e-12 * u.sobolev_norm(0.0).max(1.0));
        prop_assert!(u.fractional_laplacian(s).is_divergence_free());
    }

    #[test]
    fn json_round_trip(x in coords(basis(2).dim())) {
        let u = basis(2).to_state(&x);
        let text = serde_json::to_string(&u).unwrap();
        let back: SpectralState = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, u);
    }

    #[test]
    fn lagrangian_rotation_is_skew(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0) {
        let (da, db) = lagrangian_mode_drift(a, b, c);
        prop_assert!((a * da + b * db).abs() <= 4.0 * f64::EPSILON * (a * b * c).abs());
    }
}

#[test]
fn norm_examples() {
    let m = ModeSet::new(2, 2).unwrap();
    let b = RealBasis::new(&m, BasisKind::Componentwise(1)).unwrap();
    let mut s = SpectralState::zeros(&m, 1);
    assert_eq!(s.sobolev_norm(1.5), 0.0);
    let i = m.index_of(ergoverify::spectral::Wavevector(1, 0)).unwrap();
    s.set_coeff(i, 0, num_complex::Complex64::new(1.0, 0.0));
    assert_eq!(s.sobolev_norm(0.0), 1.0);
    let mut t = SpectralState::zeros(&m, 1);
    let j = m.index_of(ergoverify::spectral::Wavevector(2, 1)).unwrap();
    t.set_coeff(j, 0, num_complex::Complex64::new(1.0, 0.0));
    assert!((t.sobolev_norm(1.0) - 5f64.sqrt()).abs() < 1e-15);
    assert_eq!(b.dim(), m.len());
    // |k|^2 = 4 scaled by |k|^1 = 2
    let mut f = SpectralState::zeros(&m, 1);
    let l = m.index_of(ergoverify::spectral::Wavevector(2, 0)).unwrap();
    f.set_coeff(l, 0, num_complex::Complex64::new(0.5, 0.0));
    assert_eq!(f.fractional_laplacian(1.0).coeff(l, 0).re, 1.0);
    assert_eq!(f.fractional_laplacian(0.0), f);
}

#[test]
fn single_mode_level() {
    assert_eq!(ergoverify::spectral::eigenvalue_level_in(&[9.0], 1).unwrap(), 9.0);
    let m = ModeSet::new(2, 3).unwrap();
    assert_eq!(m.eigenvalue_level(1, Spectrum::Laplacian).unwrap(), 1.0);
    assert_eq!(m.eigenvalue_level(5, Spectrum::Laplacian).unwrap(), 2.0);
}

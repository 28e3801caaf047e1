use num_rational::BigRational;

use super::*;

fn rows(m: &[&[f64]]) -> FiniteChain {
    FiniteChain::from_rows(m.iter().map(|r| r.to_vec()).collect()).unwrap()
}

fn identity() -> FiniteChain {
    rows(&[&[1.0, 0.0], &[0.0, 1.0]])
}

fn flip() -> FiniteChain {
    rows(&[&[0.0, 1.0], &[1.0, 0.0]])
}

fn halves() -> FiniteChain {
    rows(&[&[0.5, 0.5], &[0.5, 0.5]])
}

/// Independent oracle: iterate the lazy chain `(I + P) / 2`, which has the
/// same invariant measures and no periodicity.
fn lazy_power_oracle(chain: &FiniteChain, start: usize) -> DVector<f64> {
    let n = chain.len();
    let lazy = (DMatrix::identity(n, n) + &chain.p) * 0.5;
    let mut v = DVector::zeros(n);
    v[start] = 1.0;
    for _ in 0..200_000 {
        let next = lazy.transpose() * &v;
        if (&next - &v).amax() < 1e-15 {
            return next;
        }
        v = next;
    }
    v
}

#[test]
fn invariant_measure_examples() {
    let pis = invariant_measures(&identity());
    assert_eq!(pis.len(), 2);
    assert_eq!(pis[0].as_slice(), &[1.0, 0.0]);
    assert_eq!(pis[1].as_slice(), &[0.0, 1.0]);
    let pi = invariant_measures(&flip());
    assert_eq!(pi.len(), 1);
    assert!((pi[0][0] - 0.5).abs() < 1e-15 && (pi[0][1] - 0.5).abs() < 1e-15);
    for seed in 0..20 {
        let c = random_positive_chain(3, seed);
        let pi = invariant_measures(&c).remove(0);
        assert!(invariance_residual(&c, &pi) <= 1e-12);
        assert!((pi.clone() - lazy_power_oracle(&c, 0)).amax() <= 1e-10, "seed {seed}");
    }
}

#[test]
fn structure_of_edge_chains() {
    assert_eq!(flip().period(), 2);
    assert_eq!(identity().closed_classes().count(), 2);
    let absorbing = &edge_chains()[3];
    assert_eq!(absorbing.closed_classes().count(), 2);
    assert!(absorbing.classes.iter().any(|c| !c.closed && c.states == vec![1]));
    // a 3-cycle with one lazy state is aperiodic
    assert_eq!(rows(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[0.5, 0.0, 0.5]]).period(), 1);
    assert_eq!(rows(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]]).period(), 3);
}

#[test]
fn liminf_examples() {
    assert_eq!(liminf_hitting(&flip(), 0, &[0]).unwrap(), 0.0);
    assert_eq!(liminf_hitting(&identity(), 0, &[0]).unwrap(), 1.0);
    assert_eq!(liminf_hitting(&identity(), 0, &[1]).unwrap(), 0.0);
    let c = random_positive_chain(5, 3);
    let pi = invariant_measures(&c).remove(0);
    for x in 0..5 {
        let l = liminf_hitting(&c, x, &[1, 3]).unwrap();
        assert!((l - pi[1] - pi[3]).abs() < 1e-12);
    }
    assert!(liminf_hitting(&c, 0, &[]).is_err());
}

#[test]
fn condition_c_examples() {
    let c = condition_c_exact(&identity(), 0, 0.5, MetricChoice::Rho).unwrap();
    assert_eq!((c.value, c.witness), (0.0, 1));
    let c = condition_c_exact(&halves(), 1, 0.5, MetricChoice::Rho).unwrap();
    assert_eq!(c.value, 0.5);
    assert_eq!(condition_c_exact(&flip(), 0, 0.5, MetricChoice::Rho).unwrap().value, 0.0);
    assert!(condition_c_exact(&flip(), 0, 0.0, MetricChoice::Rho).is_err());
    // a ball holding both states of the 2-cycle has mass 1
    assert_eq!(condition_c_exact(&flip(), 0, 2.0, MetricChoice::Rho).unwrap().value, 1.0);
}

#[test]
fn stability_examples() {
    assert!(!asymptotic_stability_exact(&identity()).stable);
    assert!(!asymptotic_stability_exact(&flip()).stable);
    let c = random_positive_chain(4, 11);
    let s = asymptotic_stability_exact(&c);
    assert!(s.stable);
    let mu = DVector::from_vec(s.mu.unwrap());
    assert!((mu - lazy_power_oracle(&c, 2)).amax() < 1e-10);
}

#[test]
fn theorem4_on_edge_chains() {
    let rep = theorem4_consistency(&edge_chains()).unwrap();
    let got: Vec<(bool, bool)> = rep.verdicts.iter().map(|v| (v.stable, v.condition_c > CONVERGENCE_TOL)).collect();
    assert_eq!(got, vec![(false, false), (false, false), (true, true), (false, false)]);
    assert!(rep.passed);
    let single = FiniteChain::from_rows(vec![vec![1.0]]).unwrap();
    let rep = theorem4_consistency(&[single]).unwrap();
    assert!(rep.verdicts[0].stable && rep.verdicts[0].condition_c == 1.0);
    let mut buf = Vec::new();
    rep.write_jsonl(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);
}

#[test]
fn theorem4_on_a_random_battery() {
    let battery = random_battery(200, 5);
    let rep = theorem4_consistency(&battery).unwrap();
    assert!(rep.passed, "{:?}", rep.violations);
    assert!(rep.stable > 10 && rep.stable < 190, "battery lacks variety: {} stable", rep.stable);
}

fn hand_params(alpha: f64) -> DecompositionParams {
    DecompositionParams { x1: 0, x2: 1, z: 0, delta: 0.5, alpha, k: 1, metric: MetricChoice::D, horizon: 10, f_sup: Some(1.0), eps: Some(2.0) }
}

#[test]
fn decomposition_hand_example_is_exact() {
    let tr = measure_decomposition_exact(&halves(), &hand_params(0.4)).unwrap();
    let r = |a: i64, b: i64| BigRational::new(a.into(), b.into());
    assert_eq!(tr.times, vec![1]);
    assert_eq!(tr.nu[0][0], vec![r(1, 1), r(0, 1)]);
    assert_eq!(tr.mu[0][0], vec![r(1, 6), r(5, 6)]);
    assert_eq!(tr.mu[1][0], vec![r(1, 6), r(5, 6)]);
    assert_eq!(tr.reconstruction_error, 0.0);
    assert!(tr.support_ok && tr.probability_ok);
    assert_eq!(tr.residual_mass, r(3, 5));
    assert_eq!(tr.stopping_rule, Some(true));
    let f = measure_decomposition(&halves(), &hand_params(0.4)).unwrap();
    assert!((f.mu[0][0][0] - 1.0 / 6.0).abs() < 1e-15);
    assert!(f.reconstruction_error < 1e-15);
}

#[test]
fn decomposition_boundary_and_errors() {
    // alpha equal to the ball mass: mu keeps zero mass on the ball
    let tr = measure_decomposition(&halves(), &hand_params(0.5)).unwrap();
    assert!(tr.probability_ok);
    assert_eq!(tr.mu[0][0][0], 0.0);
    let exact = measure_decomposition_exact(&halves(), &hand_params(0.5)).unwrap();
    assert_eq!(exact.mu[0][0], vec![BigRational::from_integer(0.into()), BigRational::from_integer(1.into())]);
    assert!(matches!(measure_decomposition(&halves(), &hand_params(0.6)), Err(Error::AlphaTooLarge { .. })));
    assert!(matches!(measure_decomposition(&identity(), &hand_params(0.3)), Err(Error::AlphaTooLarge { .. })));
}

#[test]
fn decomposition_on_a_random_chain() {
    let c = random_positive_chain(5, 21);
    let params = DecompositionParams { x1: 0, x2: 4, z: 2, delta: 1.5, alpha: 0.3, k: 4, metric: MetricChoice::D, horizon: 100, f_sup: None, eps: None };
    let tr = measure_decomposition(&c, &params).unwrap();
    assert_eq!(tr.ball, vec![1, 2, 3]);
    assert!(tr.reconstruction_error < 1e-12);
    assert!(tr.support_ok && tr.probability_ok);
    assert!((tr.residual_mass - 0.7f64.powi(4)).abs() < 1e-15);
}

#[test]
fn decimal_rationals() {
    assert_eq!(decimal_rational(0.4), BigRational::new(2.into(), 5.into()));
    assert_eq!(decimal_rational(-1.25e3), BigRational::from_integer((-1250).into()));
    assert_eq!(decimal_rational(0.0), BigRational::from_integer(0.into()));
    assert_eq!(decimal_rational(3e-7), BigRational::new(3.into(), 10_000_000.into()));
}

fn birth_death(n: usize, up: f64, down: f64) -> FiniteChain {
    let rows = (0..n)
        .map(|i| {
            let mut r = vec![0.0; n];
            let u = if i + 1 < n { up } else { 0.0 };
            let d = if i > 0 { down } else { 0.0 };
            if i + 1 < n {
                r[i + 1] = u;
            }
            if i > 0 {
                r[i - 1] = d;
            }
            r[i] = 1.0 - u - d;
            r
        })
        .collect();
    FiniteChain::from_rows(rows).unwrap()
}

#[test]
fn lbc_trivial_positive_chain() {
    let c = random_positive_chain(3, 1);
    let rep = prop_lbc_exact(&c, &[0.0; 3], &|_| 0.0, 0.0, 0, 0.5, 1.0, 1, 10).unwrap();
    assert_eq!(rep.level_set, vec![0, 1, 2]);
    assert_eq!(rep.outcome, LbcOutcome::ConclusionHolds);
    assert!(rep.direct.value >= rep.bound);
}

#[test]
fn lbc_birth_death() {
    for (n, up, down) in [(6, 0.2, 0.5), (10, 0.3, 0.4), (8, 0.1, 0.1)] {
        let c = birth_death(n, up, down);
        let v: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let h = |t: usize| 0.9f64.powi(t as i32);
        let cst = fit_lyapunov_constant(&c, &v, &h, 200);
        let r = (2.0 * cst).max(1.0);
        let rep = prop_lbc_exact(&c, &v, &h, cst, 0, 0.5, r, n, 200).unwrap();
        assert!(rep.lyapunov_gap <= 1e-12);
        assert!(rep.level_liminf >= rep.chebyshev - 1e-12, "{rep:?}");
        assert_eq!(rep.outcome, LbcOutcome::ConclusionHolds, "{rep:?}");
    }
}

#[test]
fn lbc_transient_escape_fails_premise() {
    let c = rows(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 0.0, 1.0]]);
    let err = prop_lbc_exact(&c, &[0.0, 1.0, 10.0], &|t| 0.5f64.powi(t as i32), 1.0, 0, 0.5, 4.0, 2, 5).unwrap_err();
    assert!(matches!(err, Error::LyapunovPremise(_)));
    assert!(err.to_string().starts_with("Lyapunov premise fails"));
}

#[test]
fn grid_identity_kernel() {
    let c = grid_kernel_lab(&KernelSpec { contraction: 1.0, noise: 0.0, half_width: 2.0 }, 16).unwrap();
    assert_eq!(c.p, DMatrix::identity(16, 16));
}

#[test]
fn grid_ar1_lab() {
    let spec = KernelSpec { contraction: 0.5, noise: 1.0, half_width: 4.0 };
    let c = grid_kernel_lab(&spec, 64).unwrap();
    assert!(asymptotic_stability_exact(&c).stable);
    let z = 32;
    for which in [MetricChoice::Rho, MetricChoice::D] {
        let eps = c.metric(which)[(z, z + 1)];
        assert!(condition_c_exact(&c, z, eps, which).unwrap().value > 0.0);
        let prof = continuity_profile(&c, z, &[1, 2, 4, 8, 16], (30, 60), which).unwrap();
        assert!(prof.windows(2).all(|w| w[0].value <= w[1].value), "{prof:?}");
        assert!(prof[0].value < 1e-6);
    }
    let tv = refinement_tv(&spec, 64, 128).unwrap();
    assert!(tv < 0.02, "{tv}");
}

#[test]
fn chain_json_round_trip_and_validation() {
    let c = grid_kernel_lab(&KernelSpec { contraction: 0.5, noise: 1.0, half_width: 2.0 }, 6).unwrap();
    assert_eq!(FiniteChain::from_json(&c.to_json().unwrap()).unwrap(), c);
    let text = r#"{"states":[[0],[1]],"metric":"euclidean","P":[[0.5,0.5],[0,1]]}"#;
    let c = FiniteChain::from_json(text).unwrap();
    assert_eq!(c.rho[(0, 1)], 1.0);
    assert!(FiniteChain::from_json(r#"{"states":[[0],[1]],"metric":"euclidean","P":[[0.6,0.5],[0,1]]}"#).is_err());
    assert!(FiniteChain::from_json(r#"{"states":[[0],[0]],"metric":"euclidean","P":[[1,0],[0,1]]}"#).is_err());
    assert!(FiniteChain::from_json(r#"{"states":[[0],[1]],"metric":"taxicab","P":[[1,0],[0,1]]}"#).is_err());
    assert!(FiniteChain::from_json(r#"{"states":[[0],[1]],"metric":"euclidean","P":[[1,0],[0,1]],"extra":1}"#).is_err());
}

mod props {
    use proptest::prelude::*;

    use super::super::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn powers_stay_stochastic(n in 1usize..7, seed in any::<u64>(), k in 0usize..40) {
            let c = random_chain(n, 0.5, seed);
            let pk = c.power(k);
            for i in 0..n {
                prop_assert!((pk.row(i).sum() - 1.0).abs() <= 1e-12);
                prop_assert!(pk.row(i).iter().all(|&v| v >= 0.0));
            }
        }

        #[test]
        fn invariant_measures_are_invariant(n in 1usize..8, seed in any::<u64>()) {
            let c = random_chain(n, 0.6, seed);
            for pi in invariant_measures(&c) {
                prop_assert!(invariance_residual(&c, &pi) <= 1e-12);
                prop_assert!((pi.sum() - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn metric_choice_does_not_change_stability(a in 0.1f64..0.9, s in 0.3f64..2.0) {
            let c = grid_kernel_lab(&KernelSpec { contraction: a, noise: s, half_width: 3.0 }, 24).unwrap();
            let z = 12;
            let by = |w: MetricChoice| condition_c_exact(&c, z, c.metric(w)[(z, z + 1)], w).unwrap().value > 0.0;
            prop_assert_eq!(by(MetricChoice::Rho), by(MetricChoice::D));
            prop_assert!(asymptotic_stability_exact(&c).stable);
        }
    }
}

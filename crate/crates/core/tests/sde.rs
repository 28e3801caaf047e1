use ergoverify::sde::{
    coupled_integrate, ensemble, first_crossing, first_exit_time, integrate, martingale_tail_probe, weighted_norm_sq,
    Nudge, NoiseStream, RecordSpec, TestSystem, TimeGrid,
};
use ergoverify::stats::mean_se;
use proptest::prelude::*;

#[test]
fn ou_second_moment_matches_closed_form() {
    let sys = TestSystem::ornstein_uhlenbeck(1.0, 2.0);
    let grid = TimeGrid::new(0.0, 1e-2, 200).unwrap();
    let spec = RecordSpec { stride: 25, keep_states: true, ..Default::default() };
    let paths = ensemble(10_000, |p| integrate(&sys, &[0.0], &grid, &NoiseStream::new(77, p as u64, 1), &spec).unwrap());
    let times = &paths[0].times;
    for (i, &t) in times.iter().enumerate().skip(1) {
        let sq: Vec<f64> = paths.iter().map(|tr| tr.states[i][0].powi(2)).collect();
        let (m, se) = mean_se(&sq);
        let exact = 1.0 - (-2.0 * t).exp();
        assert!((m - exact).abs() <= 3.0 * se, "t={t}: {m} vs {exact} (se {se})");
    }
}

#[test]
fn integration_is_deterministic() {
    let sys = TestSystem::double_well(0.7);
    let grid = TimeGrid::new(0.0, 1e-3, 2000).unwrap();
    let noise = NoiseStream::new(5, 3, 1);
    let a = integrate(&sys, &[0.2], &grid, &noise, &RecordSpec::default()).unwrap();
    let b = integrate(&sys, &[0.2], &grid, &noise, &RecordSpec::default()).unwrap();
    assert_eq!(a, b);
    let nudge = Nudge { mask: vec![true], gain: 1.0, cancel_nonlinear: false, girsanov: true };
    let c1 = coupled_integrate(&sys, &[0.2], &[-0.4], &nudge, &grid, &noise, &Default::default()).unwrap();
    let c2 = coupled_integrate(&sys, &[0.2], &[-0.4], &nudge, &grid, &noise, &Default::default()).unwrap();
    assert_eq!(c1, c2);
}

#[test]
fn recorded_functionals_match_states() {
    let sys = TestSystem { rates: vec![1.0, 4.0, 9.0], weights: vec![1.0, 2.0, 5.0], amplitudes: vec![0.3, 0.2, 0.1], double_well: 0.0 };
    let grid = TimeGrid::new(0.0, 1e-3, 500).unwrap();
    let spec = RecordSpec { stride: 7, norms: vec![0.5, -1.0], integral: Some(1.0), keep_states: true };
    let tr = integrate(&sys, &[1.0, -1.0, 0.5], &grid, &NoiseStream::new(1, 0, 3), &spec).unwrap();
    assert_eq!(*tr.steps.last().unwrap(), 500);
    for (x, f) in tr.states.iter().zip(&tr.functionals) {
        for (v, r) in f.iter().zip([0.0, 1.0, 0.5, -1.0]) {
            assert!((v - weighted_norm_sq(&sys.weights, x, r).sqrt()).abs() < 1e-10);
        }
    }
    assert!(tr.integral.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn exit_time_on_a_ramp() {
    let values: Vec<f64> = (0..100).map(|i| 0.1 * i as f64).collect();
    assert_eq!(first_crossing(&values, 4.25), Some(43));
    assert_eq!(first_crossing(&values, -1.0), Some(0));
    assert_eq!(first_crossing(&values, 100.0), None);
    let sys = TestSystem::linear(vec![1.0], vec![1.0]);
    let grid = TimeGrid::new(0.0, 1e-2, 100).unwrap();
    let tr = integrate(&sys, &[1.0], &grid, &NoiseStream::new(0, 0, 1), &RecordSpec::default()).unwrap();
    assert_eq!(first_exit_time(&tr, |x| x[0].abs(), 2.0), None);
    assert_eq!(first_exit_time(&tr, |x| x[0].abs(), 0.5), Some(0));
}

#[test]
fn tail_bound_value() {
    let rep = martingale_tail_probe(1.0, &[0.0, 1.0], 400, 50.0, 0.05, 3).unwrap();
    assert_eq!(rep.rows[0].bound, 1.0);
    assert!(rep.rows[0].estimate <= 1.0);
    assert!((rep.rows[1].bound - 0.1353352832366127).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn linear_flow_is_exact(rate in 0.0f64..20.0, x0 in -5.0f64..5.0, steps in 1usize..400) {
        let sys = TestSystem::linear(vec![rate], vec![1.0]);
        let grid = TimeGrid::new(0.0, 1e-3, steps).unwrap();
        let tr = integrate(&sys, &[x0], &grid, &NoiseStream::new(0, 0, 1), &RecordSpec::default()).unwrap();
        for (t, x) in tr.times.iter().zip(&tr.states) {
            prop_assert!((x[0] - x0 * (-rate * t).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn streams_are_uncorrelated(seed in any::<u64>(), a in 0u64..1000, b in 0u64..1000) {
        prop_assume!(a != b);
        let n = 4000usize;
        let (sa, sb) = (NoiseStream::new(seed, a, 1), NoiseStream::new(seed, b, 1));
        let (mut xa, mut xb) = (vec![0.0; 1], vec![0.0; 1]);
        let mut acc = 0.0;
        for step in 0..n as u64 {
            sa.normals(step, &mut xa);
            sb.normals(step, &mut xb);
            acc += xa[0] * xb[0];
        }
        // |rho| < 4/sqrt(n) fails with probability ~6e-5 per case
        prop_assert!((acc / n as f64).abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn identical_starts_give_zero_difference(x in -2.0f64..2.0, seed in any::<u64>()) {
        let sys = TestSystem::double_well(0.5);
        let grid = TimeGrid::new(0.0, 1e-2, 200).unwrap();
        let nudge = Nudge { mask: vec![true], gain: 2.0, cancel_nonlinear: false, girsanov: true };
        let tr = coupled_integrate(&sys, &[x], &[x], &nudge, &grid, &NoiseStream::new(seed, 0, 1), &Default::default()).unwrap();
        prop_assert!(tr.v_norm_sq.iter().all(|&v| v == 0.0));
        prop_assert!(tr.girsanov.iter().all(|&g| g == 0.0));
    }
}

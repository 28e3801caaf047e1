//! Acceptance suite: ten criteria at their stated tolerances, one line each.
//! Runs without the test harness so the lines always print; exits nonzero
//! if any criterion fails.

use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ergoverify::campaign::{run_config, CampaignConfig, RunOptions, StateSpec};
use ergoverify::chain_lab::{
    birth_death, birth_death_battery, decomposition_battery, edge_chains, fit_lyapunov_constant, measure_decomposition, measure_decomposition_exact,
    prop_lbc_exact, random_battery, theorem4_consistency, DecompositionParams, FiniteChain, LbcOutcome, MetricChoice,
};
use ergoverify::coupling::{coupling_collapse_stats, gaussian_shift_tv, run_coupled, tv_surrogate_from_costs, weighted_decay_check, ControlSpec, CoupledOptions};
use ergoverify::models::{EvModel, EvParams, LagrangianModel, LagrangianParams, Model, NoiseConfig, NsModel, NsParams, QFamily};
use ergoverify::sde::{martingale_tail_probe, Dynamics, TestSystem, TimeGrid};
use ergoverify::verifiers::{eventual_continuity_probe, lower_bound_probe, lyapunov_verify, Sampling, TestFunctionDictionary};
use ergoverify::Result;
use num_rational::BigRational;
use serde_json::json;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

/// Navier-Stokes desk instance: 80 modes, saturated noise, smallest
/// rank passing the H3 threshold (rank 1).
fn ns_desk() -> Result<Model> {
    let noise = NoiseConfig::Saturated {
        amplitude: (1.0f64 / 160.0).sqrt(),
        decay: 0.0,
        support: None,
        s0: std::f64::consts::FRAC_1_SQRT_2,
        floor: 0.5,
        cutoff: 2.0,
    };
    Ok(Model::Ns(NsModel::new(NsParams { nu: 1.0, cutoff: 4, noise, rank: None, cd: None, cd_samples: 4000, cd_seed: 1 })?))
}

fn ev_desk() -> Result<Model> {
    let noise = NoiseConfig::Additive { amplitude: 0.1, decay: 1.0, support: Some(2.0) };
    Ok(Model::EulerVoigt(EvModel::new(EvParams { nu: 1.0, gamma: 1.5, cutoff: 4, noise, rank: None, c_ev: 1.0, ct: None, ct_samples: 1000, ct_seed: 1 })?))
}

fn lagrangian_desk() -> Result<Model> {
    Ok(Model::Lagrangian(LagrangianModel::new(LagrangianParams {
        dim: 2,
        cutoff: 4,
        m: 2.0,
        gamma_scale: 1.0,
        gamma_power: 2.0,
        e_scale: 0.5,
        e_decay: 4.0,
        q: Some(QFamily { alpha: 0.5, beta: 1.5, s0: 1.0, low_cutoff: 1 }),
        rank: 2,
        gain: None,
        energy_alpha: 0.5,
    })?))
}

fn chain_consistency() -> Result<Outcome> {
    let start = Instant::now();
    let mut battery = edge_chains();
    battery.extend(random_battery(1000, 20_240_601));
    let rep = theorem4_consistency(&battery)?;
    let secs = start.elapsed().as_secs_f64();
    outcome(
        rep.passed && rep.violations.is_empty() && secs < 60.0,
        format!("{} chains ({} stable, {} with C > 0), {} violations, {secs:.1} s", rep.chains, rep.stable, rep.condition_c, rep.violations.len()),
    )
}

fn decomposition() -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut support = true;
    let battery = decomposition_battery(100, 77);
    for (chain, params) in &battery {
        let tr = measure_decomposition(chain, params)?;
        worst = worst.max(tr.reconstruction_error);
        support &= tr.support_ok && tr.probability_ok;
    }
    let kmax = battery.iter().map(|(_, p)| p.k).max().unwrap_or(0);
    let chain = FiniteChain::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]])?;
    let params = DecompositionParams { x1: 0, x2: 1, z: 0, delta: 0.5, alpha: 0.4, k: 1, metric: MetricChoice::D, horizon: 10, f_sup: None, eps: None };
    let hand = measure_decomposition_exact(&chain, &params)?;
    let sixth = |n: i64| BigRational::new(n.into(), 6.into());
    let exact = hand.mu[0][0] == vec![sixth(1), sixth(5)] && hand.mu[1][0] == vec![sixth(1), sixth(5)];
    outcome(
        worst <= 1e-12 && support && exact && kmax <= 6,
        format!("{} stable chains, k <= {kmax}, max reconstruction error {worst:.2e}, support exact: {support}, hand example mu1 = (1/6, 5/6): {exact}", battery.len()),
    )
}

fn lbc_exact() -> Result<Outcome> {
    let (mut runs, mut holds, mut bad) = (0, 0, 0);
    let mut min_slack = f64::INFINITY;
    for (n, up, down) in birth_death_battery() {
        let chain = birth_death(n, up, down)?;
        let v: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let h = |t: usize| 0.9f64.powi(t as i32);
        let c = fit_lyapunov_constant(&chain, &v, &h, 200);
        let rep = prop_lbc_exact(&chain, &v, &h, c, 0, 0.5, (2.0 * c).max(1.0), n, 200)?;
        runs += 1;
        holds += (rep.outcome == LbcOutcome::ConclusionHolds) as usize;
        min_slack = min_slack.min(rep.direct.value - rep.bound);
        bad += (rep.outcome == LbcOutcome::ConclusionFails || rep.direct.value < rep.bound - 1e-12) as usize;
    }
    outcome(bad == 0, format!("{runs} birth-death runs, {holds} with verified premises, {bad} failing conclusions, min (C - p/2) = {min_slack:.3e}"))
}

fn martingale_tail() -> Result<Outcome> {
    let start = Instant::now();
    let mut pass = true;
    let mut worst = 0.0f64;
    for (i, kappa) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let r_grid: Vec<f64> = (1..=8).map(|j| 0.5 * j as f64 / (2.0 * kappa)).collect();
        let rep = martingale_tail_probe(kappa, &r_grid, 100_000, 30.0 / (kappa * kappa), 0.1, 900 + i as u64)?;
        pass &= rep.passed();
        for r in &rep.rows {
            worst = worst.max((r.estimate - r.bound).abs() / r.se.max(1e-300));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(pass && secs < 120.0, format!("kappa in {{0.5, 1, 2}}, 8 levels, 1e5 paths; max |est - e^(-2 kappa R)| = {worst:.2} s.e.; {secs:.1} s"))
}

fn lyapunov() -> Result<Outcome> {
    let start = Instant::now();
    let ou = Model::Test(TestSystem::ornstein_uhlenbeck(1.0, 2.0));
    let s = Sampling { horizon: 4.0, dt: 0.01, stride: 20, paths: 10_000, seed: 5 };
    let rep = lyapunov_verify(&ou, &[vec![2.0]], &s, None)?;
    let rows: Vec<_> = rep.rows.iter().filter(|r| r.t > 0.0).collect();
    let mut worst = 0.0f64;
    for r in &rows {
        let exact = (-2.0 * r.t).exp() * 4.0 + 1.0 - (-2.0 * r.t).exp();
        worst = worst.max((r.mean - exact).abs() / r.se);
    }
    let ou_ok = rows.len() == 20 && worst <= 3.0;

    let ns = ns_desk()?;
    let x0s = vec![vec![0.0; ns.dim()], StateSpec::Random { norm: 2.0, seed: 3 }.resolve(&ns)?];
    let s = Sampling { horizon: 6.0, dt: 0.01, stride: 50, paths: 256, seed: 6 };
    let ns_rep = lyapunov_verify(&ns, &x0s, &s, None)?;
    let secs = start.elapsed().as_secs_f64();
    outcome(
        ou_ok && ns_rep.passed && secs < 600.0,
        format!(
            "OU: {} times, max |mean - exact| = {worst:.2} s.e.; NS desk: {} rows within bound + 3 s.e.: {}; {secs:.1} s",
            rows.len(),
            ns_rep.rows.len(),
            ns_rep.passed
        ),
    )
}

fn coupling_decay() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, model) in [("NS", ns_desk()?), ("EV", ev_desk()?), ("L", lagrangian_desk()?)] {
        let hyp = model.hypotheses_hold()?;
        let grid = TimeGrid::covering(20.0, 0.01)?;
        for (k, sep) in [0.1, 1.0].into_iter().enumerate() {
            let base = StateSpec::Random { norm: 1.0, seed: 10 + k as u64 };
            let x = base.resolve(&model)?;
            let y = StateSpec::Shift { from: Box::new(base), by: sep, seed: 20 + k as u64 }.resolve(&model)?;
            let opts = CoupledOptions { paths: 256, seed: 30 + k as u64, stride: 50, weight: None, girsanov: true };
            let ens = run_coupled(&model, &ControlSpec::for_model(&model, None), &x, &y, &grid, &opts)?;
            let decay = weighted_decay_check(&ens, 1.0)?;
            let collapse = coupling_collapse_stats(&ens, 1e-3)?;
            let ok = hyp && decay.passed && collapse.fraction_below >= 0.95;
            pass &= ok;
            parts.push(format!("{label} |x-y|={sep}: decay {} collapse {:.3}", decay.passed, collapse.fraction_below));
        }
    }
    outcome(pass, parts.join("; "))
}

fn tv_surrogate() -> Result<Outcome> {
    let mut worst_gap = f64::INFINITY;
    let mut pass = true;
    for c in [0.1, 0.3, 1.0, 2.0, 5.0] {
        for t in [0.1, 0.5, 1.0, 4.0, 10.0] {
            // the Girsanov cost of a constant drift c on [0, t] is c^2 t on every path
            let rep = tv_surrogate_from_costs(&[c * c * t; 8], 1.0)?;
            let exact = gaussian_shift_tv(c, t);
            worst_gap = worst_gap.min(rep.pinsker - exact);
            pass &= rep.pinsker >= exact;
        }
    }
    outcome(pass, format!("25 (c, T) cells, min (Pinsker - exact TV) = {worst_gap:.3e}"))
}

fn eventual_continuity() -> Result<Outcome> {
    // radius 0 on the desk instance: exactly zero by common random numbers
    let ns = ns_desk()?;
    let dict = TestFunctionDictionary::new(ns.weights(), ns.metric_exponent(), 16, 1.0, 4)?;
    let z = StateSpec::Random { norm: 0.5, seed: 40 }.resolve(&ns)?;
    let dirs: Vec<Vec<f64>> = (0..2).map(|k| StateSpec::Random { norm: 1.0, seed: 41 + k }.resolve(&ns)).collect::<Result<_>>()?;
    let s = Sampling { horizon: 6.0, dt: 0.01, stride: 50, paths: 128, seed: 8 };
    let zero = eventual_continuity_probe(&ns, &z, &[0.0], &dirs, &dict, 5.0, &s)?;
    let zero_ok = zero.rows[0].d == 0.0;

    // deterministic linear flow: D(r) <= Lip e^{-nu lambda_1 T_tail} r
    let rates = vec![1.0, 2.0, 5.0, 10.0];
    let lin = Model::Test(TestSystem::linear(rates.clone(), vec![1.0, 2.0, 5.0, 10.0]));
    let ldict = TestFunctionDictionary::new(lin.weights(), lin.metric_exponent(), 16, 1.0, 4)?;
    let ldirs = vec![vec![1.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, -1.0]];
    let t_tail = 2.0;
    let ls = Sampling { horizon: 3.0, dt: 0.01, stride: 10, paths: 1, seed: 1 };
    let lrep = eventual_continuity_probe(&lin, &[0.5, -0.5, 0.2, 0.1], &[1.0, 0.5, 0.25, 0.1, 0.0], &ldirs, &ldict, t_tail, &ls)?;
    let decay = (-rates[0] * t_tail).exp();
    let linear_ok = lrep.rows.iter().all(|r| r.d <= ldict.max_lipschitz() * decay * r.radius * (1.0 + 1e-9) + 1e-15);

    // hypothesis-passing desk instance at decreasing radii
    let rep = eventual_continuity_probe(&ns, &z, &[1.0, 0.5, 0.25, 0.1, 0.05], &dirs, &dict, 5.0, &s)?;
    let last = rep.rows.last().expect("rows");
    outcome(
        zero_ok && linear_ok && ns.hypotheses_hold()? && rep.monotone && rep.smallest_ok,
        format!(
            "radius 0: D = {}; linear bound holds at all radii: {linear_ok}; NS desk: monotone {}, D({}) = {:.3e} (se {:.1e})",
            zero.rows[0].d, rep.monotone, last.radius, last.d, last.se
        ),
    )
}

fn condition_c() -> Result<Outcome> {
    let ou = Model::Test(TestSystem::ornstein_uhlenbeck(1.0, 2.0));
    let s = Sampling { horizon: 8.0, dt: 0.01, stride: 100, paths: 20_000, seed: 9 };
    let rep = lower_bound_probe(&ou, &[0.0], 1.0, &[vec![0.0]], 8.0, &s)?;
    let target = 0.682_689_492_137_085_9;
    let ou_ok = (rep.inf.freq - target).abs() <= 3.0 * rep.inf.se;

    let wells = Model::Test(TestSystem::double_well(0.0));
    let s = Sampling { horizon: 10.0, dt: 0.01, stride: 50, paths: 8, seed: 1 };
    let two = lower_bound_probe(&wells, &[1.0], 0.5, &[vec![-1.0], vec![1.0]], 5.0, &s)?;
    outcome(
        ou_ok && two.inf.freq == 0.0,
        format!("OU ball mass {:.4} +- {:.4} (target 0.6827); two-basin inf = {}", rep.inf.freq, rep.inf.se, two.inf.freq),
    )
}

fn determinism() -> Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let configs = [
        json!({
            "schema": "ergoverify-campaign-v1", "name": "chains", "kind": "chainlab", "seed": 17,
            "probes": [
                { "probe": "chain_consistency", "params": { "count": 200 } },
                { "probe": "measure_decomposition", "params": { "count": 20 } },
                { "probe": "prop_lbc_exact" },
                { "probe": "grid_kernel" }
            ]
        }),
        json!({
            "schema": "ergoverify-campaign-v1", "name": "ou", "kind": "verify", "seed": 18,
            "model": { "kind": "test", "rates": [1.0], "weights": [1.0], "amplitudes": [2.0f64.sqrt()] },
            "budget": { "horizon": 4.0, "dt": 0.01, "stride": 20, "paths": 500 },
            "probes": [
                { "probe": "simulate" },
                { "probe": "lyapunov", "params": { "x0s": [{ "coords": [2.0] }] } },
                { "probe": "condition_c", "params": { "eps": 1.0 } },
                { "probe": "martingale_tail", "params": { "kappa": 1.0, "r_grid": [0.5, 1.0], "horizon": 10.0, "dt": 0.1 } }
            ]
        }),
    ];
    let mut same = true;
    let mut probes = 0;
    for (i, v) in configs.into_iter().enumerate() {
        let cfg: CampaignConfig = serde_json::from_value(v)?;
        let run = |tag: &str| run_config(&cfg, dir.path(), &RunOptions { out: Some(dir.path().join(format!("{i}{tag}"))), seed_override: None });
        let (a, b) = (run("a")?, run("b")?);
        probes += a.verdicts.len();
        same &= a.config_digest == b.config_digest && a.verdict_digest == b.verdict_digest && a.verdicts == b.verdicts;
        same &= fs::read(dir.path().join(format!("{i}a/verdicts.jsonl")))? == fs::read(dir.path().join(format!("{i}b/verdicts.jsonl")))?;
    }
    outcome(same, format!("2 campaigns, {probes} probes, identical verdicts and digests across reruns: {same}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Result<Outcome>); 10] = [
        ("chain-lab stability <=> condition (C)", chain_consistency),
        ("measure decomposition", decomposition),
        ("Lyapunov + irreducibility, exact", lbc_exact),
        ("martingale tail bound", martingale_tail),
        ("Lyapunov bound", lyapunov),
        ("coupling decay and collapse", coupling_decay),
        ("TV surrogate soundness", tv_surrogate),
        ("eventual-continuity probe", eventual_continuity),
        ("condition (C) on simulated models", condition_c),
        ("campaign determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match f() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += (!pass) as usize;
        let dt: Duration = start.elapsed();
        println!("[{}] {:>2}. {name}: {detail} ({:.1} s)", if pass { "PASS" } else { "FAIL" }, i + 1, dt.as_secs_f64());
    }
    println!("acceptance: {}/10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

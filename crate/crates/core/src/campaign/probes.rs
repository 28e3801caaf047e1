use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Budget, BudgetPatch, CampaignConfig, CampaignKind};
use crate::chain_lab::{
    asymptotic_stability_exact, birth_death, birth_death_battery, condition_c_exact, continuity_profile, decomposition_battery, edge_chains,
    fit_lyapunov_constant, grid_kernel_lab, measure_decomposition, measure_decomposition_exact, prop_lbc_exact, random_battery,
    refinement_tv, theorem4_consistency, DecompositionParams, FiniteChain, KernelSpec, LbcOutcome, MetricChoice,
};
use crate::coupling::{coupling_collapse_stats, run_coupled, tv_surrogate, weighted_decay_check, ControlSpec, CoupledEnsemble, CoupledOptions};
use crate::error::{Error, Result};
use crate::models::Model;
use crate::sde::{ensemble, integrate, martingale_tail_probe, weighted_norm_sq, write_ensemble_csv, Dynamics, NoiseStream, RecordSpec};
use crate::stats::{mean_se, wilson, Z95};
use crate::verifiers::{
    energy_ball_samples, eventual_continuity_probe, irreducibility_time, lower_bound_probe, lyapunov_verify, prop_lbc_composition,
    stability_distance, uniform_irreducibility_probe, CurvePoint, IrreducibilityReport, LowerBoundReport, LyapunovReport, Sampling,
    TestFunctionDictionary, VerdictReport, COMPOSITION_REF, CONTINUITY_REF, IRREDUCIBILITY_REF, LOWER_BOUND_REF, LYAPUNOV_REF,
    STABILITY_REF,
};

use CampaignKind::{Chainlab, Couple, Simulate, Verify};

/// Registry row: probe name, the statement it tests, the campaign kinds
/// that may run it and whether it is asserted unless the config says
/// otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeInfo {
    pub name: &'static str,
    pub paper_ref: &'static str,
    pub kinds: &'static [CampaignKind],
    pub asserted: bool,
    pub model: bool,
    pub summary: &'static str,
}

const MODEL_KINDS: &[CampaignKind] = &[Verify];
const COUPLE_KINDS: &[CampaignKind] = &[Couple, Verify];
const ANY_MODEL: &[CampaignKind] = &[Simulate, Couple, Verify];

const REGISTRY: &[ProbeInfo] = &[
    ProbeInfo {
        name: "chain_consistency",
        paper_ref: "finite chain: asymptotically stable <=> exists z with inf_x liminf_n P^n(x, B(z, eps)) > 0 for every eps",
        kinds: &[Chainlab],
        asserted: true,
        model: false,
        summary: "exact stability vs. condition (C) over a seeded random battery plus edge chains",
    },
    ProbeInfo {
        name: "condition_c",
        paper_ref: LOWER_BOUND_REF,
        kinds: MODEL_KINDS,
        asserted: true,
        model: true,
        summary: "tail-window ball frequencies from several starts",
    },
    ProbeInfo {
        name: "coupling_collapse",
        paper_ref: "|u_t - u~_t| -> 0 for the nudged copy u~",
        kinds: COUPLE_KINDS,
        asserted: true,
        model: true,
        summary: "fraction of coupled pairs with |v_T| below a threshold",
    },
    ProbeInfo {
        name: "coupling_decay",
        paper_ref: "E |v_t|^{2p} e^{p h_p(t)} <= |x - y|^{2p}",
        kinds: COUPLE_KINDS,
        asserted: true,
        model: true,
        summary: "weighted decay of the coupled difference at every output time",
    },
    ProbeInfo {
        name: "eventual_continuity",
        paper_ref: CONTINUITY_REF,
        kinds: MODEL_KINDS,
        asserted: true,
        model: true,
        summary: "common-random-number differences of P_t f over shrinking radii",
    },
    ProbeInfo {
        name: "grid_kernel",
        paper_ref: "grid AR(1) kernel: stable <=> condition (C); eventual-continuity profile; refinement limit",
        kinds: &[Chainlab],
        asserted: true,
        model: false,
        summary: "reflected AR(1) discretization under two metrics",
    },
    ProbeInfo {
        name: "hypotheses",
        paper_ref: "rank condition on the controlled modes (lambda_N above the model threshold)",
        kinds: ANY_MODEL,
        asserted: false,
        model: true,
        summary: "whether the model's coupling hypotheses hold",
    },
    ProbeInfo {
        name: "irreducibility",
        paper_ref: IRREDUCIBILITY_REF,
        kinds: MODEL_KINDS,
        asserted: true,
        model: true,
        summary: "minimum ball frequency at time T over an energy-ball sample",
    },
    ProbeInfo {
        name: "lbc_composition",
        paper_ref: COMPOSITION_REF,
        kinds: MODEL_KINDS,
        asserted: true,
        model: true,
        summary: "Lyapunov + irreducibility composed and compared with the direct liminf",
    },
    ProbeInfo {
        name: "lyapunov",
        paper_ref: LYAPUNOV_REF,
        kinds: MODEL_KINDS,
        asserted: true,
        model: true,
        summary: "ensemble mean of V(u_t) against the analytic bound",
    },
    ProbeInfo {
        name: "martingale_tail",
        paper_ref: "P(sup_t (M_t - kappa <M>_t) >= R) <= e^{-2 kappa R}",
        kinds: &[Simulate, Verify],
        asserted: true,
        model: false,
        summary: "Brownian tail of the drifted supremum against the exponential bound",
    },
    ProbeInfo {
        name: "measure_decomposition",
        paper_ref: "P^{t_1+...+t_k}(x, .) = sum_i alpha (1 - alpha)^{i-1} nu_i P^{...} + (1 - alpha)^k mu_k P^0, nu_i supported in B_d(z, delta)",
        kinds: &[Chainlab],
        asserted: true,
        model: false,
        summary: "mixture reconstruction on stable random chains and the exact two-state example",
    },
    ProbeInfo {
        name: "prop_lbc_exact",
        paper_ref: "P^t V <= h(t) V + C and inf_{V <= R} P^T(x, B) = p > 0 imply liminf_n P^n(x, B) >= p/2",
        kinds: &[Chainlab],
        asserted: true,
        model: false,
        summary: "exact Lyapunov + irreducibility implication on a birth-death battery",
    },
    ProbeInfo {
        name: "simulate",
        paper_ref: "exponential Euler for du = (-A u + N(u)) dt + sigma(u) dW",
        kinds: ANY_MODEL,
        asserted: false,
        model: true,
        summary: "ensemble of trajectories and the mean energy curve",
    },
    ProbeInfo {
        name: "stability",
        paper_ref: STABILITY_REF,
        kinds: MODEL_KINDS,
        asserted: true,
        model: true,
        summary: "dual-Lipschitz distance between the laws from two starts",
    },
    ProbeInfo {
        name: "tv_surrogate",
        paper_ref: "TV(Law W, Law W~) <= sqrt(E G_T / 4)",
        kinds: COUPLE_KINDS,
        asserted: false,
        model: true,
        summary: "Pinsker bound from the Girsanov cost of the nudge",
    },
];

/// The probe registry, sorted by name.
pub fn list_probes() -> Vec<ProbeInfo> {
    let mut v = REGISTRY.to_vec();
    v.sort_by_key(|p| p.name);
    v
}

fn info(name: &str) -> Result<&'static ProbeInfo> {
    REGISTRY.iter().find(|p| p.name == name).ok_or_else(|| Error::UnknownProbe(name.into()))
}

/// A model state, resolved against the model's coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Zero,
    Coords(Vec<f64>),
    /// Gaussian direction scaled to `norm` in the model's metric.
    Random { norm: f64, seed: u64 },
    /// `amplitude` on coordinate `index`.
    Mode { index: usize, amplitude: f64 },
    /// `from` moved by `by` along a random unit direction.
    Shift { from: Box<StateSpec>, by: f64, seed: u64 },
}

impl Default for StateSpec {
    fn default() -> Self {
        StateSpec::Zero
    }
}

fn unit_direction(model: &Model, seed: u64) -> Vec<f64> {
    let (w, r) = (model.weights(), model.metric_exponent());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let d: Vec<f64> = (0..model.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = weighted_norm_sq(w, &d, r).sqrt();
        if n > 0.0 {
            return d.iter().map(|v| v / n).collect();
        }
    }
}

impl StateSpec {
    pub fn resolve(&self, model: &Model) -> Result<Vec<f64>> {
        let n = model.dim();
        Ok(match self {
            StateSpec::Zero => vec![0.0; n],
            StateSpec::Coords(x) if x.len() == n => x.clone(),
            StateSpec::Coords(x) => return Err(Error::Layout(format!("state with {} coordinates for a {n}-dimensional model", x.len()))),
            StateSpec::Random { norm, seed } => unit_direction(model, *seed).iter().map(|v| v * norm).collect(),
            StateSpec::Mode { index, amplitude } if *index < n => {
                let mut x = vec![0.0; n];
                x[*index] = *amplitude;
                x
            }
            StateSpec::Mode { index, .. } => return Err(Error::Layout(format!("coordinate {index} of {n}"))),
            StateSpec::Shift { from, by, seed } => {
                let base = from.resolve(model)?;
                base.iter().zip(unit_direction(model, *seed)).map(|(b, d)| b + by * d).collect()
            }
        })
    }
}

fn zero_list() -> Vec<StateSpec> {
    vec![StateSpec::Zero]
}
fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    #[serde(default)]
    x0: StateSpec,
    /// Number of paths written to the trajectory CSV.
    #[serde(default = "four")]
    write: usize,
    #[serde(default)]
    budget: BudgetPatch,
}
fn four() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailParams {
    kappa: f64,
    r_grid: Vec<f64>,
    #[serde(default = "tail_horizon")]
    horizon: f64,
    #[serde(default = "tail_dt")]
    dt: f64,
    #[serde(default)]
    paths: Option<usize>,
}
fn tail_horizon() -> f64 {
    20.0
}
fn tail_dt() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoupleParams {
    x: StateSpec,
    y: StateSpec,
    #[serde(default)]
    gain: Option<f64>,
    #[serde(default = "one")]
    p: f64,
    #[serde(default = "collapse_threshold")]
    threshold: f64,
    #[serde(default = "min_fraction")]
    min_fraction: f64,
    #[serde(default = "one")]
    delta: f64,
    #[serde(default)]
    budget: BudgetPatch,
}
fn collapse_threshold() -> f64 {
    1e-3
}
fn min_fraction() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovParams {
    #[serde(default = "zero_list")]
    x0s: Vec<StateSpec>,
    #[serde(default)]
    level: Option<f64>,
    #[serde(default)]
    budget: BudgetPatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuityParams {
    #[serde(default)]
    z: StateSpec,
    #[serde(default = "default_radii")]
    radii: Vec<f64>,
    #[serde(default = "two")]
    directions: usize,
    #[serde(default = "dictionary_size")]
    dictionary: usize,
    #[serde(default = "one")]
    lipschitz: f64,
    /// Defaults to half the horizon.
    #[serde(default)]
    t_tail: Option<f64>,
    #[serde(default)]
    budget: BudgetPatch,
}
fn default_radii() -> Vec<f64> {
    vec![1.0, 0.5, 0.25, 0.1, 0.0]
}
fn two() -> usize {
    2
}
fn dictionary_size() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerBoundParams {
    #[serde(default)]
    z: StateSpec,
    eps: f64,
    #[serde(default = "zero_list")]
    x0s: Vec<StateSpec>,
    #[serde(default)]
    t_tail: Option<f64>,
    #[serde(default)]
    budget: BudgetPatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrreducibilityParams {
    #[serde(default)]
    z: StateSpec,
    eps: f64,
    /// Energy level `R` of the starting set `{V <= R}`.
    r: f64,
    #[serde(default = "eight")]
    starts: usize,
    /// Defaults to `log(2 (R + 1) / eps) / rate`.
    #[serde(default)]
    t: Option<f64>,
    #[serde(default)]
    budget: BudgetPatch,
}
fn eight() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityParams {
    x: StateSpec,
    y: StateSpec,
    #[serde(default = "dictionary_size")]
    dictionary: usize,
    #[serde(default = "one")]
    lipschitz: f64,
    #[serde(default = "stability_floor")]
    floor: f64,
    #[serde(default)]
    budget: BudgetPatch,
}
fn stability_floor() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositionParams {
    r: f64,
    /// Defaults to the horizon.
    #[serde(default)]
    t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsistencyParams {
    #[serde(default = "battery_size")]
    count: usize,
    #[serde(default = "yes")]
    edge_chains: bool,
}
fn battery_size() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionBatteryParams {
    #[serde(default = "hundred")]
    count: usize,
    #[serde(default = "yes")]
    hand_example: bool,
}
fn hundred() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LbcBatteryParams {
    /// Contraction of `h(t) = rho^t`.
    #[serde(default = "rho")]
    rho: f64,
    #[serde(default = "half")]
    eps: f64,
    #[serde(default = "t_check")]
    t_check: usize,
}
fn rho() -> f64 {
    0.9
}
fn half() -> f64 {
    0.5
}
fn t_check() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    #[serde(default = "half")]
    contraction: f64,
    #[serde(default = "one")]
    noise: f64,
    #[serde(default = "four_f")]
    half_width: f64,
    #[serde(default = "cells")]
    cells: usize,
    #[serde(default = "fine_cells")]
    refine: usize,
    #[serde(default = "tv_tolerance")]
    tv_tolerance: f64,
}
fn four_f() -> f64 {
    4.0
}
fn cells() -> usize {
    64
}
fn fine_cells() -> usize {
    128
}
fn tv_tolerance() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq)]
pub(super) enum Params {
    Simulate(SimulateParams),
    Tail(TailParams),
    Hypotheses,
    CouplingDecay(CoupleParams),
    CouplingCollapse(CoupleParams),
    TvSurrogate(CoupleParams),
    Lyapunov(LyapunovParams),
    Continuity(ContinuityParams),
    LowerBound(LowerBoundParams),
    Irreducibility(IrreducibilityParams),
    Stability(StabilityParams),
    Composition(CompositionParams),
    Consistency(ConsistencyParams),
    Decomposition(DecompositionBatteryParams),
    LbcExact(LbcBatteryParams),
    Grid(GridParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

fn parse<T: DeserializeOwned>(name: &str, v: &Value) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("probe `{name}`: {e}")))
}

impl Params {
    fn parse(name: &str, v: &Value) -> Result<Params> {
        Ok(match name {
            "simulate" => Params::Simulate(parse(name, v)?),
            "martingale_tail" => Params::Tail(parse(name, v)?),
            "hypotheses" => {
                parse::<NoParams>(name, v)?;
                Params::Hypotheses
            }
            "coupling_decay" => Params::CouplingDecay(parse(name, v)?),
            "coupling_collapse" => Params::CouplingCollapse(parse(name, v)?),
            "tv_surrogate" => Params::TvSurrogate(parse(name, v)?),
            "lyapunov" => Params::Lyapunov(parse(name, v)?),
            "eventual_continuity" => Params::Continuity(parse(name, v)?),
            "condition_c" => Params::LowerBound(parse(name, v)?),
            "irreducibility" => Params::Irreducibility(parse(name, v)?),
            "stability" => Params::Stability(parse(name, v)?),
            "lbc_composition" => Params::Composition(parse(name, v)?),
            "chain_consistency" => Params::Consistency(parse(name, v)?),
            "measure_decomposition" => Params::Decomposition(parse(name, v)?),
            "prop_lbc_exact" => Params::LbcExact(parse(name, v)?),
            "grid_kernel" => Params::Grid(parse(name, v)?),
            other => return Err(Error::UnknownProbe(other.into())),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(super) struct Step {
    pub info: &'static ProbeInfo,
    pub asserted: bool,
    pub seed: u64,
    pub params: Params,
}

impl Step {
    pub fn needs_model(&self) -> bool {
        self.info.model
    }
}

/// Validates every probe entry before anything runs.
pub(super) fn plan(cfg: &CampaignConfig, has_model: bool) -> Result<Vec<Step>> {
    cfg.probes
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let info = info(&e.probe)?;
            if !info.kinds.contains(&cfg.kind) {
                return Err(Error::Config(format!("probe `{}` is not available in a {:?} campaign", info.name, cfg.kind)));
            }
            if info.model && !has_model {
                return Err(Error::Config(format!("probe `{}` needs a model", info.name)));
            }
            Ok(Step {
                info,
                asserted: e.assert.unwrap_or(info.asserted),
                seed: e.seed.unwrap_or(cfg.seed.wrapping_add(i as u64)),
                params: Params::parse(info.name, &e.params)?,
            })
        })
        .collect()
}

pub(super) struct Outcome {
    pub verdict: VerdictReport,
    pub detail: Value,
    /// Extra artifacts: file-name suffix and contents.
    pub extra: Vec<(String, Vec<u8>)>,
}

impl Outcome {
    fn new(verdict: VerdictReport, detail: impl Serialize) -> Result<Self> {
        Ok(Outcome { verdict, detail: serde_json::to_value(detail)?, extra: Vec::new() })
    }
}

/// Campaign state: the model, the shared budget and the reports later
/// probes compose.
pub(super) struct Context {
    model: Option<Model>,
    budget: Budget,
    digest: String,
    lyapunov: Option<LyapunovReport>,
    irreducibility: Option<IrreducibilityReport>,
    lower_bound: Option<LowerBoundReport>,
}

impl Context {
    pub fn new(model: Option<Model>, budget: Budget, digest: &str) -> Self {
        Context { model, budget, digest: digest.into(), lyapunov: None, irreducibility: None, lower_bound: None }
    }

    fn model(&self) -> Result<&Model> {
        self.model.as_ref().ok_or_else(|| Error::Config("probe needs a model".into()))
    }

    fn sampling(&self, patch: &BudgetPatch, seed: u64) -> Sampling {
        let b = self.budget.patched(patch);
        Sampling { horizon: b.horizon, dt: b.dt, stride: b.stride, paths: b.paths, seed }
    }

    fn states(&self, specs: &[StateSpec]) -> Result<Vec<Vec<f64>>> {
        let m = self.model()?;
        specs.iter().map(|s| s.resolve(m)).collect()
    }

    pub fn run(&mut self, step: &Step) -> Result<Outcome> {
        let mut out = self.dispatch(step)?;
        out.verdict.config_digest = self.digest.clone();
        Ok(out)
    }

    fn dispatch(&mut self, step: &Step) -> Result<Outcome> {
        let seed = step.seed;
        match &step.params {
            Params::Simulate(p) => self.simulate(p, seed),
            Params::Tail(p) => {
                let rep = martingale_tail_probe(p.kappa, &p.r_grid, p.paths.unwrap_or(self.budget.paths), p.horizon, p.dt, seed)?;
                let worst = rep.rows.iter().map(|r| r.estimate / r.bound).fold(0.0, f64::max);
                let curve = rep.rows.iter().map(|r| CurvePoint { x: r.r, t: rep.horizon, value: r.estimate, lo: r.lo, hi: r.hi }).collect();
                let v = VerdictReport::new("martingale_tail", step.info.paper_ref, worst, [worst, worst], rep.passed())
                    .with_curve(curve)
                    .flag(rep.horizon_warning, "supremum still growing near the horizon");
                Outcome::new(v, &rep)
            }
            Params::Hypotheses => {
                let m = self.model()?;
                let holds = m.hypotheses_hold()?;
                let v = VerdictReport::new("hypotheses", step.info.paper_ref, if holds { 1.0 } else { 0.0 }, [0.0, 1.0], holds);
                Outcome::new(v, json!({ "model": m.kind(), "rank": m.rank(), "level": m.level(), "holds": holds }))
            }
            Params::CouplingDecay(p) => {
                let ens = self.couple(p, seed)?;
                let rep = weighted_decay_check(&ens, p.p)?;
                let last = rep.rows.last().ok_or_else(|| Error::Config("no output times".into()))?;
                let curve = rep.rows.iter().map(|r| CurvePoint { x: rep.bound, t: r.t, value: r.mean, lo: r.mean - 3.0 * r.se, hi: r.mean + 3.0 * r.se }).collect();
                let v = VerdictReport::new("coupling_decay", step.info.paper_ref, last.mean, [last.mean - 3.0 * last.se, last.mean + 3.0 * last.se], rep.passed)
                    .with_curve(curve)
                    .flag(rep.flag.is_some(), "out of hypothesis range");
                Outcome::new(v, &rep)
            }
            Params::CouplingCollapse(p) => {
                let ens = self.couple(p, seed)?;
                let rep = coupling_collapse_stats(&ens, p.threshold)?;
                let n = ens.paths.len();
                let hits = (rep.fraction_below * n as f64).round() as usize;
                let (lo, hi) = wilson(hits, n, Z95);
                let curve = (0..rep.times.len())
                    .map(|i| CurvePoint { x: 0.5, t: rep.times[i], value: rep.median[i], lo: rep.quantiles[0][i], hi: rep.quantiles[4][i] })
                    .collect();
                let v = VerdictReport::new("coupling_collapse", step.info.paper_ref, rep.fraction_below, [lo, hi], rep.fraction_below >= p.min_fraction)
                    .with_curve(curve)
                    .flag(rep.flag.is_some(), "out of hypothesis range");
                Outcome::new(v, &rep)
            }
            Params::TvSurrogate(p) => {
                let ens = self.couple(p, seed)?;
                let rep = tv_surrogate(&ens, p.delta)?;
                let v = VerdictReport::new("tv_surrogate", step.info.paper_ref, rep.pinsker, [rep.pinsker_lo, rep.pinsker_hi], true)
                    .flag(rep.pinsker >= 1.0, "Pinsker bound is vacuous");
                Outcome::new(v, &rep)
            }
            Params::Lyapunov(p) => {
                let x0s = self.states(&p.x0s)?;
                let rep = lyapunov_verify(self.model()?, &x0s, &self.sampling(&p.budget, seed), p.level)?;
                let out = Outcome::new(rep.verdict(), &rep)?;
                self.lyapunov = Some(rep);
                Ok(out)
            }
            Params::Continuity(p) => {
                let m = self.model()?;
                let s = self.sampling(&p.budget, seed);
                let z = p.z.resolve(m)?;
                let dirs: Vec<Vec<f64>> = (0..p.directions as u64).map(|k| unit_direction(m, seed.wrapping_add(1 + k))).collect();
                let dict = TestFunctionDictionary::new(m.weights(), m.metric_exponent(), p.dictionary, p.lipschitz, seed)?;
                let rep = eventual_continuity_probe(m, &z, &p.radii, &dirs, &dict, p.t_tail.unwrap_or(0.5 * s.horizon), &s)?;
                Outcome::new(rep.verdict(), &rep)
            }
            Params::LowerBound(p) => {
                let m = self.model()?;
                let s = self.sampling(&p.budget, seed);
                let x0s = self.states(&p.x0s)?;
                let rep = lower_bound_probe(m, &p.z.resolve(m)?, p.eps, &x0s, p.t_tail.unwrap_or(0.5 * s.horizon), &s)?;
                let out = Outcome::new(rep.verdict(), &rep)?;
                self.lower_bound = Some(rep);
                Ok(out)
            }
            Params::Irreducibility(p) => {
                let m = self.model()?;
                let form = m.lyapunov();
                let t = p.t.unwrap_or_else(|| irreducibility_time(p.r, p.eps, form.rate));
                let mut s = self.sampling(&p.budget, seed);
                s.horizon = t;
                let x0s = energy_ball_samples(m.weights(), form.exponent, p.r, p.starts, seed);
                let rep = uniform_irreducibility_probe(m, &p.z.resolve(m)?, p.eps, &x0s, t, &s)?;
                let out = Outcome::new(rep.verdict(), &rep)?;
                self.irreducibility = Some(rep);
                Ok(out)
            }
            Params::Stability(p) => {
                let m = self.model()?;
                let dict = TestFunctionDictionary::new(m.weights(), m.metric_exponent(), p.dictionary, p.lipschitz, seed)?;
                let rep = stability_distance(m, &p.x.resolve(m)?, &p.y.resolve(m)?, &dict, p.floor, &self.sampling(&p.budget, seed))?;
                Outcome::new(rep.verdict(), &rep)
            }
            Params::Composition(p) => {
                let rep = prop_lbc_composition(self.lyapunov.as_ref(), self.irreducibility.as_ref(), self.lower_bound.as_ref(), p.r, p.t.unwrap_or(self.budget.horizon))?;
                Outcome::new(rep.verdict(), &rep)
            }
            Params::Consistency(p) => {
                let mut battery = if p.edge_chains { edge_chains() } else { Vec::new() };
                battery.extend(random_battery(p.count, seed));
                let rep = theorem4_consistency(&battery)?;
                let mut lines = Vec::new();
                rep.write_jsonl(&mut lines)?;
                let v = VerdictReport::new("chain_consistency", step.info.paper_ref, rep.violations.len() as f64, [0.0, 0.0], rep.passed);
                let detail = json!({ "chains": rep.chains, "stable": rep.stable, "condition_c": rep.condition_c, "violations": rep.violations, "passed": rep.passed });
                let mut out = Outcome::new(v, detail)?;
                if !lines.is_empty() {
                    out.extra.push(("chains.jsonl".into(), lines));
                }
                Ok(out)
            }
            Params::Decomposition(p) => decomposition(p, seed, step.info.paper_ref),
            Params::LbcExact(p) => lbc_battery(p, step.info.paper_ref),
            Params::Grid(p) => grid(p, step.info.paper_ref),
        }
    }

    fn simulate(&self, p: &SimulateParams, seed: u64) -> Result<Outcome> {
        let m = self.model()?;
        let s = self.sampling(&p.budget, seed);
        let grid = s.grid()?;
        let x0 = p.x0.resolve(m)?;
        let spec = RecordSpec { stride: s.stride, norms: vec![m.metric_exponent()], integral: None, keep_states: false };
        let dim = m.dim();
        let paths = ensemble(s.paths, |i| integrate(m, &x0, &grid, &NoiseStream::new(seed, i as u64, dim), &spec))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let times = paths[0].times.clone();
        let col = 2;
        let curve: Vec<CurvePoint> = (0..times.len())
            .map(|i| {
                let sq: Vec<f64> = paths.iter().map(|tr| tr.functionals[i][col].powi(2)).collect();
                let (mean, se) = mean_se(&sq);
                let se = if se.is_nan() { 0.0 } else { se };
                CurvePoint { x: m.metric_exponent(), t: times[i], value: mean, lo: mean - 3.0 * se, hi: mean + 3.0 * se }
            })
            .collect();
        let last = *curve.last().expect("at least one record");
        let mut csv = Vec::new();
        write_ensemble_csv(&mut csv, &paths[..p.write.min(paths.len())])?;
        let v = VerdictReport::new("simulate", "exponential Euler for du = (-A u + N(u)) dt + sigma(u) dW", last.value, [last.lo, last.hi], true).with_curve(curve);
        let detail = json!({ "model": m.kind(), "paths": s.paths, "horizon": grid.t1(), "dt": grid.dt, "final_mean_energy": last.value });
        let mut out = Outcome::new(v, detail)?;
        out.extra.push(("paths.csv".into(), csv));
        Ok(out)
    }

    fn couple(&self, p: &CoupleParams, seed: u64) -> Result<CoupledEnsemble> {
        let m = self.model()?;
        let s = self.sampling(&p.budget, seed);
        let control = ControlSpec::for_model(m, p.gain);
        let opts = CoupledOptions { paths: s.paths, seed, stride: s.stride, weight: None, girsanov: true };
        run_coupled(m, &control, &p.x.resolve(m)?, &p.y.resolve(m)?, &s.grid()?, &opts)
    }
}

fn decomposition(p: &DecompositionBatteryParams, seed: u64, paper_ref: &str) -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut support = true;
    let mut probability = true;
    let mut rows = Vec::new();
    for (i, (chain, params)) in decomposition_battery(p.count, seed).iter().enumerate() {
        let tr = measure_decomposition(chain, params)?;
        worst = worst.max(tr.reconstruction_error);
        support &= tr.support_ok;
        probability &= tr.probability_ok;
        rows.push(json!({ "index": i, "states": chain.len(), "k": params.k, "alpha": params.alpha, "times": tr.times, "error": tr.reconstruction_error }));
    }
    let mut hand = Value::Null;
    let mut hand_ok = true;
    if p.hand_example {
        let chain = FiniteChain::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]])?;
        let params = DecompositionParams { x1: 0, x2: 1, z: 0, delta: 0.5, alpha: 0.4, k: 1, metric: MetricChoice::D, horizon: 10, f_sup: None, eps: None };
        let tr = measure_decomposition_exact(&chain, &params)?;
        let mu: Vec<String> = tr.mu[0][0].iter().map(|r| r.to_string()).collect();
        hand_ok = mu == ["1/6", "5/6"] && tr.reconstruction_error == 0.0;
        hand = json!({ "mu1": mu, "exact": hand_ok });
    }
    let pass = worst <= 1e-12 && support && probability && hand_ok;
    let v = VerdictReport::new("measure_decomposition", paper_ref, worst, [0.0, worst], pass)
        .flag(!support, "a nu_i leaves the ball")
        .flag(!hand_ok, "hand example is not exact");
    Outcome::new(v, json!({ "chains": rows.len(), "max_error": worst, "support_ok": support, "probability_ok": probability, "hand_example": hand, "rows": rows }))
}

fn lbc_battery(p: &LbcBatteryParams, paper_ref: &str) -> Result<Outcome> {
    let mut rows = Vec::new();
    let mut failures = 0;
    let mut min_slack = f64::INFINITY;
    for (n, up, down) in birth_death_battery() {
        let chain = birth_death(n, up, down)?;
        let v: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let h = |t: usize| p.rho.powi(t as i32);
        let c = fit_lyapunov_constant(&chain, &v, &h, p.t_check);
        let r = (2.0 * c).max(1.0);
        let rep = prop_lbc_exact(&chain, &v, &h, c, 0, p.eps, r, n, p.t_check)?;
        let slack = rep.direct.value - rep.bound;
        min_slack = min_slack.min(slack);
        if rep.outcome == LbcOutcome::ConclusionFails || slack < -1e-12 {
            failures += 1;
        }
        rows.push(json!({ "n": n, "up": up, "down": down, "c": c, "r": r, "outcome": rep.outcome, "p": rep.p, "bound": rep.bound, "direct": rep.direct.value }));
    }
    let v = VerdictReport::new("prop_lbc_exact", paper_ref, min_slack, [min_slack, min_slack], failures == 0);
    Outcome::new(v, json!({ "runs": rows.len(), "failures": failures, "min_slack": min_slack, "rows": rows }))
}

fn grid(p: &GridParams, paper_ref: &str) -> Result<Outcome> {
    let spec = KernelSpec { contraction: p.contraction, noise: p.noise, half_width: p.half_width };
    let chain = grid_kernel_lab(&spec, p.cells)?;
    let stable = asymptotic_stability_exact(&chain).stable;
    let z = p.cells / 2;
    let offsets: Vec<usize> = [1usize, 2, 4, 8, 16].into_iter().filter(|k| z + k < p.cells).collect();
    let mut curve = Vec::new();
    let mut agree = true;
    let mut detail = serde_json::Map::new();
    for (label, which) in [("rho", MetricChoice::Rho), ("d", MetricChoice::D)] {
        let eps = chain.metric(which)[(z, z + 1)];
        let c = condition_c_exact(&chain, z, eps, which)?;
        agree &= stable == (c.value > 0.0);
        let prof = continuity_profile(&chain, z, &offsets, (p.cells / 2, p.cells), which)?;
        curve.extend(prof.iter().map(|r| CurvePoint { x: r.distance, t: p.cells as f64, value: r.value, lo: r.value, hi: r.value }));
        detail.insert(label.into(), json!({ "condition_c": c.value, "profile": prof }));
    }
    let tv = refinement_tv(&spec, p.cells, p.refine)?;
    let pass = agree && tv <= p.tv_tolerance;
    detail.insert("stable".into(), json!(stable));
    detail.insert("refinement_tv".into(), json!(tv));
    let v = VerdictReport::new("grid_kernel", paper_ref, tv, [tv, tv], pass)
        .with_curve(curve)
        .flag(!agree, "stability and condition (C) disagree")
        .flag(tv > p.tv_tolerance, "invariant law not converged under refinement");
    Outcome::new(v, Value::Object(detail))
}

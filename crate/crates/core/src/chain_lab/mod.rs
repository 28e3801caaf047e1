//! Exact finite-state oracle: invariant measures, tail hitting
//! probabilities, condition (C), asymptotic stability and their
//! equivalence, the measure-decomposition recursion, and the
//! Lyapunov + irreducibility implication.
//!
//! On a finite metric space every ball shrinks to a single state, so
//! eventual continuity holds vacuously; [`grid_kernel_lab`] supplies the
//! non-vacuous proxy (a discretized continuous kernel).

mod decomposition;
mod grid;
mod lbc;

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use decomposition::{decimal_rational, decomposition_battery, measure_decomposition, measure_decomposition_exact, DecompositionParams, DecompositionTrace};
pub use grid::{continuity_profile, grid_kernel_lab, refinement_tv, KernelSpec, ProfileRow};
pub use lbc::{birth_death, birth_death_battery, fit_lyapunov_constant, prop_lbc_exact, LbcExactReport, LbcOutcome};

use crate::error::{Error, Result};

/// Row sums and invariance residuals must be within this.
pub const ROW_TOL: f64 = 1e-12;
/// Power iterations (counted as matrix-power exponent) before giving up.
pub const ITERATION_CAP: usize = 1_000_000;
pub const CONVERGENCE_TOL: f64 = 1e-12;

/// Which of the chain's two metrics a ball is taken in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricChoice {
    Rho,
    D,
}

/// A communicating class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainClass {
    pub states: Vec<usize>,
    pub closed: bool,
    pub period: usize,
}

/// Row-stochastic matrix on a finite metric space with two metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteChain {
    pub states: Vec<Vec<f64>>,
    pub p: DMatrix<f64>,
    pub rho: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub classes: Vec<ChainClass>,
}

fn euclidean(states: &[Vec<f64>]) -> DMatrix<f64> {
    let n = states.len();
    DMatrix::from_fn(n, n, |i, j| states[i].iter().zip(&states[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

fn to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidChain("matrix is not square".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

impl FiniteChain {
    /// States on the integer line `0, 1, ..., n-1`, both metrics `|i - j|`.
    pub fn from_rows(p: Vec<Vec<f64>>) -> Result<Self> {
        let states = (0..p.len()).map(|i| vec![i as f64]).collect();
        Self::new(states, p)
    }

    /// Euclidean metric on the coordinates, `d = rho`.
    pub fn new(states: Vec<Vec<f64>>, p: Vec<Vec<f64>>) -> Result<Self> {
        let rho = euclidean(&states);
        Self::with_metrics(states, to_matrix(&p)?, rho.clone(), rho)
    }

    pub fn with_metrics(states: Vec<Vec<f64>>, p: DMatrix<f64>, rho: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = p.nrows();
        if n == 0 || p.ncols() != n || states.len() != n {
            return Err(Error::InvalidChain(format!("{} states for a {}x{} matrix", states.len(), n, p.ncols())));
        }
        for i in 0..n {
            let row = p.row(i);
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidChain(format!("row {i} has a negative or non-finite entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_TOL {
                return Err(Error::InvalidChain(format!("row {i} sums to {s}")));
            }
        }
        for (name, m) in [("rho", &rho), ("d", &d)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::InvalidChain(format!("metric {name} has the wrong shape")));
            }
            for i in 0..n {
                for j in 0..n {
                    let v = m[(i, j)];
                    if v != m[(j, i)] || (v == 0.0) != (i == j) || !(v >= 0.0) {
                        return Err(Error::InvalidChain(format!("metric {name} fails at ({i}, {j})")));
                    }
                }
            }
        }
        let classes = structure(&p);
        Ok(FiniteChain { states, p, rho, d, classes })
    }

    pub fn len(&self) -> usize {
        self.p.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn metric(&self, which: MetricChoice) -> &DMatrix<f64> {
        match which {
            MetricChoice::Rho => &self.rho,
            MetricChoice::D => &self.d,
        }
    }

    /// Open ball `{j : metric(z, j) < eps}`.
    pub fn ball(&self, z: usize, eps: f64, which: MetricChoice) -> Vec<usize> {
        let m = self.metric(which);
        (0..self.len()).filter(|&j| m[(z, j)] < eps).collect()
    }

    pub fn closed_classes(&self) -> impl Iterator<Item = &ChainClass> {
        self.classes.iter().filter(|c| c.closed)
    }

    /// Least common multiple of the closed classes' periods.
    pub fn period(&self) -> usize {
        self.closed_classes().map(|c| c.period).fold(1, lcm)
    }

    pub fn power(&self, n: usize) -> DMatrix<f64> {
        matrix_power(&self.p, n)
    }

    pub fn to_file(&self) -> ChainFile {
        let rows = |m: &DMatrix<f64>| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect::<Vec<Vec<f64>>>();
        let euclid = euclidean(&self.states);
        let spec = |m: &DMatrix<f64>| if *m == euclid { MetricSpec::Named("euclidean".into()) } else { MetricSpec::Matrix(rows(m)) };
        ChainFile {
            states: self.states.clone(),
            metric: spec(&self.rho),
            p: rows(&self.p),
            d_metric: if self.d == self.rho { None } else { Some(spec(&self.d)) },
        }
    }

    pub fn from_file(f: &ChainFile) -> Result<Self> {
        let resolve = |m: &MetricSpec| -> Result<DMatrix<f64>> {
            match m {
                MetricSpec::Named(s) if s == "euclidean" => Ok(euclidean(&f.states)),
                MetricSpec::Named(s) => Err(Error::InvalidChain(format!("unknown metric {s:?}"))),
                MetricSpec::Matrix(rows) => to_matrix(rows),
            }
        };
        let rho = resolve(&f.metric)?;
        let d = match &f.d_metric {
            Some(m) => resolve(m)?,
            None => rho.clone(),
        };
        Self::with_metrics(f.states.clone(), to_matrix(&f.p)?, rho, d)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(&serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricSpec {
    Named(String),
    Matrix(Vec<Vec<f64>>),
}

/// Wire form `{states, metric, P}` (plus an optional second metric).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainFile {
    pub states: Vec<Vec<f64>>,
    pub metric: MetricSpec,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_metric: Option<MetricSpec>,
}

/// Communicating classes (strongly connected components of the positive
/// entries), closedness and periods.
fn structure(p: &DMatrix<f64>) -> Vec<ChainClass> {
    let n = p.nrows();
    let mut g = DiGraph::<usize, ()>::with_capacity(n, n * n);
    let nodes: Vec<_> = (0..n).map(|i| g.add_node(i)).collect();
    for i in 0..n {
        for j in 0..n {
            if p[(i, j)] > 0.0 {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut classes: Vec<ChainClass> = tarjan_scc(&g)
        .into_iter()
        .map(|comp| {
            let mut states: Vec<usize> = comp.iter().map(|&v| g[v]).collect();
            states.sort_unstable();
            let inside = |j: usize| states.binary_search(&j).is_ok();
            let closed = states.iter().all(|&i| (0..n).all(|j| p[(i, j)] == 0.0 || inside(j)));
            let period = class_period(p, &states);
            ChainClass { states, closed, period }
        })
        .collect();
    classes.sort_by_key(|c| c.states[0]);
    classes
}

/// gcd of `level(i) + 1 - level(j)` over edges `i -> j` inside the class,
/// with BFS levels from its first state. A single state without a
/// self-loop is transient and gets period 1 by convention.
fn class_period(p: &DMatrix<f64>, states: &[usize]) -> usize {
    let n = p.nrows();
    let inside = |j: usize| states.binary_search(&j).is_ok();
    let mut level = vec![usize::MAX; n];
    level[states[0]] = 0;
    let mut queue = std::collections::VecDeque::from([states[0]]);
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if p[(i, j)] > 0.0 && inside(j) && level[j] == usize::MAX {
                level[j] = level[i] + 1;
                queue.push_back(j);
            }
        }
    }
    let mut g = 0;
    for &i in states {
        for &j in states {
            if p[(i, j)] > 0.0 {
                g = gcd(g, (level[i] + 1).abs_diff(level[j]));
            }
        }
    }
    g.max(1)
}

pub fn matrix_power(p: &DMatrix<f64>, mut n: usize) -> DMatrix<f64> {
    let mut result = DMatrix::identity(p.nrows(), p.ncols());
    let mut base = p.clone();
    while n > 0 {
        if n & 1 == 1 {
            result = &result * &base;
        }
        n >>= 1;
        if n > 0 {
            base = &base * &base;
        }
    }
    result
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `lim_n Q^n` by repeated squaring: stops when successive iterates of the
/// doubling sequence differ by less than [`CONVERGENCE_TOL`]; the exponent
/// never exceeds [`ITERATION_CAP`] by more than a factor two.
pub fn power_limit(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut cur = q.clone();
    let mut exponent = 1usize;
    loop {
        let next = &cur * &cur;
        let change = max_abs_diff(&next, &cur);
        if change < CONVERGENCE_TOL {
            return Ok(next);
        }
        if exponent >= ITERATION_CAP {
            return Err(Error::NonConvergence { iterations: exponent, change });
        }
        cur = next;
        exponent *= 2;
    }
}

/// `L_r = lim_n P^{r + n d}` for `r = 0..d`, `d` the chain period.
pub fn residue_limits(chain: &FiniteChain) -> Result<Vec<DMatrix<f64>>> {
    let d = chain.period();
    let q = power_limit(&chain.power(d))?;
    let mut out = Vec::with_capacity(d);
    let mut pr = DMatrix::identity(chain.len(), chain.len());
    for _ in 0..d {
        out.push(&pr * &q);
        pr = &pr * &chain.p;
    }
    Ok(out)
}

/// One extreme invariant measure per closed class, by a linear solve of
/// `pi (P_CC - I) = 0`, `sum pi = 1` on the class.
pub fn invariant_measures(chain: &FiniteChain) -> Vec<DVector<f64>> {
    let n = chain.len();
    chain
        .closed_classes()
        .map(|c| {
            let m = c.states.len();
            let mut a = DMatrix::from_fn(m, m, |i, j| chain.p[(c.states[j], c.states[i])] - if i == j { 1.0 } else { 0.0 });
            let mut b = DVector::zeros(m);
            for j in 0..m {
                a[(m - 1, j)] = 1.0;
            }
            b[m - 1] = 1.0;
            let sol = a.lu().solve(&b).expect("a closed class has a unique invariant measure");
            let mut pi = DVector::zeros(n);
            for (k, &s) in c.states.iter().enumerate() {
                pi[s] = sol[k].max(0.0);
            }
            let total = pi.sum();
            pi / total
        })
        .collect()
}

/// `max_j |(pi P)_j - pi_j|`.
pub fn invariance_residual(chain: &FiniteChain, pi: &DVector<f64>) -> f64 {
    let next = chain.p.transpose() * pi;
    (next - pi).amax()
}

/// `liminf_n P^n(x, ball)`: the minimum over residues of the limits along
/// each residue class modulo the period.
pub fn liminf_hitting(chain: &FiniteChain, x: usize, ball: &[usize]) -> Result<f64> {
    if ball.is_empty() {
        return Err(Error::InvalidChain("empty ball".into()));
    }
    let limits = residue_limits(chain)?;
    Ok(min_mass(&limits, x, ball))
}

fn min_mass(limits: &[DMatrix<f64>], x: usize, ball: &[usize]) -> f64 {
    limits.iter().map(|l| ball.iter().map(|&j| l[(x, j)]).sum::<f64>()).fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionC {
    pub value: f64,
    pub witness: usize,
}

/// `inf_x liminf_n P^n(x, B(z, eps))` over every state, with the minimizer.
pub fn condition_c_exact(chain: &FiniteChain, z: usize, eps: f64, which: MetricChoice) -> Result<ConditionC> {
    if !(eps > 0.0) {
        return Err(Error::InvalidChain(format!("eps = {eps}")));
    }
    let ball = chain.ball(z, eps, which);
    let limits = residue_limits(chain)?;
    Ok(condition_c_from(&limits, chain.len(), &ball))
}

fn condition_c_from(limits: &[DMatrix<f64>], n: usize, ball: &[usize]) -> ConditionC {
    let mut best = ConditionC { value: f64::INFINITY, witness: 0 };
    for x in 0..n {
        let v = min_mass(limits, x, ball);
        if v < best.value {
            best = ConditionC { value: v, witness: x };
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    pub stable: bool,
    pub mu: Option<Vec<f64>>,
}

/// Stable iff `P^n -> 1 pi^T`: one closed class, aperiodic, and the power
/// limit is rank one to [`CONVERGENCE_TOL`].
pub fn asymptotic_stability_exact(chain: &FiniteChain) -> Stability {
    let closed: Vec<&ChainClass> = chain.closed_classes().collect();
    if closed.len() != 1 || closed[0].period != 1 {
        return Stability { stable: false, mu: None };
    }
    let Ok(limit) = power_limit(&chain.p) else {
        return Stability { stable: false, mu: None };
    };
    let first = limit.row(0).clone_owned();
    let rank_one = (1..chain.len()).all(|i| (limit.row(i) - &first).amax() < CONVERGENCE_TOL);
    if !rank_one {
        return Stability { stable: false, mu: None };
    }
    let pi = invariant_measures(chain).remove(0);
    Stability { stable: true, mu: Some(pi.iter().copied().collect()) }
}

/// One chain's verdicts on both sides of the equivalence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainVerdict {
    pub index: usize,
    pub states: usize,
    pub stable: bool,
    /// Best `z` and its condition-(C) value on the singleton ball.
    pub best_z: usize,
    pub condition_c: f64,
    pub consistent: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub chains: usize,
    pub stable: usize,
    pub condition_c: usize,
    pub violations: Vec<ChainVerdict>,
    pub verdicts: Vec<ChainVerdict>,
    pub passed: bool,
}

impl ConsistencyReport {
    /// JSONL, one verdict per chain.
    pub fn write_jsonl(&self, w: &mut impl std::io::Write) -> Result<()> {
        for v in &self.verdicts {
            serde_json::to_writer(&mut *w, v)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Condition (C) for every `eps > 0` reduces on a finite space to the
/// smallest ball, the singleton `{z}`; this returns the best `z`.
pub fn condition_c_any_z(chain: &FiniteChain) -> Result<ConditionC> {
    let limits = residue_limits(chain)?;
    let mut best = ConditionC { value: f64::NEG_INFINITY, witness: 0 };
    for z in 0..chain.len() {
        let v = condition_c_from(&limits, chain.len(), &[z]).value;
        if v > best.value {
            best = ConditionC { value: v, witness: z };
        }
    }
    Ok(best)
}

/// Checks `stable <=> exists z with condition (C) > 0` on every chain. On a
/// finite space eventual continuity holds vacuously, so this is the whole
/// equivalence.
pub fn theorem4_consistency(battery: &[FiniteChain]) -> Result<ConsistencyReport> {
    let verdicts: Vec<ChainVerdict> = battery
        .par_iter()
        .enumerate()
        .map(|(index, chain)| {
            let st = asymptotic_stability_exact(chain);
            let c = condition_c_any_z(chain)?;
            let holds = c.value > CONVERGENCE_TOL;
            let consistent = st.stable == holds;
            let note = if consistent {
                String::new()
            } else {
                format!("stable = {}, condition (C) = {:e} at z = {}, classes = {:?}", st.stable, c.value, c.witness, chain.classes)
            };
            Ok(ChainVerdict { index, states: chain.len(), stable: st.stable, best_z: c.witness, condition_c: c.value, consistent, note })
        })
        .collect::<Result<Vec<_>>>()?;
    let violations: Vec<ChainVerdict> = verdicts.iter().filter(|v| !v.consistent).cloned().collect();
    Ok(ConsistencyReport {
        chains: verdicts.len(),
        stable: verdicts.iter().filter(|v| v.stable).count(),
        condition_c: verdicts.iter().filter(|v| v.condition_c > CONVERGENCE_TOL).count(),
        passed: violations.is_empty(),
        violations,
        verdicts,
    })
}

/// The four edge chains: identity, 2-cycle, a positive 4-state chain and a
/// chain with two absorbing states.
pub fn edge_chains() -> Vec<FiniteChain> {
    vec![
        FiniteChain::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
        FiniteChain::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(),
        random_positive_chain(4, 7),
        FiniteChain::from_rows(vec![vec![1.0, 0.0, 0.0], vec![0.25, 0.5, 0.25], vec![0.0, 0.0, 1.0]]).unwrap(),
    ]
}

fn normalized(mut row: Vec<f64>) -> Vec<f64> {
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= s);
    // push the rounding residue into the largest entry
    let err = 1.0 - row.iter().sum::<f64>();
    let k = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
    row[k] += err;
    row
}

/// Strictly positive random stochastic matrix.
pub fn random_positive_chain(n: usize, seed: u64) -> FiniteChain {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n).map(|_| normalized((0..n).map(|_| rng.gen_range(0.05..1.0)).collect())).collect();
    FiniteChain::from_rows(rows).unwrap()
}

/// Random chain with structure: each entry is zero with probability
/// `sparsity`; every row keeps at least one positive entry.
pub fn random_chain(n: usize, sparsity: f64, seed: u64) -> FiniteChain {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| {
            let mut row: Vec<f64> = (0..n).map(|_| if rng.gen::<f64>() < sparsity { 0.0 } else { rng.gen_range(0.05..1.0) }).collect();
            if row.iter().all(|&v| v == 0.0) {
                row[rng.gen_range(0..n)] = 1.0;
            }
            normalized(row)
        })
        .collect();
    FiniteChain::from_rows(rows).unwrap()
}

/// Random permutation matrix blended with the identity: exercises periodic
/// and reducible structure.
pub fn random_cyclic_chain(n: usize, seed: u64) -> FiniteChain {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    let lazy = rng.gen_bool(0.3);
    let rows = (0..n)
        .map(|i| {
            let mut row = vec![0.0; n];
            row[perm[i]] += if lazy { 0.5 } else { 1.0 };
            if lazy {
                row[i] += 0.5;
            }
            row
        })
        .collect();
    FiniteChain::from_rows(rows).unwrap()
}

/// Seeded battery mixing dense, sparse and cyclic chains of 1 to 8 states.
pub fn random_battery(count: usize, seed: u64) -> Vec<FiniteChain> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(1..=8);
            let s = rng.gen::<u64>();
            match rng.gen_range(0..4) {
                0 => random_positive_chain(n, s),
                1 => random_cyclic_chain(n, s),
                _ => random_chain(n, rng.gen_range(0.3..0.85), s),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FiniteChain, MetricChoice};
use crate::error::{Error, Result};

/// Inputs of the decomposition: two starts, the `d`-ball `B_d(z, delta)`,
/// the mass level `alpha`, the depth `k`, the search horizon for each `t_i`
/// and, optionally, the stopping rule `2 (1 - alpha)^k sup|f| < eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionParams {
    pub x1: usize,
    pub x2: usize,
    pub z: usize,
    pub delta: f64,
    pub alpha: f64,
    pub k: usize,
    #[serde(default = "default_metric")]
    pub metric: MetricChoice,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub f_sup: Option<f64>,
    #[serde(default)]
    pub eps: Option<f64>,
}

fn default_metric() -> MetricChoice {
    MetricChoice::D
}

fn default_horizon() -> usize {
    1000
}

/// Sequences `nu_i`, `mu_i` for both starts, the times `t_i` and the checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionTrace<T> {
    pub params: DecompositionParams,
    pub alpha: T,
    pub ball: Vec<usize>,
    pub times: Vec<usize>,
    /// `nu[j][i]`, `mu[j][i]` for start `j` and stage `i`.
    pub nu: [Vec<Vec<T>>; 2],
    pub mu: [Vec<Vec<T>>; 2],
    /// `(1 - alpha)^k`.
    pub residual_mass: T,
    /// Max entrywise gap in the mixture identity over both starts.
    pub reconstruction_error: f64,
    pub support_ok: bool,
    pub probability_ok: bool,
    pub stopping_rule: Option<bool>,
}

trait Scalar: Clone + Num + PartialOrd + ToPrimitive {}
impl<T: Clone + Num + PartialOrd + ToPrimitive> Scalar for T {}

fn step<T: Scalar>(v: &[T], p: &[Vec<T>]) -> Vec<T> {
    let n = v.len();
    let mut out = vec![T::zero(); n];
    for (i, vi) in v.iter().enumerate() {
        if vi.is_zero() {
            continue;
        }
        for j in 0..n {
            if !p[i][j].is_zero() {
                out[j] = out[j].clone() + vi.clone() * p[i][j].clone();
            }
        }
    }
    out
}

fn steps<T: Scalar>(v: &[T], p: &[Vec<T>], t: usize) -> Vec<T> {
    (0..t).fold(v.to_vec(), |acc, _| step(&acc, p))
}

fn mass<T: Scalar>(v: &[T], ball: &[usize]) -> T {
    ball.iter().fold(T::zero(), |acc, &j| acc + v[j].clone())
}

fn pow<T: Scalar>(x: &T, k: usize) -> T {
    (0..k).fold(T::one(), |acc, _| acc * x.clone())
}

fn decompose<T: Scalar>(p: &[Vec<T>], ball: &[usize], params: &DecompositionParams, alpha: T, tol: T) -> Result<DecompositionTrace<T>> {
    let n = p.len();
    let one_minus = T::one() - alpha.clone();
    let mut src: [Vec<T>; 2] = [params.x1, params.x2].map(|x| {
        let mut e = vec![T::zero(); n];
        e[x] = T::one();
        e
    });
    let mut times = Vec::new();
    let mut nu: [Vec<Vec<T>>; 2] = [Vec::new(), Vec::new()];
    let mut mu: [Vec<Vec<T>>; 2] = [Vec::new(), Vec::new()];
    let threshold = alpha.clone() - tol.clone();
    for _ in 0..params.k {
        // greedy: smallest t >= 1 with ball mass >= alpha for both starts
        let mut cur = src.clone();
        let mut found = None;
        for t in 1..=params.horizon {
            cur = [step(&cur[0], p), step(&cur[1], p)];
            if cur.iter().all(|c| mass(c, ball) >= threshold) {
                found = Some(t);
                break;
            }
        }
        let t = found.ok_or(Error::AlphaTooLarge { horizon: params.horizon })?;
        times.push(t);
        for j in 0..2 {
            let m = mass(&cur[j], ball);
            let mut v = vec![T::zero(); n];
            for &b in ball {
                v[b] = cur[j][b].clone() / m.clone();
            }
            let mut u: Vec<T> = cur[j].iter().zip(&v).map(|(c, w)| (c.clone() - alpha.clone() * w.clone()) / one_minus.clone()).collect();
            // boundary alpha = mass: clear rounding below zero
            for e in u.iter_mut() {
                if *e < T::zero() && *e >= T::zero() - tol.clone() {
                    *e = T::zero();
                }
            }
            nu[j].push(v);
            mu[j].push(u.clone());
            src[j] = u;
        }
    }

    let total: usize = times.iter().sum();
    let mut err = 0.0f64;
    for (j, x) in [params.x1, params.x2].into_iter().enumerate() {
        let mut e = vec![T::zero(); n];
        e[x] = T::one();
        let lhs = steps(&e, p, total);
        let mut rhs = vec![T::zero(); n];
        for i in 0..params.k {
            let coef = alpha.clone() * pow(&one_minus, i);
            let rest: usize = times[i + 1..].iter().sum();
            let term = steps(&nu[j][i], p, rest);
            for (r, v) in rhs.iter_mut().zip(term) {
                *r = r.clone() + coef.clone() * v;
            }
        }
        if let Some(last) = mu[j].last() {
            let coef = pow(&one_minus, params.k);
            for (r, v) in rhs.iter_mut().zip(last) {
                *r = r.clone() + coef.clone() * v.clone();
            }
        } else {
            rhs = e.clone();
        }
        for (a, b) in lhs.iter().zip(&rhs) {
            let gap = if a > b { a.clone() - b.clone() } else { b.clone() - a.clone() };
            err = err.max(gap.to_f64().unwrap_or(f64::INFINITY));
        }
    }
    let inside = |j: usize| ball.contains(&j);
    let support_ok = nu.iter().flatten().all(|v| v.iter().enumerate().all(|(j, x)| inside(j) || x.is_zero()));
    let prob = |v: &Vec<T>| {
        let s = v.iter().fold(T::zero(), |a, x| a + x.clone());
        let gap = if s > T::one() { s - T::one() } else { T::one() - s };
        v.iter().all(|x| *x >= T::zero()) && gap <= tol.clone() + tol.clone()
    };
    let probability_ok = nu.iter().chain(mu.iter()).flatten().all(prob);
    let residual_mass = pow(&one_minus, params.k);
    let stopping_rule = match (params.f_sup, params.eps) {
        (Some(f), Some(eps)) => Some(2.0 * residual_mass.to_f64().unwrap_or(f64::INFINITY) * f < eps),
        _ => None,
    };
    Ok(DecompositionTrace {
        params: params.clone(),
        alpha,
        ball: ball.to_vec(),
        times,
        nu,
        mu,
        residual_mass,
        reconstruction_error: err,
        support_ok,
        probability_ok,
        stopping_rule,
    })
}

fn check(chain: &FiniteChain, params: &DecompositionParams) -> Result<Vec<usize>> {
    let n = chain.len();
    if params.x1 >= n || params.x2 >= n || params.z >= n {
        return Err(Error::InvalidChain("state index out of range".into()));
    }
    if !(params.alpha > 0.0 && params.alpha < 1.0) || params.k == 0 || !(params.delta > 0.0) {
        return Err(Error::InvalidChain(format!("alpha = {}, k = {}, delta = {}", params.alpha, params.k, params.delta)));
    }
    Ok(chain.ball(params.z, params.delta, params.metric))
}

/// Floating-point decomposition; tolerances `1e-12`.
pub fn measure_decomposition(chain: &FiniteChain, params: &DecompositionParams) -> Result<DecompositionTrace<f64>> {
    let ball = check(chain, params)?;
    let p: Vec<Vec<f64>> = (0..chain.len()).map(|i| chain.p.row(i).iter().copied().collect()).collect();
    decompose(&p, &ball, params, params.alpha, 1e-12)
}

/// Exact rational decomposition: matrix entries and `alpha` are read as the
/// decimals they print as (`0.4` is `2/5`), so hand examples are exact.
pub fn measure_decomposition_exact(chain: &FiniteChain, params: &DecompositionParams) -> Result<DecompositionTrace<BigRational>> {
    let ball = check(chain, params)?;
    let p: Vec<Vec<BigRational>> = (0..chain.len()).map(|i| chain.p.row(i).iter().map(|&v| decimal_rational(v)).collect()).collect();
    decompose(&p, &ball, params, decimal_rational(params.alpha), BigRational::zero())
}

/// The rational whose decimal expansion is the shortest round-trip
/// representation of `x`.
pub fn decimal_rational(x: f64) -> BigRational {
    assert!(x.is_finite(), "finite input");
    let s = format!("{x:e}");
    let (mant, exp) = s.split_once('e').expect("LowerExp has an exponent");
    let exp: i64 = exp.parse().expect("integer exponent");
    let (neg, mant) = mant.strip_prefix('-').map_or((false, mant), |m| (true, m));
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    let digits: BigInt = format!("{int}{frac}").parse().expect("decimal digits");
    let shift = exp - frac.len() as i64;
    let ten = BigInt::from(10);
    let mut r = if shift >= 0 {
        BigRational::from_integer(digits * num_traits::pow(ten, shift as usize))
    } else {
        BigRational::new(digits, num_traits::pow(ten, (-shift) as usize))
    };
    if neg {
        r = -r;
    }
    r
}

/// Seeded battery of stable random chains (2 to 8 states, depth 1 to 6).
/// `z` is drawn from the support of the invariant law and `alpha` is half
/// its ball mass, so the greedy search always succeeds.
pub fn decomposition_battery(count: usize, seed: u64) -> Vec<(FiniteChain, DecompositionParams)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let n = rng.gen_range(2..=8);
        let chain = super::random_chain(n, rng.gen_range(0.0..0.6), rng.gen());
        let Some(mu) = super::asymptotic_stability_exact(&chain).mu else {
            continue;
        };
        let support: Vec<usize> = (0..n).filter(|&i| mu[i] > 1e-9).collect();
        let z = support[rng.gen_range(0..support.len())];
        let delta = rng.gen_range(0.5..2.5);
        let ball = chain.ball(z, delta, MetricChoice::D);
        let mass: f64 = ball.iter().map(|&j| mu[j]).sum();
        let params = DecompositionParams {
            x1: rng.gen_range(0..n),
            x2: rng.gen_range(0..n),
            z,
            delta,
            alpha: 0.5 * mass,
            k: rng.gen_range(1..=6),
            metric: MetricChoice::D,
            horizon: default_horizon(),
            f_sup: None,
            eps: None,
        };
        out.push((chain, params));
    }
    out
}

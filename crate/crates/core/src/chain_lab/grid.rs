use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{invariant_measures, FiniteChain, MetricChoice};
use crate::error::{Error, Result};
use crate::stats::normal_cdf;

/// AR(1) kernel `x' = a x + s xi` on `[-L, L]` with reflection at the ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub contraction: f64,
    pub noise: f64,
    pub half_width: f64,
}

/// Reflection images kept on each side.
const IMAGES: i32 = 4;

fn reflect(mut y: f64, l: f64) -> f64 {
    let period = 4.0 * l;
    y = (y + l).rem_euclid(period) - l;
    if y > l {
        2.0 * l - y
    } else {
        y
    }
}

/// Gaussian mass of `[u, v]` and all its reflection images.
fn cell_mass(mean: f64, s: f64, u: f64, v: f64, l: f64) -> f64 {
    let g = |a: f64, b: f64| normal_cdf((b - mean) / s) - normal_cdf((a - mean) / s);
    (-IMAGES..=IMAGES)
        .map(|k| {
            let shift = 4.0 * l * k as f64;
            g(u + shift, v + shift) + g(2.0 * l - v + shift, 2.0 * l - u + shift)
        })
        .sum()
}

/// Cell-centre discretization of the kernel on `n` equal cells. The second
/// metric is `|atan x - atan y|`, bounded and coarser than `|x - y|`.
pub fn grid_kernel_lab(spec: &KernelSpec, n: usize) -> Result<FiniteChain> {
    let (a, s, l) = (spec.contraction, spec.noise, spec.half_width);
    if n < 2 || !(l > 0.0) || !(s >= 0.0) || !a.is_finite() {
        return Err(Error::InvalidChain(format!("kernel {spec:?} on {n} cells")));
    }
    let h = 2.0 * l / n as f64;
    let centres: Vec<f64> = (0..n).map(|i| -l + (i as f64 + 0.5) * h).collect();
    let mut p = DMatrix::zeros(n, n);
    for (i, &c) in centres.iter().enumerate() {
        if s == 0.0 {
            let y = reflect(a * c, l);
            let j = (((y + l) / h).floor() as usize).min(n - 1);
            p[(i, j)] = 1.0;
            continue;
        }
        let mut row: Vec<f64> = (0..n).map(|j| cell_mass(a * c, s, -l + j as f64 * h, -l + (j + 1) as f64 * h, l)).collect();
        let total: f64 = row.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidChain(format!("row {i} carries mass {total} before normalization")));
        }
        row.iter_mut().for_each(|v| *v /= total);
        for (j, v) in row.into_iter().enumerate() {
            p[(i, j)] = v;
        }
        let drift = 1.0 - p.row(i).sum();
        let k = (0..n).max_by(|&x, &y| p[(i, x)].total_cmp(&p[(i, y)])).unwrap();
        p[(i, k)] += drift;
    }
    let rho = DMatrix::from_fn(n, n, |i, j| (centres[i] - centres[j]).abs());
    let d = DMatrix::from_fn(n, n, |i, j| (centres[i].atan() - centres[j].atan()).abs());
    FiniteChain::with_metrics(centres.iter().map(|&c| vec![c]).collect(), p, rho, d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub offset: usize,
    pub distance: f64,
    /// `sup_{n in tail} max_f |P^n f(z + offset) - P^n f(z)|`.
    pub value: f64,
}

/// Eventual-continuity profile on a grid chain: for each neighbour offset,
/// the tail supremum of `|P^n f(x) - P^n f(z)|` over the 1-Lipschitz family
/// `f = tanh(w phi)`, `w in {1/4, 1/2, 1}`, with `phi = x` (rho) or
/// `phi = atan x` (d).
pub fn continuity_profile(chain: &FiniteChain, z: usize, offsets: &[usize], tail: (usize, usize), which: MetricChoice) -> Result<Vec<ProfileRow>> {
    let n = chain.len();
    if offsets.iter().any(|&k| z + k >= n) || tail.0 > tail.1 {
        return Err(Error::InvalidChain("offset beyond the grid or empty tail".into()));
    }
    let phi = |x: f64| match which {
        MetricChoice::Rho => x,
        MetricChoice::D => x.atan(),
    };
    let mut out: Vec<ProfileRow> = offsets
        .iter()
        .map(|&k| ProfileRow { offset: k, distance: chain.metric(which)[(z, z + k)], value: 0.0 })
        .collect();
    for w in [0.25, 0.5, 1.0] {
        let mut f = DVector::from_iterator(n, chain.states.iter().map(|s| (w * phi(s[0])).tanh()));
        for step in 0..=tail.1 {
            if step > 0 {
                f = &chain.p * f;
            }
            if step >= tail.0 {
                for row in out.iter_mut() {
                    row.value = row.value.max((f[z + row.offset] - f[z]).abs());
                }
            }
        }
    }
    Ok(out)
}

/// Total-variation distance between the invariant measures on `n` and on
/// `m * n` cells, after merging each group of `m` fine cells.
pub fn refinement_tv(spec: &KernelSpec, coarse: usize, fine: usize) -> Result<f64> {
    if fine % coarse != 0 {
        return Err(Error::InvalidChain(format!("{fine} cells do not refine {coarse}")));
    }
    let m = fine / coarse;
    let pc = invariant_measures(&grid_kernel_lab(spec, coarse)?);
    let pf = invariant_measures(&grid_kernel_lab(spec, fine)?);
    if pc.len() != 1 || pf.len() != 1 {
        return Err(Error::InvalidChain("grid chain has several invariant measures".into()));
    }
    Ok(0.5 * (0..coarse).map(|i| (pc[0][i] - (0..m).map(|k| pf[0][i * m + k]).sum::<f64>()).abs()).sum::<f64>())
}

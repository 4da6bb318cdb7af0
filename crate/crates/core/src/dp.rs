//! Dynamic-programming baseline for elastic alignment.
//!
//! Paths run on a `G × G` lattice from `(0,0)` to `(1,1)` with steps drawn
//! from a set of positive integer slopes. The cost of a step is the exact
//! integral of `(Q1(t) - sqrt(m) Q2(γ(t)))²` over the step, where `Q1`, `Q2`
//! are the piecewise-linear interpolants of the sampled SRSFs and `m` is the
//! step slope. The integrand is a squared linear function between merged
//! breakpoints, so no quadrature error enters and the identity path never
//! costs more than the trapezoidal `l2_distance`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};
use crate::function::{interp, Srsf, WarpingFunction};

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Coprime pairs `(a, b)` with `1 <= a, b <= max`, ordered by closeness to
/// the diagonal.
pub fn coprime_slopes(max: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = (1..=max)
        .flat_map(|a| (1..=max).map(move |b| (a, b)))
        .filter(|(a, b)| gcd(*a, *b) == 1)
        .collect();
    out.sort_by_key(|(a, b)| (a.abs_diff(*b), *a + *b, *a));
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DpConfig {
    /// Lattice points per axis; `None` uses `2N - 1`, which halves the
    /// function grid spacing.
    pub grid_size: Option<usize>,
    /// Admissible steps `(dt, dgamma)` in lattice units.
    pub neighborhood: Vec<(usize, usize)>,
}

impl Default for DpConfig {
    fn default() -> Self {
        Self {
            grid_size: None,
            neighborhood: coprime_slopes(4),
        }
    }
}

impl DpConfig {
    pub fn with_grid_size(grid_size: usize) -> Self {
        Self {
            grid_size: Some(grid_size),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.neighborhood.is_empty() || self.neighborhood.iter().any(|(a, b)| *a == 0 || *b == 0)
        {
            return invalid("DP neighborhood must contain strictly positive slopes");
        }
        if matches!(self.grid_size, Some(g) if g < 2) {
            return invalid("DP lattice needs at least 2 points per axis");
        }
        Ok(())
    }
}

/// Optimal path and its cost.
#[derive(Debug, Clone, PartialEq)]
pub struct DpSolution {
    pub gamma: WarpingFunction,
    /// Lattice nodes `(i, j)` visited, from `(0, 0)` to `(G-1, G-1)`.
    pub path: Vec<(usize, usize)>,
    /// Optimal squared distance.
    pub cost: f64,
}

/// Exact `∫_{t0}^{t1} (Q1(t) - sqrt(m) Q2(s0 + m (t - t0)))² dt`.
fn segment_cost(q1: &[f64], q2: &[f64], t0: f64, t1: f64, s0: f64, s1: f64) -> f64 {
    let n = q1.len();
    let h = (n - 1) as f64;
    let m = (s1 - s0) / (t1 - t0);
    let rm = m.sqrt();
    let mut cuts = vec![t0, t1];
    let first = (t0 * h).floor() as usize + 1;
    for k in first..n {
        let t = k as f64 / h;
        if t >= t1 {
            break;
        }
        cuts.push(t);
    }
    let first = (s0 * h).floor() as usize + 1;
    for k in first..n {
        let s = k as f64 / h;
        if s >= s1 {
            break;
        }
        cuts.push(t0 + (s - s0) / m);
    }
    cuts.sort_by(f64::total_cmp);
    let g = |t: f64| interp(q1, t) - rm * interp(q2, (s0 + m * (t - t0)).min(1.0));
    let mut total = 0.0;
    let mut prev_t = cuts[0];
    let mut prev_g = g(prev_t);
    for &t in &cuts[1..] {
        let dt = t - prev_t;
        if dt <= 0.0 {
            continue;
        }
        let gt = g(t);
        total += dt / 3.0 * (prev_g * prev_g + prev_g * gt + gt * gt);
        prev_t = t;
        prev_g = gt;
    }
    total
}

/// Solves the lattice problem and returns the path, the warp on the
/// function grid, and the optimal cost.
pub fn dp_solve(q1: &Srsf, q2: &Srsf, cfg: &DpConfig) -> Result<DpSolution> {
    check_len(q1.len(), q2.len())?;
    cfg.validate()?;
    let n = q1.len();
    let g = cfg.grid_size.unwrap_or(2 * n - 1);
    let h = (g - 1) as f64;
    let (a, b) = (q1.values(), q2.values());
    let idx = |i: usize, j: usize| i * g + j;
    let mut cost = vec![f64::INFINITY; g * g];
    let mut back: Vec<Option<(usize, usize)>> = vec![None; g * g];
    cost[0] = 0.0;
    for i in 1..g {
        for j in 1..g {
            let mut best = f64::INFINITY;
            let mut from = None;
            for &(di, dj) in &cfg.neighborhood {
                if di > i || dj > j {
                    continue;
                }
                let (pi, pj) = (i - di, j - dj);
                let base = cost[idx(pi, pj)];
                if !base.is_finite() {
                    continue;
                }
                let c = base
                    + segment_cost(
                        a,
                        b,
                        pi as f64 / h,
                        i as f64 / h,
                        pj as f64 / h,
                        j as f64 / h,
                    );
                // Strict improvement keeps the earlier, more diagonal step on ties.
                if from.is_none() || c < best - 1e-15 * best {
                    best = c;
                    from = Some((pi, pj));
                }
            }
            cost[idx(i, j)] = best;
            back[idx(i, j)] = from;
        }
    }
    let total = cost[idx(g - 1, g - 1)];
    if !total.is_finite() {
        return invalid("no admissible DP path; widen the neighborhood");
    }
    let mut path = vec![(g - 1, g - 1)];
    let mut cur = (g - 1, g - 1);
    while let Some(prev) = back[idx(cur.0, cur.1)] {
        path.push(prev);
        cur = prev;
    }
    path.reverse();

    let ts: Vec<f64> = path.iter().map(|(i, _)| *i as f64 / h).collect();
    let ss: Vec<f64> = path.iter().map(|(_, j)| *j as f64 / h).collect();
    let mut values = Vec::with_capacity(n);
    let mut k = 0;
    for i in 0..n {
        let t = i as f64 / (n - 1) as f64;
        while k + 2 < ts.len() && ts[k + 1] <= t {
            k += 1;
        }
        let w = ((t - ts[k]) / (ts[k + 1] - ts[k])).clamp(0.0, 1.0);
        values.push(ss[k] + w * (ss[k + 1] - ss[k]));
    }
    values[0] = 0.0;
    values[n - 1] = 1.0;
    let gamma = WarpingFunction::new(values)?;
    Ok(DpSolution {
        gamma,
        path,
        cost: total.max(0.0),
    })
}

/// Optimal warp `γ_DP` so that `(q2, γ_DP)` best matches `q1`.
pub fn dp_align(q1: &Srsf, q2: &Srsf, cfg: &DpConfig) -> Result<WarpingFunction> {
    Ok(dp_solve(q1, q2, cfg)?.gamma)
}

/// Square root of the optimal lattice cost.
pub fn dp_distance(q1: &Srsf, q2: &Srsf, cfg: &DpConfig) -> Result<f64> {
    Ok(dp_solve(q1, q2, cfg)?.cost.sqrt())
}

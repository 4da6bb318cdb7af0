//! Posterior summaries, alignment quality and mode detection on the sphere.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, AlignError, Result};
use crate::function::{l2_distance, warp_srsf, Srsf, WarpingFunction};
use crate::sphere::{from_srd, geometric_median, karcher_mean, sphere_distance, Srd};

/// Default largest number of modes tried by [`select_num_modes`].
pub const DEFAULT_K_MAX: usize = 5;

/// Default relative pooled-variance decrease required to leave `k = 1`.
pub const DEFAULT_MODE_THRESHOLD: f64 = 0.30;

/// Below this every pairwise distance counts as a single tight mode.
pub const TIGHT_CLOUD: f64 = 1e-3;

const KMEANS_MAX_ITER: usize = 100;

/// Symmetric matrix of geodesic distances with zero diagonal.
pub fn pairwise_distance_matrix(psis: &[Srd]) -> Result<Vec<Vec<f64>>> {
    let s = psis.len();
    if s == 0 {
        return invalid("distance matrix of an empty sample");
    }
    let upper: Vec<Vec<f64>> = (0..s)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..s)
                .map(|j| sphere_distance(&psis[i], &psis[j]))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut d = vec![vec![0.0; s]; s];
    for (i, row) in upper.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + 1 + off;
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    Ok(d)
}

/// Complete-linkage agglomeration cut at `k` clusters. Labels are numbered
/// by the smallest member index; ties merge the lexicographically first pair.
pub fn complete_linkage(d: &[Vec<f64>], k: usize) -> Result<Vec<usize>> {
    let s = d.len();
    if k == 0 || k > s {
        return invalid(format!("cannot cut {s} points into {k} clusters"));
    }
    let mut members: Vec<Option<Vec<usize>>> = (0..s).map(|i| Some(vec![i])).collect();
    let mut link: Vec<Vec<f64>> = d.to_vec();
    let mut alive = s;
    while alive > k {
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..s {
            if members[i].is_none() {
                continue;
            }
            for j in (i + 1)..s {
                if members[j].is_some() && link[i][j] < best.0 {
                    best = (link[i][j], i, j);
                }
            }
        }
        let (_, a, b) = best;
        let moved = members[b].take().unwrap_or_default();
        if let Some(m) = members[a].as_mut() {
            m.extend(moved);
        }
        let row_b = link[b].clone();
        for (c, lb) in row_b.into_iter().enumerate() {
            let v = link[a][c].max(lb);
            link[a][c] = v;
            link[c][a] = v;
        }
        alive -= 1;
    }
    let mut groups: Vec<Vec<usize>> = members.into_iter().flatten().collect();
    for g in groups.iter_mut() {
        g.sort_unstable();
    }
    groups.sort_by_key(|g| g[0]);
    let mut labels = vec![0; s];
    for (c, g) in groups.iter().enumerate() {
        for &i in g {
            labels[i] = c;
        }
    }
    Ok(labels)
}

/// Karcher mean, falling back to the last iterate when the cap is hit.
fn center_of(points: &[Srd]) -> Result<Srd> {
    match karcher_mean(points) {
        Ok(m) => Ok(m),
        Err(AlignError::Convergence { last, .. }) => Srd::new(last),
        Err(e) => Err(e),
    }
}

fn members(psis: &[Srd], labels: &[usize], c: usize) -> Vec<Srd> {
    psis.iter()
        .zip(labels)
        .filter(|(_, l)| **l == c)
        .map(|(p, _)| p.clone())
        .collect()
}

/// Initial centers: Karcher means of the complete-linkage clusters.
pub fn hierarchical_init(psis: &[Srd], d: &[Vec<f64>], k: usize) -> Result<Vec<Srd>> {
    check_len(psis.len(), d.len())?;
    let labels = complete_linkage(d, k)?;
    (0..k)
        .map(|c| center_of(&members(psis, &labels, c)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub k: usize,
    pub labels: Vec<usize>,
    pub centers: Vec<Srd>,
    /// Zero when `k = 1`.
    pub avg_silhouette: f64,
    /// Pooled within-cluster squared distance for `k = 1, 2, ...`.
    pub pooled_variance_curve: Vec<f64>,
    /// k-means objective after every assignment step.
    pub objective_history: Vec<f64>,
}

impl ClusterResult {
    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.k];
        for l in &self.labels {
            out[*l] += 1;
        }
        out
    }

    pub fn members(&self, c: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == c)
            .map(|(i, _)| i)
            .collect()
    }
}

fn nearest(p: &Srd, centers: &[Srd]) -> Result<(usize, f64)> {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = sphere_distance(p, center)?;
        if d < best.1 {
            best = (c, d);
        }
    }
    Ok(best)
}

fn cluster_cost(points: &[Srd], center: &Srd) -> Result<f64> {
    points
        .iter()
        .map(|p| Ok(sphere_distance(p, center)?.powi(2)))
        .sum()
}

/// Sum over points of the squared distance to their own center.
pub fn pooled_variance(psis: &[Srd], labels: &[usize], centers: &[Srd]) -> Result<f64> {
    check_len(psis.len(), labels.len())?;
    psis.iter()
        .zip(labels)
        .map(|(p, l)| Ok(sphere_distance(p, &centers[*l])?.powi(2)))
        .sum()
}

/// Lloyd iterations with Karcher-mean updates.
///
/// A center moves only when the new mean does not raise its cluster cost,
/// so the objective never increases. A cluster left empty takes the point
/// farthest from its current center (lowest index on ties) as its center.
pub fn kmeans(psis: &[Srd], k: usize, init: Vec<Srd>) -> Result<ClusterResult> {
    if k == 0 || k > psis.len() {
        return invalid(format!("k-means with k = {k} on {} points", psis.len()));
    }
    check_len(init.len(), k)?;
    let mut centers = init;
    let mut labels = Vec::with_capacity(psis.len());
    let mut dists = Vec::with_capacity(psis.len());
    for p in psis {
        let (c, d) = nearest(p, &centers)?;
        labels.push(c);
        dists.push(d);
    }
    let mut history = Vec::new();
    for _ in 0..KMEANS_MAX_ITER {
        reseed_empty(&mut centers, &mut labels, &mut dists, psis);
        history.push(dists.iter().map(|d| d * d).sum());

        for (c, center) in centers.iter_mut().enumerate() {
            let pts = members(psis, &labels, c);
            let candidate = center_of(&pts)?;
            if cluster_cost(&pts, &candidate)? <= cluster_cost(&pts, center)? {
                *center = candidate;
            }
        }
        let mut new_labels = Vec::with_capacity(psis.len());
        dists.clear();
        for p in psis {
            let (c, d) = nearest(p, &centers)?;
            new_labels.push(c);
            dists.push(d);
        }
        if new_labels == labels {
            reseed_empty(&mut centers, &mut labels, &mut dists, psis);
            history.push(dists.iter().map(|d| d * d).sum());
            break;
        }
        labels = new_labels;
    }
    Ok(ClusterResult {
        k,
        labels,
        centers,
        avg_silhouette: 0.0,
        pooled_variance_curve: Vec::new(),
        objective_history: history,
    })
}

fn reseed_empty(centers: &mut [Srd], labels: &mut [usize], dists: &mut [f64], psis: &[Srd]) {
    for c in 0..centers.len() {
        if labels.contains(&c) {
            continue;
        }
        let mut sizes = vec![0usize; centers.len()];
        for l in labels.iter() {
            sizes[*l] += 1;
        }
        let far =
            (0..psis.len())
                .filter(|i| sizes[labels[*i]] > 1)
                .fold(None::<usize>, |best, i| match best {
                    Some(b) if dists[b] >= dists[i] => Some(b),
                    _ => Some(i),
                });
        if let Some(i) = far {
            centers[c] = psis[i].clone();
            labels[i] = c;
            dists[i] = 0.0;
        }
    }
}

/// Per-point silhouette values and their average. Points in singleton
/// clusters score 0; with one cluster every value is 0.
pub fn silhouette(labels: &[usize], d: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
    check_len(labels.len(), d.len())?;
    let s = labels.len();
    if s == 0 {
        return invalid("silhouette of an empty sample");
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for l in labels {
        sizes[*l] += 1;
    }
    let values: Vec<f64> = (0..s)
        .map(|i| {
            let own = labels[i];
            if sizes[own] <= 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for j in 0..s {
                sums[labels[j]] += d[i][j];
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|c| *c != own && sizes[*c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            if !b.is_finite() {
                return 0.0;
            }
            let m = a.max(b);
            if m > 0.0 {
                (b - a) / m
            } else {
                0.0
            }
        })
        .collect();
    let avg = values.iter().sum::<f64>() / s as f64;
    Ok((values, avg))
}

fn single_cluster(psis: &[Srd]) -> Result<ClusterResult> {
    let center = center_of(psis)?;
    let v = cluster_cost(psis, &center)?;
    Ok(ClusterResult {
        k: 1,
        labels: vec![0; psis.len()],
        centers: vec![center],
        avg_silhouette: 0.0,
        pooled_variance_curve: vec![v],
        objective_history: vec![v],
    })
}

/// k-means with hierarchical initialization at a known `k`.
pub fn cluster_fixed_k(psis: &[Srd], d: &[Vec<f64>], k: usize) -> Result<ClusterResult> {
    if k == 1 {
        return single_cluster(psis);
    }
    let init = hierarchical_init(psis, d, k)?;
    let mut res = kmeans(psis, k, init)?;
    res.avg_silhouette = silhouette(&res.labels, d)?.1;
    res.pooled_variance_curve = vec![pooled_variance(psis, &res.labels, &res.centers)?];
    Ok(res)
}

/// Relative decrease of pooled variance from `k = 1` to `k = 2`.
pub fn variance_decrease(curve: &[f64]) -> Option<f64> {
    match curve {
        [v1, v2, ..] if *v1 > 0.0 => Some((v1 - v2) / v1),
        _ => None,
    }
}

/// Chooses the number of posterior modes.
///
/// Returns `k = 1` when the pooled-variance decrease from one to two
/// clusters is at most `threshold`; otherwise the `k` in `2..=k_max` with
/// the largest average silhouette (smallest `k` on ties).
pub fn select_num_modes(psis: &[Srd], k_max: usize, threshold: f64) -> Result<ClusterResult> {
    let s = psis.len();
    if s < 4 {
        return invalid(format!("mode selection needs at least 4 samples, got {s}"));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return invalid(format!(
            "mode threshold must lie in (0, 1), got {threshold}"
        ));
    }
    let d = pairwise_distance_matrix(psis)?;
    let mut one = single_cluster(psis)?;
    let v1 = one.pooled_variance_curve[0];
    let tight = d.iter().flatten().all(|x| *x < TIGHT_CLOUD);
    if tight || v1 == 0.0 || k_max < 2 {
        return Ok(one);
    }
    let mut curve = vec![v1];
    let mut candidates = Vec::new();
    for k in 2..=k_max.min(s - 1) {
        let res = cluster_fixed_k(psis, &d, k)?;
        curve.push(res.pooled_variance_curve[0]);
        candidates.push(res);
    }
    let decrease = variance_decrease(&curve).unwrap_or(0.0);
    if decrease <= threshold {
        one.pooled_variance_curve = curve;
        return Ok(one);
    }
    let mut best = candidates.remove(0);
    for c in candidates {
        if c.avg_silhouette > best.avg_silhouette {
            best = c;
        }
    }
    best.pooled_variance_curve = curve;
    Ok(best)
}

/// Percentage decrease of the SRSF distance achieved by `gamma`.
pub fn dpd(q1: &Srsf, q2: &Srsf, gamma: &WarpingFunction) -> Result<f64> {
    let before = l2_distance(q1, q2)?;
    if before == 0.0 {
        return Err(AlignError::UndefinedDpd);
    }
    let after = l2_distance(q1, &warp_srsf(q2, gamma)?)?;
    Ok(100.0 * (before - after) / before)
}

/// [`dpd`] with the undefined case mapped to `None`.
pub fn dpd_or_none(q1: &Srsf, q2: &Srsf, gamma: &WarpingFunction) -> Result<Option<f64>> {
    match dpd(q1, q2, gamma) {
        Ok(v) => Ok(Some(v)),
        Err(AlignError::UndefinedDpd) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Type-7 empirical quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Summary of one posterior cluster. Bands and spread are pointwise in
/// warping space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub size: usize,
    pub mean_warp: WarpingFunction,
    pub median_warp: WarpingFunction,
    pub map_warp: WarpingFunction,
    pub map_log_posterior: f64,
    pub pointwise_sd: Vec<f64>,
    pub band_lower: Vec<f64>,
    pub pointwise_median: Vec<f64>,
    pub band_upper: Vec<f64>,
    pub level: f64,
    /// `None` when `q1 = q2`.
    pub dpd_mean: Option<f64>,
    pub dpd_median: Option<f64>,
    pub dpd_map: Option<f64>,
}

/// Pointwise lower band, median, upper band and sd of warps.
pub fn pointwise_band(gammas: &[WarpingFunction], level: f64) -> Result<[Vec<f64>; 4]> {
    if gammas.is_empty() {
        return invalid("band of an empty sample");
    }
    if !(level > 0.0 && level < 1.0) {
        return invalid(format!("credible level must lie in (0, 1), got {level}"));
    }
    let n = gammas[0].len();
    let alpha = (1.0 - level) / 2.0;
    let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut column = vec![0.0; gammas.len()];
    for i in 0..n {
        for (c, g) in column.iter_mut().zip(gammas) {
            *c = g.values()[i];
        }
        column.sort_by(f64::total_cmp);
        let m = column.iter().sum::<f64>() / column.len() as f64;
        let sd = if column.len() > 1 {
            (column.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (column.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        let row = [
            quantile_sorted(&column, alpha),
            quantile_sorted(&column, 0.5),
            quantile_sorted(&column, 1.0 - alpha),
            sd,
        ];
        for (o, v) in out.iter_mut().zip(row) {
            o[i] = v;
        }
    }
    Ok(out)
}

/// Mean, median and MAP of a cluster plus pointwise bands and DPDs.
///
/// `log_posterior[i]` is the unnormalized log posterior of `psis[i]`; the
/// MAP is its argmax (lowest index on ties).
pub fn summarize(
    psis: &[Srd],
    log_posterior: &[f64],
    q1: &Srsf,
    q2: &Srsf,
    level: f64,
) -> Result<PosteriorSummary> {
    if psis.is_empty() {
        return invalid("summary of an empty cluster");
    }
    check_len(psis.len(), log_posterior.len())?;
    let mean_warp = from_srd(&karcher_mean(psis)?)?;
    let median_warp = from_srd(&geometric_median(psis)?)?;
    let map_idx = (0..psis.len()).fold(0, |b, i| {
        if log_posterior[i] > log_posterior[b] {
            i
        } else {
            b
        }
    });
    let map_warp = from_srd(&psis[map_idx])?;
    let gammas: Vec<WarpingFunction> = psis.iter().map(from_srd).collect::<Result<_>>()?;
    let [band_lower, pointwise_median, band_upper, pointwise_sd] = pointwise_band(&gammas, level)?;
    Ok(PosteriorSummary {
        size: psis.len(),
        dpd_mean: dpd_or_none(q1, q2, &mean_warp)?,
        dpd_median: dpd_or_none(q1, q2, &median_warp)?,
        dpd_map: dpd_or_none(q1, q2, &map_warp)?,
        mean_warp,
        median_warp,
        map_warp,
        map_log_posterior: log_posterior[map_idx],
        pointwise_sd,
        band_lower,
        pointwise_median,
        band_upper,
        level,
    })
}

//! Simulation studies and groupwise template alignment.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    cluster_fixed_k, dpd_or_none, pairwise_distance_matrix, select_num_modes, summarize,
    variance_decrease, DEFAULT_K_MAX, DEFAULT_MODE_THRESHOLD,
};
use crate::basis::OrthonormalBasis;
use crate::dp::{dp_align, DpConfig};
use crate::error::{invalid, Result};
use crate::function::{
    compute_srsf, l2_distance, warp_function, warp_srsf, SampledFunction, WarpingFunction,
};
use crate::model::{sir_indices, ImportanceConfig, Model, PriorConfig};
use crate::sphere::{fisher_rao_distance, from_srd, karcher_mean, Srd};

/// Independent seed for job `index`, drawn from stream `index` of `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.next_u64()
}

/// Sampling settings shared by the simulation runners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub samples: usize,
    pub resample: usize,
    pub replicates: usize,
    pub prior: PriorConfig,
    pub level: f64,
    pub dp: DpConfig,
}

impl SimConfig {
    /// Desk-scale defaults: `S = 50 000`, `s = 200`, 20 replicates, `m = N - 1`.
    pub fn desk(n: usize) -> Self {
        Self {
            n,
            samples: 50_000,
            resample: 200,
            replicates: 20,
            prior: PriorConfig::new(n - 1),
            level: 0.95,
            dp: DpConfig::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        if self.n < 3 || self.replicates == 0 || self.resample == 0 || self.samples < self.resample
        {
            return invalid("simulation needs N >= 3, at least one replicate and S >= s > 0");
        }
        if self.prior.m > self.n - 1 {
            return invalid(format!(
                "basis size {} exceeds N - 1 = {}",
                self.prior.m,
                self.n - 1
            ));
        }
        Ok(())
    }

    fn model(
        &self,
        f1: &SampledFunction,
        f2: &SampledFunction,
        basis: &OrthonormalBasis,
    ) -> Result<Model> {
        let importance = ImportanceConfig::from_prior(&self.prior, self.n);
        Model::with_basis(
            compute_srsf(f1)?,
            compute_srsf(f2)?,
            self.prior.clone(),
            importance,
            basis.clone(),
        )
    }
}

/// True warps of the first study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sim1Warp {
    Identity,
    Gamma1,
    Gamma2,
    Gamma3,
}

impl Sim1Warp {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            Sim1Warp::Identity => t,
            Sim1Warp::Gamma1 => t + 0.15 * t * (1.0 - t),
            Sim1Warp::Gamma2 => t + 0.70 * t * (1.0 - t),
            Sim1Warp::Gamma3 => t + 0.1 * (2.0 * std::f64::consts::PI * t).sin(),
        }
    }

    pub fn warping_function(self, n: usize) -> Result<WarpingFunction> {
        WarpingFunction::from_fn(n, |t| self.eval(t))
    }
}

/// `γ₁ = t + 0.15 t(1-t)`, `γ₂ = t + 0.7 t(1-t)`, `γ₃ = t + 0.1 sin(2πt)`.
pub fn sim1_warps(n: usize) -> Result<[WarpingFunction; 3]> {
    Ok([
        Sim1Warp::Gamma1.warping_function(n)?,
        Sim1Warp::Gamma2.warping_function(n)?,
        Sim1Warp::Gamma3.warping_function(n)?,
    ])
}

fn bump(t: f64, center: f64, width: f64) -> f64 {
    (-(t - center).powi(2) / width).exp()
}

fn sim1_base(t: f64) -> f64 {
    bump(t, 0.3, 0.005) + 0.8 * bump(t, 0.7, 0.005)
}

/// Two bumps at 0.3 and 0.7 with heights 1 and 0.8.
pub fn sim1_base_function(n: usize) -> Result<SampledFunction> {
    SampledFunction::from_fn(n, sim1_base)
}

/// Pair `(f∘γ_T, f)`, so `γ_T` aligns the second function to the first.
pub fn sim1_pair(warp: Sim1Warp, n: usize) -> Result<(SampledFunction, SampledFunction)> {
    Ok((
        SampledFunction::from_fn(n, |t| sim1_base(warp.eval(t)))?,
        sim1_base_function(n)?,
    ))
}

/// A centered bump and a pair of equal bumps at 0.25 and 0.75. Either
/// outer bump can be matched to the center, giving two posterior modes.
pub fn sim2_functions(n: usize) -> Result<(SampledFunction, SampledFunction)> {
    Ok((
        SampledFunction::from_fn(n, |t| bump(t, 0.5, 0.005))?,
        SampledFunction::from_fn(n, |t| bump(t, 0.25, 0.005) + bump(t, 0.75, 0.005))?,
    ))
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (m, sd)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub mean: f64,
    pub sd: f64,
}

impl Statistic {
    pub fn of(xs: &[f64]) -> Self {
        let (mean, sd) = mean_sd(xs);
        Self { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sim1Record {
    pub seed: u64,
    pub retained: usize,
    pub effective_sample_size: f64,
    /// `d_FR(γ_T, γ̄)` for the Karcher mean of the resampled warps.
    pub dfr_mean: f64,
    pub dfr_dp: f64,
    /// `None` for the zero-warp control, where the inputs coincide.
    pub dpd_mean: Option<f64>,
    pub dpd_dp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sim1Report {
    pub warp: Sim1Warp,
    pub config: SimConfig,
    pub records: Vec<Sim1Record>,
    pub dfr_mean: Statistic,
    pub dfr_dp: Statistic,
    pub dpd_mean: Option<Statistic>,
    pub dpd_dp: Option<Statistic>,
}

/// Resamples `s` draws and returns them with their log posteriors.
fn resampled(
    model: &Model,
    cfg: &SimConfig,
    seed: u64,
) -> Result<(Vec<Srd>, Vec<f64>, usize, f64)> {
    let run = model.run(cfg.samples, seed)?;
    let idx = sir_indices(
        &run.log_weights(),
        cfg.resample,
        derive_seed(seed, u64::MAX),
    )?;
    let psis = idx.iter().map(|&i| run.draws[i].psi.clone()).collect();
    let lp = idx.iter().map(|&i| run.draws[i].log_posterior).collect();
    Ok((psis, lp, run.draws.len(), run.effective_sample_size()))
}

/// Replicates of the first study: importance samples are redrawn, the data
/// stay fixed.
pub fn run_sim1(warp: Sim1Warp, cfg: &SimConfig, seed: u64) -> Result<Sim1Report> {
    cfg.validate()?;
    let (f1, f2) = sim1_pair(warp, cfg.n)?;
    let basis = OrthonormalBasis::at_identity(cfg.prior.m, cfg.n)?;
    let model = cfg.model(&f1, &f2, &basis)?;
    let gamma_t = warp.warping_function(cfg.n)?;
    let gamma_dp = dp_align(&model.q1, &model.q2, &cfg.dp)?;
    let dfr_dp = fisher_rao_distance(&gamma_t, &gamma_dp)?;
    let dpd_dp = dpd_or_none(&model.q1, &model.q2, &gamma_dp)?;
    let records = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let rseed = derive_seed(seed, r as u64);
            let (psis, _, retained, ess) = resampled(&model, cfg, rseed)?;
            let mean = from_srd(&karcher_mean(&psis)?)?;
            Ok(Sim1Record {
                seed: rseed,
                retained,
                effective_sample_size: ess,
                dfr_mean: fisher_rao_distance(&gamma_t, &mean)?,
                dfr_dp,
                dpd_mean: dpd_or_none(&model.q1, &model.q2, &mean)?,
                dpd_dp,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let col = |f: fn(&Sim1Record) -> f64| Statistic::of(&records.iter().map(f).collect::<Vec<_>>());
    let opt = |f: fn(&Sim1Record) -> Option<f64>| {
        records
            .iter()
            .map(f)
            .collect::<Option<Vec<f64>>>()
            .map(|v| Statistic::of(&v))
    };
    Ok(Sim1Report {
        warp,
        config: cfg.clone(),
        dfr_mean: col(|r| r.dfr_mean),
        dfr_dp: col(|r| r.dfr_dp),
        dpd_mean: opt(|r| r.dpd_mean),
        dpd_dp: opt(|r| r.dpd_dp),
        records,
    })
}

/// Post-alignment distances of one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub size: usize,
    pub distance_mean: f64,
    pub distance_median: f64,
    pub distance_map: f64,
    /// `γ̄(0.5)`, used to order clusters consistently across replicates.
    pub mean_warp_midpoint: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sim2Record {
    pub seed: u64,
    pub no_warp_distance: f64,
    pub variance_decrease: f64,
    pub selected_k: usize,
    pub avg_silhouette: f64,
    /// Ordered by increasing mean-warp midpoint.
    pub clusters: Vec<ClusterRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sim2Report {
    pub config: SimConfig,
    pub records: Vec<Sim2Record>,
    pub cluster_sizes: Vec<Statistic>,
    pub distance_mean: Vec<Statistic>,
    pub distance_median: Vec<Statistic>,
    pub distance_map: Vec<Statistic>,
    pub no_warp_distance: f64,
}

/// Replicates of the bimodal study with `k = 2` clusters.
pub fn run_sim2(cfg: &SimConfig, seed: u64) -> Result<Sim2Report> {
    cfg.validate()?;
    let (f1, f2) = sim2_functions(cfg.n)?;
    let basis = OrthonormalBasis::at_identity(cfg.prior.m, cfg.n)?;
    let model = cfg.model(&f1, &f2, &basis)?;
    let (q1, q2) = (&model.q1, &model.q2);
    let no_warp = l2_distance(q1, q2)?;
    let records = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let rseed = derive_seed(seed, r as u64);
            let (psis, lp, _, _) = resampled(&model, cfg, rseed)?;
            let d = pairwise_distance_matrix(&psis)?;
            let two = cluster_fixed_k(&psis, &d, 2)?;
            let selected = select_num_modes(&psis, DEFAULT_K_MAX, DEFAULT_MODE_THRESHOLD)?;
            let mut clusters = (0..2)
                .map(|c| {
                    let m = two.members(c);
                    let ps: Vec<Srd> = m.iter().map(|&i| psis[i].clone()).collect();
                    let l: Vec<f64> = m.iter().map(|&i| lp[i]).collect();
                    let s = summarize(&ps, &l, q1, q2, cfg.level)?;
                    let dist = |g: &WarpingFunction| -> Result<f64> {
                        l2_distance(q1, &warp_srsf(q2, g)?)
                    };
                    Ok(ClusterRecord {
                        size: m.len(),
                        distance_mean: dist(&s.mean_warp)?,
                        distance_median: dist(&s.median_warp)?,
                        distance_map: dist(&s.map_warp)?,
                        mean_warp_midpoint: crate::function::interp(s.mean_warp.values(), 0.5),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            clusters.sort_by(|a, b| a.mean_warp_midpoint.total_cmp(&b.mean_warp_midpoint));
            let one_two = [
                selected.pooled_variance_curve[0],
                two.pooled_variance_curve[0],
            ];
            Ok(Sim2Record {
                seed: rseed,
                no_warp_distance: no_warp,
                variance_decrease: variance_decrease(&one_two).unwrap_or(0.0),
                selected_k: selected.k,
                avg_silhouette: two.avg_silhouette,
                clusters,
            })
        })
        .collect::<Result<Vec<Sim2Record>>>()?;
    let per_cluster = |f: fn(&ClusterRecord) -> f64| -> Vec<Statistic> {
        (0..2)
            .map(|c| {
                Statistic::of(
                    &records
                        .iter()
                        .map(|r| f(&r.clusters[c]))
                        .collect::<Vec<_>>(),
                )
            })
            .collect()
    };
    Ok(Sim2Report {
        config: cfg.clone(),
        cluster_sizes: per_cluster(|c| c.size as f64),
        distance_mean: per_cluster(|c| c.distance_mean),
        distance_median: per_cluster(|c| c.distance_median),
        distance_map: per_cluster(|c| c.distance_map),
        no_warp_distance: no_warp,
        records,
    })
}

/// Output of groupwise alignment to a template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateAlignment {
    pub template_index: usize,
    pub warps: Vec<WarpingFunction>,
    pub aligned: Vec<SampledFunction>,
    pub mean_before: Vec<f64>,
    pub mean_after: Vec<f64>,
}

fn pointwise_mean(fs: &[SampledFunction]) -> Vec<f64> {
    let n = fs[0].len();
    (0..n)
        .map(|i| fs.iter().map(|f| f.values()[i]).sum::<f64>() / fs.len() as f64)
        .collect()
}

/// Aligns every function to `dataset[template_index]` with the MAP warp
/// over all importance draws.
pub fn run_template_alignment(
    dataset: &[SampledFunction],
    template_index: usize,
    cfg: &SimConfig,
    seed: u64,
) -> Result<TemplateAlignment> {
    cfg.validate()?;
    if dataset.len() < 2 || template_index >= dataset.len() {
        return invalid("template alignment needs at least 2 functions and a valid template index");
    }
    if dataset.iter().any(|f| f.len() != cfg.n) {
        return invalid(format!("all functions must have {} points", cfg.n));
    }
    let basis = OrthonormalBasis::at_identity(cfg.prior.m, cfg.n)?;
    let template = &dataset[template_index];
    let warps = dataset
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let model = cfg.model(template, f, &basis)?;
            let run = model.run(cfg.samples, derive_seed(seed, i as u64))?;
            match run.map_index() {
                Some(k) => from_srd(&run.draws[k].psi),
                None => Err(crate::AlignError::InsufficientSupport {
                    needed: 1,
                    available: 0,
                }),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let aligned = dataset
        .iter()
        .zip(&warps)
        .map(|(f, g)| warp_function(f, g))
        .collect::<Result<Vec<_>>>()?;
    Ok(TemplateAlignment {
        template_index,
        mean_before: pointwise_mean(dataset),
        mean_after: pointwise_mean(&aligned),
        warps,
        aligned,
    })
}

//! End-to-end pairwise alignment and its serialized result.

use serde::{Deserialize, Serialize};

use crate::analysis::{
    select_num_modes, summarize, ClusterResult, PosteriorSummary, DEFAULT_K_MAX,
    DEFAULT_MODE_THRESHOLD,
};
use crate::dp::{dp_solve, DpConfig};
use crate::error::{check_len, invalid, Result};
use crate::function::{compute_srsf, grid, l2_distance, SampledFunction, WarpingFunction};
use crate::model::{covariance_diagonal, sir_indices, Decay, ImportanceConfig, Model, PriorConfig};
use crate::sim::derive_seed;
use crate::sphere::{from_srd, to_srd, Srd};

/// Identifier written into every result bundle.
pub const SCHEMA: &str = "warpbayes.result.v1";

/// Where the importance function is centered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "path")]
pub enum ImportanceMean {
    #[default]
    Identity,
    /// The dynamic-programming solution.
    DpSolution,
    /// A warp read from a CSV file.
    File(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n: usize,
    pub samples: usize,
    pub resample: usize,
    /// `None` means `N - 1`.
    pub m: Option<usize>,
    pub sigma2: f64,
    pub decay: Decay,
    pub gamma_alpha: f64,
    pub gamma_beta: f64,
    pub k_max: usize,
    pub mode_threshold: f64,
    pub level: f64,
    pub seed: u64,
    pub importance_mean: ImportanceMean,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 100,
            samples: 50_000,
            resample: 200,
            m: None,
            sigma2: 1000.0,
            decay: Decay::Quadratic,
            gamma_alpha: 1.0,
            gamma_beta: 0.01,
            k_max: DEFAULT_K_MAX,
            mode_threshold: DEFAULT_MODE_THRESHOLD,
            level: 0.95,
            seed: 0,
            importance_mean: ImportanceMean::Identity,
        }
    }
}

impl RunConfig {
    pub fn basis_size(&self) -> usize {
        self.m.unwrap_or(self.n.saturating_sub(1))
    }

    pub fn prior(&self) -> PriorConfig {
        PriorConfig {
            sigma2: self.sigma2,
            decay: self.decay,
            m: self.basis_size(),
            gamma_alpha: self.gamma_alpha,
            gamma_beta: self.gamma_beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return invalid(format!("grid size must be at least 3, got {}", self.n));
        }
        if self.samples == 0 || self.resample == 0 || self.k_max == 0 {
            return invalid("samples, resample and k-max must be positive");
        }
        if self.resample > self.samples {
            return invalid(format!(
                "resample size {} exceeds sample size {}",
                self.resample, self.samples
            ));
        }
        let m = self.basis_size();
        if m == 0 || m > self.n - 1 {
            return invalid(format!(
                "basis size m = {m} must lie in 1..={}; lower --m or raise --n",
                self.n - 1
            ));
        }
        if !(self.mode_threshold > 0.0 && self.mode_threshold < 1.0) {
            return invalid(format!(
                "mode threshold must lie in (0, 1), got {}",
                self.mode_threshold
            ));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return invalid(format!(
                "credible level must lie in (0, 1), got {}",
                self.level
            ));
        }
        self.prior().validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub config: RunConfig,
    pub inputs: Vec<InputDigest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceStats {
    pub total: usize,
    pub retained: usize,
    pub outside_support: usize,
    pub effective_sample_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub schema: String,
    pub provenance: Provenance,
    pub grid: Vec<f64>,
    /// `f1` and `f2` on the grid.
    pub functions: Vec<SampledFunction>,
    pub importance: ImportanceStats,
    /// Resampled posterior warps.
    pub samples: Vec<WarpingFunction>,
    /// Log importance weights of the resampled draws.
    pub log_weights: Vec<f64>,
    pub log_posterior: Vec<f64>,
    pub clusters: ClusterResult,
    pub summaries: Vec<PosteriorSummary>,
    pub dp_warp: WarpingFunction,
    pub dp_distance: f64,
    pub dpd_dp: Option<f64>,
    pub no_warp_distance: f64,
}

impl ResultBundle {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bundle: Self = serde_json::from_str(text)?;
        if bundle.schema != SCHEMA {
            return invalid(format!(
                "unsupported schema '{}', expected '{SCHEMA}'",
                bundle.schema
            ));
        }
        Ok(bundle)
    }
}

/// Aligns `f2` to `f1`: SRSFs, importance sampling, resampling, mode
/// selection, per-mode summaries and the DP baseline.
///
/// `file_mean` supplies the importance mean for [`ImportanceMean::File`].
pub fn align(
    f1: &SampledFunction,
    f2: &SampledFunction,
    cfg: &RunConfig,
    inputs: Vec<InputDigest>,
    file_mean: Option<&WarpingFunction>,
) -> Result<ResultBundle> {
    cfg.validate()?;
    check_len(f1.len(), cfg.n)?;
    check_len(f2.len(), cfg.n)?;
    let q1 = compute_srsf(f1)?;
    let q2 = compute_srsf(f2)?;
    let prior = cfg.prior();

    let dp = dp_solve(&q1, &q2, &DpConfig::default())?;
    let mean = match (&cfg.importance_mean, file_mean) {
        (ImportanceMean::Identity, _) => Srd::identity(cfg.n),
        (ImportanceMean::DpSolution, _) => to_srd(&dp.gamma)?,
        (ImportanceMean::File(_), Some(g)) => {
            check_len(g.len(), cfg.n)?;
            to_srd(g)?
        }
        (ImportanceMean::File(p), None) => {
            return invalid(format!("importance mean file '{p}' was not loaded"))
        }
    };
    let importance = ImportanceConfig::new(
        mean,
        covariance_diagonal(prior.sigma2, prior.decay, prior.m),
    )?;
    let model = Model::new(q1.clone(), q2.clone(), prior, importance)?;
    let run = model.run(cfg.samples, cfg.seed)?;
    let idx = sir_indices(
        &run.log_weights(),
        cfg.resample,
        derive_seed(cfg.seed, u64::MAX),
    )?;
    let psis: Vec<Srd> = idx.iter().map(|&i| run.draws[i].psi.clone()).collect();
    let log_weights: Vec<f64> = idx.iter().map(|&i| run.draws[i].log_weight).collect();
    let log_posterior: Vec<f64> = idx.iter().map(|&i| run.draws[i].log_posterior).collect();

    let clusters = if psis.len() >= 4 {
        select_num_modes(&psis, cfg.k_max, cfg.mode_threshold)?
    } else {
        crate::analysis::cluster_fixed_k(
            &psis,
            &crate::analysis::pairwise_distance_matrix(&psis)?,
            1,
        )?
    };
    let summaries = (0..clusters.k)
        .map(|c| {
            let m = clusters.members(c);
            let ps: Vec<Srd> = m.iter().map(|&i| psis[i].clone()).collect();
            let lp: Vec<f64> = m.iter().map(|&i| log_posterior[i]).collect();
            summarize(&ps, &lp, &q1, &q2, cfg.level)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ResultBundle {
        schema: SCHEMA.to_string(),
        provenance: Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.clone(),
            inputs,
        },
        grid: grid(cfg.n),
        functions: vec![f1.clone(), f2.clone()],
        importance: ImportanceStats {
            total: run.total,
            retained: run.draws.len(),
            outside_support: run.outside_support,
            effective_sample_size: run.effective_sample_size(),
        },
        samples: psis.iter().map(from_srd).collect::<Result<_>>()?,
        log_weights,
        log_posterior,
        clusters,
        summaries,
        dpd_dp: crate::analysis::dpd_or_none(&q1, &q2, &dp.gamma)?,
        dp_distance: dp.cost.sqrt(),
        dp_warp: dp.gamma,
        no_warp_distance: l2_distance(&q1, &q2)?,
    })
}

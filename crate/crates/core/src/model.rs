//! Truncated wrapped-normal prior, wrapped-normal importance function,
//! marginal likelihood and sampling-importance-resampling.
//!
//! The likelihood models the `N` pointwise SRSF differences as Gaussian with
//! precision `2κ`; with a `Gamma(α, β)` prior on `κ` the marginal over `κ` is
//! `Γ(N/2 + α) / (β + SS)^(N/2 + α)`, where `SS` is the plain sum of squared
//! differences. All weights stay in the log domain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::basis::{CoefficientVector, OrthonormalBasis};
use crate::error::{check_len, invalid, AlignError, Result};
use crate::function::{sum_squared_diff, warp_srsf, Srsf};
use crate::sphere::{exp_map_raw, from_srd, Srd, TangentVector};

/// Samples per RNG stream. Results do not depend on how blocks are spread
/// over threads.
pub const SAMPLE_BLOCK: usize = 1024;

/// Draws whose smallest SRD value falls below this are outside the support.
pub const SUPPORT_FLOOR: f64 = 1e-6;

const SIR_SYSTEMATIC_ROUNDS: usize = 8;

/// Decay of the prior variances with the basis index `j = 1..m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Decay {
    None,
    Linear,
    #[default]
    Quadratic,
}

impl std::str::FromStr for Decay {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "none" => Ok(Decay::None),
            "linear" => Ok(Decay::Linear),
            "quadratic" => Ok(Decay::Quadratic),
            other => Err(format!(
                "unknown decay '{other}' (expected none, linear or quadratic)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub sigma2: f64,
    pub decay: Decay,
    /// Number of basis elements.
    pub m: usize,
    pub gamma_alpha: f64,
    pub gamma_beta: f64,
}

impl PriorConfig {
    /// Default hyperparameters: `σ² = 1000`, quadratic decay, `α = 1`, `β = 0.01`.
    pub fn new(m: usize) -> Self {
        Self {
            sigma2: 1000.0,
            decay: Decay::Quadratic,
            m,
            gamma_alpha: 1.0,
            gamma_beta: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return invalid(format!("sigma2 must be positive, got {}", self.sigma2));
        }
        if !(self.gamma_alpha > 0.0 && self.gamma_beta > 0.0) {
            return invalid("gamma prior parameters must be positive");
        }
        if self.m == 0 {
            return invalid("basis size must be positive");
        }
        Ok(())
    }
}

/// Diagonal of the prior covariance in basis order.
pub fn build_covariance(cfg: &PriorConfig) -> Vec<f64> {
    covariance_diagonal(cfg.sigma2, cfg.decay, cfg.m)
}

pub fn covariance_diagonal(sigma2: f64, decay: Decay, m: usize) -> Vec<f64> {
    (1..=m)
        .map(|j| {
            let j = j as f64;
            match decay {
                Decay::None => sigma2,
                Decay::Linear => sigma2 / j,
                Decay::Quadratic => sigma2 / j.powi(4),
            }
        })
        .collect()
}

/// Wrapped normal importance function: mean SRD and diagonal covariance in
/// the transported basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceConfig {
    pub mean: Srd,
    pub covariance: Vec<f64>,
}

impl ImportanceConfig {
    pub fn new(mean: Srd, covariance: Vec<f64>) -> Result<Self> {
        if covariance.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return invalid("importance covariance must be finite and non-negative");
        }
        if mean.min_value() < 0.0 {
            return invalid("importance mean must lie in the positive orthant");
        }
        Ok(Self { mean, covariance })
    }

    /// The prior itself: mean at the identity, same covariance.
    pub fn from_prior(prior: &PriorConfig, n_grid: usize) -> Self {
        Self {
            mean: Srd::identity(n_grid),
            covariance: build_covariance(prior),
        }
    }
}

/// One importance draw with its coordinates in both tangent frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedWarpSample {
    pub psi: Srd,
    /// `None` until [`log_weight`] has been evaluated; `-inf` outside the support.
    pub log_weight: Option<f64>,
    /// Coordinates of `log_1(psi)` in the prior basis at the identity.
    pub coeffs_prior: CoefficientVector,
    /// Coordinates of `log_mu(psi)` in the importance basis at `mu`.
    pub coeffs_importance: CoefficientVector,
    /// Whether the draw lies in the valid set before clamping. Coordinates
    /// are NaN when it does not.
    pub in_support: bool,
}

/// Gaussian quadratic form `sum c_j^2 / K_j`, ignoring zero-variance axes
/// with zero coordinate.
fn quadratic_form(c: &[f64], cov: &[f64]) -> f64 {
    c.iter()
        .zip(cov)
        .map(|(x, k)| if *x == 0.0 { 0.0 } else { x * x / k })
        .sum()
}

/// Log prior density up to an additive constant: `-½ cᵀK⁻¹c`, or `-inf`
/// outside the support.
pub fn prior_log_density(psi: &Srd, cfg: &PriorConfig, basis: &OrthonormalBasis) -> Result<f64> {
    check_len(cfg.m, basis.len())?;
    if psi.min_value() < SUPPORT_FLOOR {
        return Ok(f64::NEG_INFINITY);
    }
    let c = basis.project(psi)?;
    Ok(-0.5 * quadratic_form(c.values(), &build_covariance(cfg)))
}

/// Log of the likelihood with `κ` integrated out:
/// `ln Γ(N/2 + α) - (N/2 + α) ln(β + SS)`.
pub fn log_integrated_likelihood(
    q1: &Srsf,
    q2: &Srsf,
    psi: &Srd,
    cfg: &PriorConfig,
) -> Result<f64> {
    check_len(q1.len(), q2.len())?;
    check_len(q1.len(), psi.len())?;
    let gamma = from_srd(psi)?;
    let q2w = warp_srsf(q2, &gamma)?;
    let ss = sum_squared_diff(q1.values(), q2w.values());
    log_marginal_from_ss(ss, q1.len(), cfg)
}

pub(crate) fn log_marginal_from_ss(ss: f64, n: usize, cfg: &PriorConfig) -> Result<f64> {
    if !ss.is_finite() {
        return invalid("non-finite residual sum of squares");
    }
    let shape = n as f64 / 2.0 + cfg.gamma_alpha;
    Ok(ln_gamma(shape) - shape * (cfg.gamma_beta + ss).ln())
}

/// Log importance weight: log marginal likelihood plus log prior minus log
/// importance density (the last two as Gaussian quadratic forms in their
/// tangent coordinates).
pub fn log_weight(
    sample: &WeightedWarpSample,
    q1: &Srsf,
    q2: &Srsf,
    prior: &PriorConfig,
    imp: &ImportanceConfig,
) -> Result<f64> {
    if !sample.in_support || sample.psi.min_value() < SUPPORT_FLOOR {
        return Ok(f64::NEG_INFINITY);
    }
    check_len(sample.coeffs_prior.len(), prior.m)?;
    check_len(sample.coeffs_importance.len(), imp.covariance.len())?;
    let ll = log_integrated_likelihood(q1, q2, &sample.psi, prior)?;
    let kprior = build_covariance(prior);
    Ok(
        ll - 0.5 * quadratic_form(sample.coeffs_prior.values(), &kprior)
            + 0.5 * quadratic_form(sample.coeffs_importance.values(), &imp.covariance),
    )
}

fn block_rng(seed: u64, block: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block as u64);
    rng
}

fn draw_one(
    rng: &mut ChaCha8Rng,
    imp: &ImportanceConfig,
    prior_basis: &OrthonormalBasis,
    imp_basis: &OrthonormalBasis,
    std: &[f64],
) -> Result<WeightedWarpSample> {
    let d: Vec<f64> = std
        .iter()
        .map(|s| {
            let z: f64 = rng.sample(StandardNormal);
            z * s
        })
        .collect();
    let v = imp_basis.reconstruct(&CoefficientVector::new(d))?;
    let raw = exp_map_raw(imp.mean.values(), v.values());
    let in_support = raw.iter().all(|x| *x >= SUPPORT_FLOOR);
    if !in_support {
        // Coordinates are left undefined outside the support.
        let psi = Srd::new(raw).unwrap_or_else(|_| imp.mean.clone());
        let nan = CoefficientVector::new(vec![f64::NAN; std.len()]);
        return Ok(WeightedWarpSample {
            psi,
            log_weight: None,
            coeffs_prior: CoefficientVector::new(vec![f64::NAN; prior_basis.len()]),
            coeffs_importance: nan,
            in_support,
        });
    }
    let psi = Srd::new(raw)?;
    let coeffs_prior = prior_basis.project(&psi)?;
    let coeffs_importance = if imp_basis.basepoint() == prior_basis.basepoint()
        && imp_basis.len() == prior_basis.len()
    {
        coeffs_prior.clone()
    } else {
        imp_basis.project(&psi)?
    };
    Ok(WeightedWarpSample {
        psi,
        log_weight: None,
        coeffs_prior,
        coeffs_importance,
        in_support,
    })
}

fn check_bases(
    imp: &ImportanceConfig,
    prior_basis: &OrthonormalBasis,
    imp_basis: &OrthonormalBasis,
) -> Result<()> {
    check_len(imp.covariance.len(), imp_basis.len())?;
    check_len(imp.mean.len(), imp_basis.grid_len())?;
    check_len(prior_basis.grid_len(), imp_basis.grid_len())?;
    if imp_basis.basepoint() != &imp.mean {
        return invalid("importance basis must be transported to the importance mean");
    }
    Ok(())
}

/// Draws `count` samples from the wrapped normal importance function:
/// `d_k = z_k sqrt(K_h(k))`, `v = sum d_k b_k`, `psi = exp_mu(v)`.
///
/// Block `b` of [`SAMPLE_BLOCK`] samples uses ChaCha stream `b` of `seed`, so
/// the output is identical for any thread count.
pub fn sample_importance(
    imp: &ImportanceConfig,
    prior_basis: &OrthonormalBasis,
    imp_basis: &OrthonormalBasis,
    count: usize,
    seed: u64,
) -> Result<Vec<WeightedWarpSample>> {
    check_bases(imp, prior_basis, imp_basis)?;
    let std: Vec<f64> = imp.covariance.iter().map(|k| k.sqrt()).collect();
    let blocks = count.div_ceil(SAMPLE_BLOCK);
    let per_block: Vec<Result<Vec<WeightedWarpSample>>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(seed, b);
            let len = SAMPLE_BLOCK.min(count - b * SAMPLE_BLOCK);
            (0..len)
                .map(|_| draw_one(&mut rng, imp, prior_basis, imp_basis, &std))
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(count);
    for block in per_block {
        out.extend(block?);
    }
    Ok(out)
}

/// Log-sum-exp normalization. Non-finite entries get weight zero; returns
/// all zeros when nothing is finite.
pub fn normalize_log_weights(log_w: &[f64]) -> Vec<f64> {
    let max = log_w
        .iter()
        .copied()
        .filter(|x| x.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return vec![0.0; log_w.len()];
    }
    let exps: Vec<f64> = log_w
        .iter()
        .map(|x| if x.is_finite() { (x - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Kish effective sample size of normalized weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let sq: f64 = weights.iter().map(|w| w * w).sum();
    if sq > 0.0 {
        1.0 / sq
    } else {
        0.0
    }
}

/// Sampling-importance-resampling without replacement.
///
/// Returns `s` distinct indices in ascending order. Rounds of systematic
/// resampling over the not-yet-chosen weights collect distinct indices;
/// when the effective support is smaller than `s`, or the rounds stall, the
/// remainder is filled by exact sequential weighted draws without
/// replacement (Gumbel top-k).
pub fn sir_indices(log_w: &[f64], s: usize, seed: u64) -> Result<Vec<usize>> {
    let available = log_w.iter().filter(|x| x.is_finite()).count();
    if s == 0 {
        return Ok(Vec::new());
    }
    if available < s {
        return Err(AlignError::InsufficientSupport {
            needed: s,
            available,
        });
    }
    let weights = normalize_log_weights(log_w);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![false; log_w.len()];
    let mut count = 0usize;

    if effective_sample_size(&weights) >= s as f64 {
        for _ in 0..SIR_SYSTEMATIC_ROUNDS {
            let need = s - count;
            if need == 0 {
                break;
            }
            let remaining: f64 = weights
                .iter()
                .zip(&chosen)
                .filter(|(_, c)| !**c)
                .map(|(w, _)| w)
                .sum();
            if remaining <= 0.0 {
                break;
            }
            let step = remaining / need as f64;
            let mut target = rng.random::<f64>() * step;
            let mut cum = 0.0;
            let mut hits = Vec::new();
            for (i, (w, c)) in weights.iter().zip(&chosen).enumerate() {
                if *c || *w == 0.0 {
                    continue;
                }
                cum += w;
                if cum > target {
                    hits.push(i);
                    while cum > target {
                        target += step;
                    }
                }
            }
            for i in hits {
                if !chosen[i] && count < s {
                    chosen[i] = true;
                    count += 1;
                }
            }
        }
    }

    if count < s {
        let mut keyed: Vec<(f64, usize)> = log_w
            .iter()
            .enumerate()
            .filter(|(i, x)| x.is_finite() && !chosen[*i])
            .map(|(i, x)| {
                let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                (x - (-u.ln()).ln(), i)
            })
            .collect();
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for (_, i) in keyed.into_iter().take(s - count) {
            chosen[i] = true;
        }
    }

    Ok(chosen
        .iter()
        .enumerate()
        .filter(|(_, c)| **c)
        .map(|(i, _)| i)
        .collect())
}

/// Resamples `s` SRDs from weighted importance draws.
pub fn sir_resample(samples: &[WeightedWarpSample], s: usize, seed: u64) -> Result<Vec<Srd>> {
    let log_w: Vec<f64> = samples
        .iter()
        .map(|x| x.log_weight.unwrap_or(f64::NEG_INFINITY))
        .collect();
    Ok(sir_indices(&log_w, s, seed)?
        .into_iter()
        .map(|i| samples[i].psi.clone())
        .collect())
}

/// A weighted importance draw retained after filtering out zero-weight draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraw {
    pub psi: Srd,
    pub log_weight: f64,
    /// Unnormalized log posterior: log marginal likelihood plus log prior.
    pub log_posterior: f64,
}

/// Importance sampling output with zero-weight draws dropped.
#[derive(Debug, Clone)]
pub struct ImportanceRun {
    pub draws: Vec<PosteriorDraw>,
    pub total: usize,
    pub outside_support: usize,
}

impl ImportanceRun {
    pub fn log_weights(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.log_weight).collect()
    }

    pub fn effective_sample_size(&self) -> f64 {
        effective_sample_size(&normalize_log_weights(&self.log_weights()))
    }

    /// Index of the draw with the largest unnormalized log posterior.
    pub fn map_index(&self) -> Option<usize> {
        self.draws
            .iter()
            .enumerate()
            .max_by(|a, b| {
                a.1.log_posterior
                    .total_cmp(&b.1.log_posterior)
                    .then(b.0.cmp(&a.0))
            })
            .map(|(i, _)| i)
    }
}

/// Everything needed to weight draws for one pair of functions.
#[derive(Debug, Clone)]
pub struct Model {
    pub q1: Srsf,
    pub q2: Srsf,
    pub prior: PriorConfig,
    pub prior_basis: OrthonormalBasis,
    pub importance: ImportanceConfig,
    pub importance_basis: OrthonormalBasis,
}

impl Model {
    /// Builds the prior basis at the identity and transports it to the
    /// importance mean.
    pub fn new(
        q1: Srsf,
        q2: Srsf,
        prior: PriorConfig,
        importance: ImportanceConfig,
    ) -> Result<Self> {
        prior.validate()?;
        check_len(q1.len(), q2.len())?;
        check_len(q1.len(), importance.mean.len())?;
        check_len(importance.covariance.len(), prior.m)?;
        let prior_basis = OrthonormalBasis::at_identity(prior.m, q1.len())?;
        Self::with_basis(q1, q2, prior, importance, prior_basis)
    }

    /// As [`Model::new`] but reusing an already built prior basis.
    pub fn with_basis(
        q1: Srsf,
        q2: Srsf,
        prior: PriorConfig,
        importance: ImportanceConfig,
        prior_basis: OrthonormalBasis,
    ) -> Result<Self> {
        check_len(prior.m, prior_basis.len())?;
        check_len(q1.len(), prior_basis.grid_len())?;
        let importance_basis = prior_basis.transport(&importance.mean)?;
        Ok(Self {
            q1,
            q2,
            prior,
            prior_basis,
            importance,
            importance_basis,
        })
    }

    pub fn log_posterior(&self, psi: &Srd) -> Result<f64> {
        let prior = prior_log_density(psi, &self.prior, &self.prior_basis)?;
        if prior == f64::NEG_INFINITY {
            return Ok(prior);
        }
        Ok(log_integrated_likelihood(&self.q1, &self.q2, psi, &self.prior)? + prior)
    }

    /// Draws `count` importance samples, weights them and keeps those with
    /// finite weight. Deterministic in `seed` for any thread count.
    pub fn run(&self, count: usize, seed: u64) -> Result<ImportanceRun> {
        check_bases(&self.importance, &self.prior_basis, &self.importance_basis)?;
        let std: Vec<f64> = self
            .importance
            .covariance
            .iter()
            .map(|k| k.sqrt())
            .collect();
        let kprior = build_covariance(&self.prior);
        let blocks = count.div_ceil(SAMPLE_BLOCK);
        let per_block: Vec<Result<(Vec<PosteriorDraw>, usize)>> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut rng = block_rng(seed, b);
                let len = SAMPLE_BLOCK.min(count - b * SAMPLE_BLOCK);
                let mut kept = Vec::new();
                let mut outside = 0;
                for _ in 0..len {
                    let sample = draw_one(
                        &mut rng,
                        &self.importance,
                        &self.prior_basis,
                        &self.importance_basis,
                        &std,
                    )?;
                    if !sample.in_support {
                        outside += 1;
                        continue;
                    }
                    let ll =
                        log_integrated_likelihood(&self.q1, &self.q2, &sample.psi, &self.prior)?;
                    let lp = -0.5 * quadratic_form(sample.coeffs_prior.values(), &kprior);
                    let lh = -0.5
                        * quadratic_form(
                            sample.coeffs_importance.values(),
                            &self.importance.covariance,
                        );
                    let log_weight = ll + lp - lh;
                    if log_weight.is_finite() {
                        kept.push(PosteriorDraw {
                            psi: sample.psi,
                            log_weight,
                            log_posterior: ll + lp,
                        });
                    }
                }
                Ok((kept, outside))
            })
            .collect();
        let mut draws = Vec::new();
        let mut outside_support = 0;
        for block in per_block {
            let (d, o) = block?;
            draws.extend(d);
            outside_support += o;
        }
        Ok(ImportanceRun {
            draws,
            total: count,
            outside_support,
        })
    }
}

/// Convenience: tangent vector at the importance mean from coefficients.
pub fn importance_tangent(basis: &OrthonormalBasis, d: &[f64]) -> Result<TangentVector> {
    basis.reconstruct(&CoefficientVector::new(d.to_vec()))
}

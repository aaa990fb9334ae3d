//! Dispersion sweeps and cross-validation scores for linear model spaces.

use jointprior_core::averaging_shrinkage::{inclusion_probs, ModelPosterior};
use jointprior_core::linear_exact::{
    cv_score, gprior_log_prior_weight, log_marginal_nig, CandidateModel, CvMode, CvScore, GpriorSummary, GramCache, LinearDataset,
};
use jointprior_core::marginal::ConstantConvention;
use jointprior_core::model_space::{log_prior_model_weight, ModelId, ModelPriorPolicy, ENUMERATION_CAP};
use jointprior_core::param_priors::{gprior_base, BaseStructure, InformationSource, ParamPrior};
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::config::{BaseKind, PriorTemplate};
use crate::error::{BenchError, Result};

/// All subsets of `covariates` (0-based), each with the template's intercept choice.
pub fn subset_models(covariates: &[usize], intercept: bool) -> Result<Vec<ModelId>> {
    let k = covariates.len();
    if k > ENUMERATION_CAP {
        return Err(BenchError::core("model space", jointprior_core::Error::Capacity { requested: k, cap: ENUMERATION_CAP }));
    }
    let mut models = (0u32..(1u32 << k))
        .map(|mask| {
            let c: Vec<usize> = (0..k).filter(|&j| mask & (1 << j) != 0).map(|j| covariates[j]).collect();
            ModelId::linear(intercept, &c)
        })
        .collect::<jointprior_core::Result<Vec<_>>>()?;
    models.sort();
    Ok(models)
}

/// Parses `"X4+X5"` style labels (`"1"` alone is the intercept-only model).
pub fn parse_linear_model(data: &LinearDataset, label: &str, intercept: bool) -> Result<ModelId> {
    let mut cov = Vec::new();
    for part in label.split('+').map(str::trim).filter(|p| !p.is_empty() && *p != "1") {
        let j = data
            .labels()
            .iter()
            .position(|l| l == part)
            .ok_or_else(|| BenchError::Parse(format!("unknown covariate {part:?} in model {label:?}")))?;
        cov.push(j);
    }
    Ok(ModelId::linear(intercept, &cov)?)
}

/// NIG parameter prior of `m` at dispersion `c2`.
pub fn linear_prior(template: &PriorTemplate, data: &LinearDataset, m: &ModelId, c2: f64) -> Result<ParamPrior> {
    let ctx = |e| BenchError::core(format!("prior for {}", m.label(data.labels())), e);
    let x = data.full_rank_design(m).map_err(ctx)?;
    let (base, structure) = match template.base {
        BaseKind::Gprior => (gprior_base(&x).map_err(ctx)?, BaseStructure::Gprior),
        BaseKind::Independence => (DMatrix::identity(x.ncols(), x.ncols()), BaseStructure::Independence),
    };
    let prior = ParamPrior::centered(base, structure, c2).map_err(ctx)?;
    if template.alpha == 0.0 && template.lambda == 0.0 {
        Ok(prior.with_improper_sigma2())
    } else {
        prior.with_nig(template.alpha, template.lambda).map_err(ctx)
    }
}

pub fn log_weight(policy: &ModelPriorPolicy, data: &LinearDataset, m: &ModelId, prior: &ParamPrior) -> Result<f64> {
    let ctx = |e| BenchError::core(format!("prior weight for {}", m.label(data.labels())), e);
    let info = if policy.needs_information() {
        Some(InformationSource::linear(&data.full_rank_design(m).map_err(ctx)?).map_err(ctx)?)
    } else {
        None
    };
    log_prior_model_weight(m, policy, prior, info.as_ref()).map_err(ctx)
}

/// Per-space precomputation for repeated posterior evaluations.
pub struct LinearSpace<'a> {
    pub data: &'a LinearDataset,
    pub models: Vec<ModelId>,
    pub template: PriorTemplate,
    /// Present when the g-prior closed form applies (g-prior base, intercept in every model).
    summaries: Option<Vec<GpriorSummary>>,
}

impl<'a> LinearSpace<'a> {
    pub fn new(data: &'a LinearDataset, models: Vec<ModelId>, template: PriorTemplate) -> Result<Self> {
        let fast = template.base == BaseKind::Gprior && models.iter().all(ModelId::has_intercept);
        let summaries = if fast {
            let cache = GramCache::new(data);
            Some(
                models
                    .par_iter()
                    .map(|m| cache.summary(m).map_err(|e| BenchError::core(format!("model {}", m.label(data.labels())), e)))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        Ok(Self { data, models, template, summaries })
    }

    pub fn uses_closed_form(&self) -> bool {
        self.summaries.is_some()
    }

    /// Posterior model probabilities at `c2` under `policy`.
    pub fn posterior(&self, policy: &ModelPriorPolicy, c2: f64) -> Result<ModelPosterior> {
        if !(c2 > 0.0) || !c2.is_finite() {
            return Err(BenchError::Parse(format!("c² must be positive, got {c2}")));
        }
        let t = &self.template;
        let at = |e| BenchError::core(format!("c2={c2:e}"), e);
        let (weights, convention) = if let Some(s) = &self.summaries {
            let w = self
                .models
                .iter()
                .zip(s)
                .map(|(m, s)| {
                    let log_p = policy.baseline.log_p(m).map_err(at)?;
                    let lw = gprior_log_prior_weight(policy.variant, log_p, s.d, s.n, c2).map_err(at)?;
                    Ok((m.clone(), lw + s.log_kernel(c2, t.alpha, t.lambda)))
                })
                .collect::<Result<Vec<_>>>()?;
            (w, ConstantConvention::Kernel)
        } else {
            let w = self
                .models
                .iter()
                .map(|m| {
                    let prior = linear_prior(t, self.data, m, c2)?;
                    let lw = log_weight(policy, self.data, m, &prior)?;
                    let lm = log_marginal_nig(self.data, m, &prior).map_err(at)?;
                    Ok((m.clone(), (lw + lm.value, lm.convention)))
                })
                .collect::<Result<Vec<_>>>()?;
            let conv = w.first().map_or(ConstantConvention::Full, |(_, (_, c))| *c);
            (w.into_iter().map(|(m, (v, _))| (m, v)).collect(), conv)
        };
        ModelPosterior::from_log_weights(weights, convention).map(|p| p.with_policy(policy.name())).map_err(at)
    }

    /// Candidate list for cross-validation. Priors and weights are those of
    /// the full data and stay fixed when rows are left out.
    pub fn candidates(&self, policy: &ModelPriorPolicy, c2: f64) -> Result<Vec<CandidateModel>> {
        self.models
            .iter()
            .map(|m| {
                let prior = linear_prior(&self.template, self.data, m, c2)?;
                let log_prior_weight = log_weight(policy, self.data, m, &prior)?;
                Ok(CandidateModel { id: m.clone(), prior, log_prior_weight })
            })
            .collect()
    }
}

/// One grid point of a sweep.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub policy: String,
    pub c2: f64,
    pub posterior: ModelPosterior,
    pub inclusion: Vec<f64>,
}

/// Posterior probabilities and inclusion probabilities at every `(policy, c²)` pair,
/// evaluated concurrently and returned in grid order.
pub fn run_sweep(space: &LinearSpace<'_>, policies: &[ModelPriorPolicy], grid: &[f64]) -> Result<Vec<SweepPoint>> {
    if grid.is_empty() || policies.is_empty() {
        return Err(BenchError::Parse("sweep needs at least one policy and one grid point".into()));
    }
    let jobs: Vec<(&ModelPriorPolicy, f64)> = policies.iter().flat_map(|p| grid.iter().map(move |&c| (p, c))).collect();
    jobs.par_iter()
        .map(|&(policy, c2)| {
            let posterior = space.posterior(policy, c2)?;
            let inclusion = inclusion_probs(&posterior, space.data.p()).map_err(|e| BenchError::core("inclusion", e))?;
            Ok(SweepPoint { policy: policy.name().to_string(), c2, posterior, inclusion })
        })
        .collect()
}

/// Exact cross-validation score at every `(policy, c²)` pair.
pub fn cv_sweep(
    space: &LinearSpace<'_>,
    policies: &[ModelPriorPolicy],
    grid: &[f64],
    weighting: jointprior_core::linear_exact::CvWeighting,
) -> Result<Vec<(String, f64, CvScore)>> {
    let jobs: Vec<(&ModelPriorPolicy, f64)> = policies.iter().flat_map(|p| grid.iter().map(move |&c| (p, c))).collect();
    jobs.par_iter()
        .map(|&(policy, c2)| {
            let cands = space.candidates(policy, c2)?;
            let s = cv_score(&cands, space.data, CvMode::Exact(weighting)).map_err(|e| BenchError::core(format!("cv at c2={c2:e}"), e))?;
            Ok((policy.name().to_string(), c2, s))
        })
        .collect()
}

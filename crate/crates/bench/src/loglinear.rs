//! Log-linear model spaces: named term priors, prior and posterior model
//! probabilities, and sampler targets.

use jointprior_core::glm_laplace::{
    build_design, log_marginal_laplace_table, ContingencyTable, LaplaceVariant, TermPrior, TermPriorSet, TermScale,
};
use jointprior_core::marginal::ConstantConvention;
use jointprior_core::model_space::{
    enumerate_hierarchical_models, log_prior_model_weight, Baseline, Factor, FactorSpec, ModelId, ModelPriorPolicy, Term,
};
use jointprior_core::param_priors::{InfoReference, InformationSource, ParamPrior};
use jointprior_core::rj_sampler::{RjData, RjModel, RjTarget};
use jointprior_core::averaging_shrinkage::ModelPosterior;

use crate::config::{LoglinearSection, Preset, TermScaleConfig};
use crate::error::{BenchError, Result};

/// Prior mean of the hypertension × alcohol interaction used by the KS prior.
pub const KS_HA_MEAN: [f64; 3] = [0.204, -0.088, -0.271];
/// `k²` of the informative `HA` block.
pub const KS_HA_K2: f64 = 0.05;
/// Default `k²` standing in for an infinitely diffuse block.
pub const KS_DIFFUSE_K2: f64 = 1e4;
/// Variance of every coefficient under the IND prior.
pub const IND_VARIANCE: f64 = 1e3;

/// Obesity (3) × hypertension (2) × alcohol (4) with all main effects forced
/// and candidate interactions `OH` and `HA`.
pub fn obesity_spec() -> FactorSpec {
    let f = |name: &str, levels| Factor { name: name.into(), levels };
    let spec = FactorSpec::new(vec![f("O", 3), f("H", 2), f("A", 4)], vec![], vec![]).expect("valid factors");
    let t = |s: &str| spec.parse_term(s).expect("declared factor");
    FactorSpec::new(spec.factors().to_vec(), vec![Term::INTERCEPT, t("O"), t("H"), t("A")], vec![t("OH"), t("HA")])
        .expect("valid term sets")
}

fn scale(s: TermScaleConfig) -> TermScale {
    match s {
        TermScaleConfig::XtxInverse => TermScale::XtxInverse,
        TermScaleConfig::Identity => TermScale::Identity,
    }
}

/// Term priors of a named preset. `ks_k2` replaces the diffuse `k²` of KS.
pub fn preset_priors(preset: Preset, spec: &FactorSpec, ks_k2: f64) -> Result<TermPriorSet> {
    let two_n = 2.0 * spec.n_cells() as f64;
    let ha = || spec.parse_term("HA").map_err(|e| BenchError::core("preset needs factors H and A", e));
    let informative =
        |s: TermScale| TermPrior { k2: KS_HA_K2, scale: s, mean: Some(KS_HA_MEAN.to_vec()) };
    Ok(match preset {
        Preset::Df => TermPriorSet::uniform(two_n, TermScale::XtxInverse),
        Preset::Ks => TermPriorSet::uniform(ks_k2, TermScale::XtxInverse).with_term(ha()?, informative(TermScale::XtxInverse)),
        Preset::KsDf => TermPriorSet::uniform(two_n, TermScale::XtxInverse).with_term(ha()?, informative(TermScale::XtxInverse)),
        Preset::Ind => TermPriorSet::uniform(IND_VARIANCE, TermScale::Identity),
        Preset::IndHa => TermPriorSet::uniform(IND_VARIANCE, TermScale::Identity).with_term(ha()?, informative(TermScale::Identity)),
    })
}

/// `log p(m) = −(d_m/2) log 2`.
pub fn half_log2_baseline() -> Baseline {
    Baseline::PerDimension { weight: std::f64::consts::FRAC_1_SQRT_2 }
}

/// Builds the factor layout, level labels and term priors of a `[loglinear]` section.
pub fn from_section(sec: &LoglinearSection) -> Result<(FactorSpec, Vec<Vec<String>>, TermPriorSet)> {
    let factors: Vec<Factor> = sec.factors.iter().map(|f| Factor { name: f.name.clone(), levels: f.labels().len() }).collect();
    let labels = sec.factors.iter().map(|f| f.labels()).collect();
    let bare = FactorSpec::new(factors.clone(), vec![], vec![]).map_err(|e| BenchError::core("factors", e))?;
    let parse = |s: &String| bare.parse_term(s).map_err(|e| BenchError::core("term", e));
    let forced = sec.forced.iter().map(parse).collect::<Result<Vec<_>>>()?;
    let candidates = sec.candidates.iter().map(parse).collect::<Result<Vec<_>>>()?;
    let spec = FactorSpec::new(factors, forced, candidates).map_err(|e| BenchError::core("term sets", e))?;
    let mut priors = match sec.preset {
        Some(p) => preset_priors(p, &spec, sec.ks_k2.unwrap_or(KS_DIFFUSE_K2))?,
        None => TermPriorSet::uniform(
            sec.default_k2.unwrap_or(2.0 * spec.n_cells() as f64),
            scale(sec.default_scale.unwrap_or(TermScaleConfig::XtxInverse)),
        ),
    };
    if sec.preset.is_some() && (sec.default_k2.is_some() || sec.default_scale.is_some()) {
        return Err(BenchError::Parse("loglinear.default_k2/default_scale conflict with a preset".into()));
    }
    for o in &sec.terms {
        let t = parse(&o.term)?;
        let sc = o.scale.map(scale).unwrap_or(priors.for_term(t).scale);
        priors = priors.with_term(t, TermPrior { k2: o.k2, scale: sc, mean: o.mean.clone() });
    }
    Ok((spec, labels, priors))
}

/// Parses a model written as maximal terms joined by `+` (for example `"OH+A"`).
pub fn parse_model(spec: &FactorSpec, label: &str) -> Result<ModelId> {
    let models = enumerate_hierarchical_models(spec).map_err(|e| BenchError::core("model space", e))?;
    models
        .into_iter()
        .find(|m| spec.model_label(m) == label.trim())
        .ok_or_else(|| BenchError::Parse(format!("model {label:?} is not in the space")))
}

/// One model of a log-linear space with its prior and log prior weight.
#[derive(Clone, Debug)]
pub struct LoglinearModel {
    pub id: ModelId,
    pub label: String,
    pub prior: ParamPrior,
    pub log_prior_weight: f64,
}

/// Models of `spec` with priors and `log f(m)` under `policy`. Information
/// for the adjusted policies is evaluated at the prior mean.
pub fn weighted_models(spec: &FactorSpec, priors: &TermPriorSet, policy: &ModelPriorPolicy) -> Result<Vec<LoglinearModel>> {
    let models = enumerate_hierarchical_models(spec).map_err(|e| BenchError::core("model space", e))?;
    models
        .into_iter()
        .map(|m| {
            let label = spec.model_label(&m);
            let ctx = |e| BenchError::core(format!("model {label}"), e);
            let prior = priors.prior_for(spec, &m).map_err(ctx)?;
            let info = if policy.needs_information() {
                let x = build_design(spec, &m).map_err(ctx)?.x;
                Some(InformationSource::poisson(&x, prior.mu(), InfoReference::PriorMean).map_err(ctx)?)
            } else {
                None
            };
            let log_prior_weight = log_prior_model_weight(&m, policy, &prior, info.as_ref()).map_err(ctx)?;
            Ok(LoglinearModel { id: m, label, prior, log_prior_weight })
        })
        .collect()
}

/// Normalized prior model probabilities.
pub fn prior_probabilities(models: &[LoglinearModel]) -> Result<ModelPosterior> {
    let w = models.iter().map(|m| (m.id.clone(), m.log_prior_weight)).collect();
    ModelPosterior::from_log_weights(w, ConstantConvention::Full).map_err(|e| BenchError::core("prior probabilities", e))
}

/// Posterior model probabilities from Laplace marginals.
pub fn posterior_probabilities(table: &ContingencyTable, models: &[LoglinearModel], variant: LaplaceVariant) -> Result<ModelPosterior> {
    let w = models
        .iter()
        .map(|m| {
            let lap = log_marginal_laplace_table(table, &m.id, &m.prior, variant).map_err(|e| BenchError::core(format!("model {}", m.label), e))?;
            Ok((m.id.clone(), m.log_prior_weight + lap.logml.value))
        })
        .collect::<Result<Vec<_>>>()?;
    ModelPosterior::from_log_weights(w, ConstantConvention::Full).map_err(|e| BenchError::core("posterior probabilities", e))
}

/// Sampler target over the log-linear space.
pub fn rj_target(table: &ContingencyTable, models: &[LoglinearModel]) -> Result<RjTarget> {
    let rj = models
        .iter()
        .map(|m| {
            let x = build_design(table.spec(), &m.id).map_err(|e| BenchError::core(format!("model {}", m.label), e))?.x;
            Ok(RjModel { id: m.id.clone(), prior: m.prior.clone(), log_prior_weight: m.log_prior_weight, x })
        })
        .collect::<Result<Vec<_>>>()?;
    RjTarget::new(rj, RjData::Poisson(table.likelihood())).map_err(|e| BenchError::core("sampler setup", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use jointprior_core::model_space::PolicyVariant;

    fn adjusted() -> ModelPriorPolicy {
        ModelPriorPolicy::new(PolicyVariant::LoglinearAdjusted, half_log2_baseline())
    }

    #[test]
    fn space_has_four_models_in_table_order() {
        let spec = obesity_spec();
        let priors = preset_priors(Preset::Df, &spec, KS_DIFFUSE_K2).unwrap();
        let models = weighted_models(&spec, &priors, &ModelPriorPolicy::uniform()).unwrap();
        let labels: Vec<&str> = models.iter().map(|m| m.label.as_str()).collect();
        assert_eq!(labels, ["O+H+A", "OH+A", "O+HA", "OH+HA"]);
        let dims: Vec<usize> = models.iter().map(|m| m.id.dim()).collect();
        assert_eq!(dims, [7, 9, 10, 12]);
        let p = prior_probabilities(&models).unwrap();
        assert!(p.probabilities().iter().all(|v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn ks_df_prior_splits_between_models_with_informative_block() {
        let spec = obesity_spec();
        let priors = preset_priors(Preset::KsDf, &spec, KS_DIFFUSE_K2).unwrap();
        let p = prior_probabilities(&weighted_models(&spec, &priors, &adjusted()).unwrap()).unwrap().probabilities();
        assert!((p[0] - 0.5).abs() < 0.02 && (p[1] - 0.5).abs() < 0.02, "{p:?}");
        assert!(p[2] < 1e-4 && p[3] < 1e-4);
    }

    #[test]
    fn section_builds_priors_and_model_lookup() {
        let text = r#"
factors = [{ name = "O", levels = 3 }, { name = "H", levels = ["yes", "no"] }, { name = "A", levels = 4 }]
forced = ["1", "O", "H", "A"]
candidates = ["OH", "HA"]
preset = "ks"
ks_k2 = 1000.0
"#;
        let sec: LoglinearSection = toml::from_str(text).unwrap();
        let (spec, labels, priors) = from_section(&sec).unwrap();
        assert_eq!(labels[1], ["yes", "no"]);
        assert_eq!(priors.default.k2, 1000.0);
        let ha = spec.parse_term("HA").unwrap();
        assert_eq!(priors.for_term(ha).k2, KS_HA_K2);
        assert_eq!(spec.model_label(&parse_model(&spec, "OH+A").unwrap()), "OH+A");
        assert!(parse_model(&spec, "OA+H").is_err());
    }
}

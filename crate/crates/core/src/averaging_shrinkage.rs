//! Posterior model probabilities, inclusion probabilities, model averaging,
//! the shrinkage coefficient of a model-averaged mean, and prior
//! probabilities of unit-information neighborhoods.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginal::{ConstantConvention, LogMarginal};
use crate::model_space::ModelId;
use crate::special::{chi_square_cdf, ln_gamma, normal_log_pdf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorEntry {
    pub model: ModelId,
    /// Unnormalized `log f(m) + log f(y|m)`.
    pub log_weight: f64,
    pub log_probability: f64,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelPosterior {
    entries: Vec<PosteriorEntry>,
    convention: ConstantConvention,
    policy: Option<String>,
}

/// One model's contribution to [`normalize_posterior`].
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedModel {
    pub model: ModelId,
    pub log_prior: f64,
    pub logml: LogMarginal,
}

/// Normalizes `log f(m) + log f(y|m)` by log-sum-exp. All marginals must
/// share one constant convention.
pub fn normalize_posterior(weights: &[WeightedModel]) -> Result<ModelPosterior> {
    let first = weights.first().ok_or_else(|| Error::Contract("posterior needs at least one model".into()))?;
    let convention = first.logml.convention;
    if let Some(w) = weights.iter().find(|w| w.logml.convention != convention) {
        return Err(Error::Contract(format!(
            "model {} uses the {:?} marginal convention but {} uses {:?}",
            w.model, w.logml.convention, first.model, convention
        )));
    }
    let logs: Vec<(ModelId, f64)> = weights.iter().map(|w| (w.model.clone(), w.log_prior + w.logml.value)).collect();
    ModelPosterior::from_log_weights(logs, convention)
}

impl ModelPosterior {
    /// Normalizes raw log weights that are already on a common scale.
    pub fn from_log_weights(weights: Vec<(ModelId, f64)>, convention: ConstantConvention) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Contract("posterior needs at least one model".into()));
        }
        if let Some((m, w)) = weights.iter().find(|(_, w)| w.is_nan() || *w == f64::INFINITY) {
            return Err(Error::NumericalDomain(format!("log weight {w} for model {m}")));
        }
        let max = weights.iter().map(|(_, w)| *w).fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::NumericalDomain("every model has zero weight".into()));
        }
        let sum: f64 = weights.iter().map(|(_, w)| (w - max).exp()).sum();
        let ln_sum = sum.ln();
        let entries = weights
            .into_iter()
            .map(|(model, log_weight)| PosteriorEntry {
                model,
                log_weight,
                log_probability: log_weight - max - ln_sum,
                probability: (log_weight - max).exp() / sum,
            })
            .collect();
        Ok(Self { entries, convention, policy: None })
    }

    /// Empirical distribution (e.g. sampler visit frequencies).
    pub fn from_probabilities(probs: Vec<(ModelId, f64)>) -> Result<Self> {
        let total: f64 = probs.iter().map(|(_, p)| p).sum();
        if probs.is_empty() || !(total > 0.0) || probs.iter().any(|(_, p)| *p < 0.0) {
            return Err(Error::Contract("probabilities must be nonnegative with a positive sum".into()));
        }
        let entries = probs
            .into_iter()
            .map(|(model, p)| {
                let probability = p / total;
                PosteriorEntry { model, log_weight: probability.ln(), log_probability: probability.ln(), probability }
            })
            .collect();
        Ok(Self { entries, convention: ConstantConvention::Full, policy: None })
    }

    pub fn with_policy(mut self, name: impl Into<String>) -> Self {
        self.policy = Some(name.into());
        self
    }

    pub fn policy(&self) -> Option<&str> {
        self.policy.as_deref()
    }

    pub fn convention(&self) -> ConstantConvention {
        self.convention
    }

    pub fn entries(&self) -> &[PosteriorEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn probability(&self, m: &ModelId) -> Option<f64> {
        self.entries.iter().find(|e| &e.model == m).map(|e| e.probability)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.probability).collect()
    }

    /// Entries sorted by decreasing probability, ties in canonical model order.
    pub fn top(&self, k: usize) -> Vec<&PosteriorEntry> {
        let mut v: Vec<&PosteriorEntry> = self.entries.iter().collect();
        v.sort_by(|a, b| b.log_probability.total_cmp(&a.log_probability).then_with(|| a.model.cmp(&b.model)));
        v.truncate(k);
        v
    }
}

/// Total-variation distance between two probability vectors over the same models.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// `P(X_j ∈ m | y)` for `j = 0..p`.
pub fn inclusion_probs(posterior: &ModelPosterior, p: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; p];
    for e in posterior.entries() {
        let cov = e
            .model
            .covariates()
            .ok_or_else(|| Error::Contract("inclusion probabilities need covariate-subset models".into()))?;
        for &c in cov {
            if c >= p {
                return Err(Error::Contract(format!("covariate {c} out of range (p = {p})")));
            }
            out[c] += e.probability;
        }
    }
    for v in &mut out {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(out)
}

/// `Σ_m f(m|y) E[β_j | y, m]` over the union of coefficient labels; a
/// coefficient absent from a model contributes zero. Labels appear in order
/// of first occurrence.
pub fn model_averaged_mean(posterior: &ModelPosterior, means: &[(ModelId, Vec<(String, f64)>)]) -> Result<Vec<(String, f64)>> {
    let mut out: Vec<(String, f64)> = Vec::new();
    for e in posterior.entries() {
        let Some((_, coefs)) = means.iter().find(|(m, _)| *m == e.model) else {
            return Err(Error::Contract(format!("no posterior mean supplied for model {}", e.model)));
        };
        for (i, (label, _)) in coefs.iter().enumerate() {
            if coefs[..i].iter().any(|(l, _)| l == label) {
                return Err(Error::Contract(format!("coefficient label {label:?} appears twice in model {}", e.model)));
            }
        }
        for (label, v) in coefs {
            match out.iter_mut().find(|(l, _)| l == label) {
                Some((_, acc)) => *acc += e.probability * v,
                None => out.push((label.clone(), e.probability * v)),
            }
        }
    }
    Ok(out)
}

/// Prior odds `k` of the smaller model over the larger one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KPolicy {
    Fixed(f64),
    /// `k = kappa / c`, i.e. `f(m₁)` relative weight proportional to `c`.
    ProportionalInverseC(f64),
}

impl KPolicy {
    pub fn k(&self, c: f64) -> f64 {
        match *self {
            KPolicy::Fixed(k) => k,
            KPolicy::ProportionalInverseC(kappa) => kappa / c,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShrinkagePoint {
    pub c_inv2: f64,
    /// `f(m₁|y) E₁(β|y) / β̂`.
    pub coefficient: f64,
    pub post_prob_m1: f64,
    /// Same coefficient with `E₁` replaced by its first-order expansion.
    pub expansion_coefficient: f64,
    /// Same coefficient with `√(2π) f₁(0|y)` replaced by `exp(−i n β̂²/2)`.
    pub approx_coefficient: f64,
}

/// Shrinkage coefficient on `β̂` of the model-averaged posterior mean for
/// two nested normal models with known error variance, `β ~ N(0, c²)` under `m₁`.
pub fn shrinkage_curve(n: usize, beta_hat: f64, sigma2: f64, k_policy: KPolicy, c_inv2_grid: &[f64]) -> Result<Vec<ShrinkagePoint>> {
    if n == 0 || !(sigma2 > 0.0) || beta_hat == 0.0 || !beta_hat.is_finite() {
        return Err(Error::Contract("shrinkage curve needs n > 0, sigma2 > 0 and a nonzero finite estimate".into()));
    }
    let info = 1.0 / sigma2;
    let prec_lik = n as f64 * info;
    c_inv2_grid
        .iter()
        .map(|&ci2| {
            if !(ci2 > 0.0) || !ci2.is_finite() {
                return Err(Error::Contract(format!("c^-2 must be positive, got {ci2}")));
            }
            let c = ci2.powf(-0.5);
            let k = k_policy.k(c);
            let post_prec = prec_lik + ci2;
            let e1 = beta_hat * prec_lik / post_prec;
            let log_f1_zero = normal_log_pdf(0.0, e1, 1.0 / post_prec);
            // 1 / (1 + k √(2π) c f₁(0|y)), with the product formed in log space
            let log_odds0 = k.ln() + 0.5 * (2.0 * PI).ln() + c.ln() + log_f1_zero;
            let p1 = logistic(-log_odds0);
            let e1_expansion = beta_hat * (1.0 - 1.0 / (info * n as f64) * ci2);
            let log_odds_approx = k.ln() + c.ln() - 0.5 * info * n as f64 * beta_hat * beta_hat;
            let p1_approx = logistic(-log_odds_approx);
            Ok(ShrinkagePoint {
                c_inv2: ci2,
                coefficient: p1 * e1 / beta_hat,
                post_prob_m1: p1,
                expansion_coefficient: p1 * e1_expansion / beta_hat,
                approx_coefficient: p1_approx * e1 / beta_hat,
            })
        })
        .collect()
}

/// `1 / (1 + e^{−x})` without overflow.
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Prior probability that `m` is true and `β_m` lies within unit-information
/// distance `epsilon` of its prior mean, for a prior with `V = c² i⁻¹`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodProb {
    /// `f(m) P(χ²_d < ε²/c²)`.
    pub exact: f64,
    /// Small-`ε` expansion `f(m) (x/2)^{d/2} / Γ(d/2 + 1)`, `x = ε²/c²`.
    pub approx: f64,
    /// The expansion with constant `2^{d/2−1}Γ(d/2)` in place of `2^{d/2}Γ(d/2+1)`,
    /// which is `d` times [`NeighborhoodProb::approx`].
    pub approx_alt_constant: f64,
}

pub fn neighborhood_prior_prob(f_m: f64, d: usize, epsilon: f64, c2: f64) -> Result<NeighborhoodProb> {
    if d == 0 || !(epsilon > 0.0) || !(c2 > 0.0) || !(f_m >= 0.0) {
        return Err(Error::Contract("neighborhood probability needs d >= 1, epsilon > 0, c2 > 0, f_m >= 0".into()));
    }
    let x = epsilon * epsilon / c2;
    let half = 0.5 * d as f64;
    let log_std = half * (0.5 * x).ln() - ln_gamma(half + 1.0);
    let log_alt = d as f64 * epsilon.ln() - (half - 1.0) * 2f64.ln() - ln_gamma(half) - half * c2.ln();
    Ok(NeighborhoodProb {
        exact: f_m * chi_square_cdf(d, x),
        approx: f_m * log_std.exp(),
        approx_alt_constant: f_m * log_alt.exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginal::MarginalMethod;

    fn lin(c: &[usize]) -> ModelId {
        ModelId::linear(true, c).unwrap()
    }

    fn wm(m: ModelId, lw: f64) -> WeightedModel {
        WeightedModel { model: m, log_prior: 0.0, logml: LogMarginal::full(lw, MarginalMethod::ExactNig) }
    }

    #[test]
    fn normalize_small_cases() {
        let p = normalize_posterior(&[wm(lin(&[]), -3.0)]).unwrap();
        assert_eq!(p.probabilities(), vec![1.0]);
        let p = normalize_posterior(&[wm(lin(&[]), 2.0), wm(lin(&[0]), 2.0)]).unwrap();
        assert_eq!(p.probabilities(), vec![0.5, 0.5]);
        let l2 = 2f64.ln();
        let p = normalize_posterior(&[wm(lin(&[]), 0.0), wm(lin(&[0]), -l2), wm(lin(&[1]), -l2)]).unwrap();
        let probs = p.probabilities();
        for (a, b) in probs.iter().zip([0.5, 0.25, 0.25]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn mixed_conventions_rejected() {
        let mut b = wm(lin(&[0]), 1.0);
        b.logml.convention = ConstantConvention::Kernel;
        assert!(matches!(normalize_posterior(&[wm(lin(&[]), 0.0), b]), Err(Error::Contract(_))));
    }

    #[test]
    fn extreme_weights_stay_finite() {
        let p = normalize_posterior(&[wm(lin(&[]), -1e5), wm(lin(&[0]), 0.0)]).unwrap();
        assert_eq!(p.probabilities()[1], 1.0);
        assert!((p.entries()[0].log_probability + 1e5).abs() < 1e-9);
    }

    #[test]
    fn inclusion_basic() {
        let p = normalize_posterior(&[wm(lin(&[0]), 0.0), wm(lin(&[1]), 0.0)]).unwrap();
        assert_eq!(inclusion_probs(&p, 2).unwrap(), vec![0.5, 0.5]);
        let p = normalize_posterior(&[wm(lin(&[0, 1, 2]), 0.0)]).unwrap();
        assert_eq!(inclusion_probs(&p, 3).unwrap(), vec![1.0; 3]);
    }

    #[test]
    fn averaged_mean_two_models() {
        let q = 0.3f64;
        let p = ModelPosterior::from_probabilities(vec![(lin(&[0]), q), (lin(&[]), 1.0 - q)]).unwrap();
        let means = vec![
            (lin(&[0]), vec![("1".to_string(), 0.5), ("X1".to_string(), 2.0)]),
            (lin(&[]), vec![("1".to_string(), 0.7)]),
        ];
        let avg = model_averaged_mean(&p, &means).unwrap();
        let x1 = avg.iter().find(|(l, _)| l == "X1").unwrap().1;
        assert!((x1 - q * 2.0).abs() < 1e-15);
        let dup = vec![(lin(&[0]), vec![("X1".to_string(), 1.0), ("X1".to_string(), 2.0)]), (lin(&[]), vec![])];
        assert!(model_averaged_mean(&p, &dup).is_err());
    }

    #[test]
    fn shrinkage_limits() {
        let big = shrinkage_curve(10, 1.0, 1.0, KPolicy::Fixed(1.0), &[1e8]).unwrap();
        assert!(big[0].coefficient < 1e-6);
        let small = shrinkage_curve(10, 1.0, 1.0, KPolicy::Fixed(1.0), &[1e-16]).unwrap();
        assert!(small[0].coefficient < 1e-3);
        assert!(shrinkage_curve(10, 1.0, 1.0, KPolicy::Fixed(1.0), &[0.0]).is_err());
    }

    #[test]
    fn neighborhood_examples() {
        let r = neighborhood_prior_prob(0.3, 2, 0.1, 1.0).unwrap();
        assert!((r.exact - 0.3 * (1.0 - (-0.005f64).exp())).abs() < 1e-15);
        let r = neighborhood_prior_prob(1.0, 1, 2.0, 4.0).unwrap();
        assert!((r.exact - 0.682_689_492_137_085_9).abs() < 1e-14);
        let r = neighborhood_prior_prob(0.6, 3, 1e3, 1.0).unwrap();
        assert!((r.exact - 0.6).abs() < 1e-14);
        for d in 1..6 {
            let r = neighborhood_prior_prob(1.0, d, 1e-3, 2.0).unwrap();
            assert!((r.approx_alt_constant / r.approx - d as f64).abs() < 1e-9);
            assert!((r.approx / r.exact - 1.0).abs() < 1e-5);
        }
    }
}

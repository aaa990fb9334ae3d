//! Model spaces (covariate subsets and hierarchical log-linear term sets) and
//! log prior model weights under the supported policies.
//!
//! A log-linear model is a set of [`Term`]s. Terms are coded with sum-to-zero
//! contrasts (see [`crate::glm_laplace::build_design`]): a factor with `L`
//! levels contributes `L − 1` columns and an interaction contributes the
//! product of its factors' column counts. Weights that depend on `|XᵀX|` are
//! coding dependent unless the prior base is built from the per-term blocks
//! `(X_jᵀ X_j)⁻¹`, in which case the coding cancels.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param_priors::{InformationKind, InformationSource, ParamPrior};

/// Largest covariate count (or candidate-term count) accepted for enumeration.
pub const ENUMERATION_CAP: usize = 25;

/// A factor-interaction term, stored as a bitmask over factor indices.
/// The empty term is the intercept.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Term(pub u32);

impl Term {
    pub const INTERCEPT: Term = Term(0);

    pub fn from_factors(factors: &[usize]) -> Term {
        Term(factors.iter().fold(0u32, |acc, &f| acc | (1 << f)))
    }

    pub fn order(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn factors(self) -> Vec<usize> {
        (0..32).filter(|&i| self.0 & (1 << i) != 0).collect()
    }

    pub fn contains(self, other: Term) -> bool {
        self.0 & other.0 == other.0
    }

    /// Terms obtained by dropping exactly one factor.
    pub fn margins(self) -> impl Iterator<Item = Term> {
        self.factors().into_iter().map(move |f| Term(self.0 & !(1 << f)))
    }
}

impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order()
            .cmp(&other.order())
            .then_with(|| self.factors().cmp(&other.factors()))
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    pub name: String,
    pub levels: usize,
}

/// Factors of a contingency table together with the forced and candidate
/// terms that span a hierarchical model space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorSpec {
    factors: Vec<Factor>,
    forced: Vec<Term>,
    candidates: Vec<Term>,
}

impl FactorSpec {
    pub fn new(factors: Vec<Factor>, forced: Vec<Term>, candidates: Vec<Term>) -> Result<Self> {
        if factors.len() > 31 {
            return Err(Error::Specification("at most 31 factors are supported".into()));
        }
        for f in &factors {
            if f.levels < 2 {
                return Err(Error::Specification(format!(
                    "factor {} must have at least 2 levels",
                    f.name
                )));
            }
        }
        for (i, f) in factors.iter().enumerate() {
            if f.name.is_empty() || factors[..i].iter().any(|g| g.name == f.name) {
                return Err(Error::Specification(format!("invalid or duplicate factor name {:?}", f.name)));
            }
        }
        let all = (1u32 << factors.len()) - 1;
        let mut forced = forced;
        let mut candidates = candidates;
        forced.sort();
        forced.dedup();
        candidates.sort();
        candidates.dedup();
        for t in forced.iter().chain(&candidates) {
            if t.0 & !all != 0 {
                return Err(Error::Specification(format!("term {t:?} references an undeclared factor")));
            }
        }
        if let Some(t) = forced.iter().find(|t| candidates.contains(t)) {
            return Err(Error::Specification(format!(
                "term {} is both forced and a candidate",
                term_label(&factors, *t)
            )));
        }
        Ok(Self { factors, forced, candidates })
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn forced(&self) -> &[Term] {
        &self.forced
    }

    pub fn candidates(&self) -> &[Term] {
        &self.candidates
    }

    pub fn n_cells(&self) -> usize {
        self.factors.iter().map(|f| f.levels).product()
    }

    /// Parameter count of a term: product of `(levels − 1)` over its factors.
    pub fn term_dim(&self, t: Term) -> usize {
        t.factors().iter().map(|&f| self.factors[f].levels - 1).product()
    }

    /// Parses a term written as concatenated single-character factor names
    /// (`"OH"`) or names joined by `:` or `*` (`"obesity:hyp"`). `"1"` and the
    /// empty string denote the intercept.
    pub fn parse_term(&self, s: &str) -> Result<Term> {
        let s = s.trim();
        if s.is_empty() || s == "1" {
            return Ok(Term::INTERCEPT);
        }
        let lookup = |name: &str| {
            self.factors
                .iter()
                .position(|f| f.name == name)
                .ok_or_else(|| Error::Specification(format!("unknown factor {name:?} in term {s:?}")))
        };
        let idx: Vec<usize> = if s.contains(':') || s.contains('*') {
            s.split([':', '*']).map(|p| lookup(p.trim())).collect::<Result<_>>()?
        } else if let Ok(i) = lookup(s) {
            vec![i]
        } else {
            s.chars().map(|c| lookup(&c.to_string())).collect::<Result<_>>()?
        };
        Ok(Term::from_factors(&idx))
    }

    pub fn term_label(&self, t: Term) -> String {
        term_label(&self.factors, t)
    }

    /// Builds a canonical log-linear [`ModelId`]; the term set must be
    /// hierarchical and use only declared factors.
    pub fn model(&self, terms: &[Term]) -> Result<ModelId> {
        let mut terms = terms.to_vec();
        terms.sort();
        terms.dedup();
        let all = (1u32 << self.factors.len()) - 1;
        if terms.iter().any(|t| t.0 & !all != 0) {
            return Err(Error::Specification("term references an undeclared factor".into()));
        }
        if !is_hierarchical(&terms) {
            return Err(Error::Specification("term set is not hierarchical".into()));
        }
        let dim = terms.iter().map(|&t| self.term_dim(t)).sum();
        Ok(ModelId::Loglinear { terms, dim })
    }

    /// Model containing every forced and candidate term.
    pub fn full_model(&self) -> Result<ModelId> {
        let terms: Vec<Term> = self.forced.iter().chain(&self.candidates).copied().collect();
        self.model(&terms)
    }

    /// Label of a log-linear model: its maximal terms joined by `+`.
    pub fn model_label(&self, m: &ModelId) -> String {
        match m {
            ModelId::Loglinear { terms, .. } => {
                let mut maximal: Vec<Term> = terms
                    .iter()
                    .filter(|t| !terms.iter().any(|u| u != *t && u.contains(**t)))
                    .copied()
                    .collect();
                maximal.sort_by_key(|t| t.factors());
                let maximal: Vec<String> = maximal.iter().map(|&t| self.term_label(t)).collect();
                if maximal.is_empty() {
                    "(empty)".into()
                } else {
                    maximal.join("+")
                }
            }
            ModelId::Linear { .. } => m.label(&[]),
        }
    }
}

fn term_label(factors: &[Factor], t: Term) -> String {
    if t == Term::INTERCEPT {
        return "1".into();
    }
    let names: Vec<&str> = t.factors().iter().map(|&f| factors[f].name.as_str()).collect();
    if names.iter().all(|n| n.chars().count() == 1) {
        names.concat()
    } else {
        names.join(":")
    }
}

/// Closure test: every one-factor margin of every included term is included.
pub fn is_hierarchical(terms: &[Term]) -> bool {
    terms.iter().all(|t| t.margins().all(|m| terms.contains(&m)))
}

/// Identifies a model in a space, with its parameter count.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelId {
    /// Covariate subset of a linear regression (0-based column indices).
    Linear { intercept: bool, covariates: Vec<usize> },
    /// Hierarchical term set of a log-linear model.
    Loglinear { terms: Vec<Term>, dim: usize },
}

impl ModelId {
    /// Canonical linear-subset model. Duplicate covariates are rejected.
    pub fn linear(intercept: bool, covariates: &[usize]) -> Result<ModelId> {
        let mut c = covariates.to_vec();
        c.sort_unstable();
        let before = c.len();
        c.dedup();
        if c.len() != before {
            return Err(Error::Specification("duplicate covariate in model".into()));
        }
        Ok(ModelId::Linear { intercept, covariates: c })
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelId::Linear { intercept, covariates } => usize::from(*intercept) + covariates.len(),
            ModelId::Loglinear { dim, .. } => *dim,
        }
    }

    pub fn covariates(&self) -> Option<&[usize]> {
        match self {
            ModelId::Linear { covariates, .. } => Some(covariates),
            ModelId::Loglinear { .. } => None,
        }
    }

    pub fn has_intercept(&self) -> bool {
        match self {
            ModelId::Linear { intercept, .. } => *intercept,
            ModelId::Loglinear { terms, .. } => terms.contains(&Term::INTERCEPT),
        }
    }

    /// Number of members (covariates or terms).
    fn member_keys(&self) -> Vec<Vec<usize>> {
        match self {
            ModelId::Linear { covariates, .. } => covariates.iter().map(|&c| vec![c]).collect(),
            ModelId::Loglinear { terms, .. } => {
                terms.iter().map(|t| std::iter::once(t.order()).chain(t.factors()).collect()).collect()
            }
        }
    }

    /// Whether two models differ by exactly one member (add or drop).
    pub fn is_neighbor(&self, other: &ModelId) -> bool {
        match (self, other) {
            (
                ModelId::Linear { intercept: a, covariates: x },
                ModelId::Linear { intercept: b, covariates: y },
            ) => a == b && symmetric_difference_len(x, y) == 1,
            (ModelId::Loglinear { terms: x, .. }, ModelId::Loglinear { terms: y, .. }) => {
                symmetric_difference_len(x, y) == 1
            }
            _ => false,
        }
    }

    /// Human-readable label. For linear models `names` are covariate labels
    /// (falling back to `X1`, `X2`, … when empty); for log-linear models use
    /// [`FactorSpec::model_label`].
    pub fn label(&self, names: &[String]) -> String {
        match self {
            ModelId::Linear { intercept, covariates } => {
                let mut parts: Vec<String> = Vec::new();
                if *intercept {
                    parts.push("1".into());
                }
                for &c in covariates {
                    parts.push(names.get(c).cloned().unwrap_or_else(|| format!("X{}", c + 1)));
                }
                if parts.is_empty() {
                    "(empty)".into()
                } else {
                    parts.join("+")
                }
            }
            ModelId::Loglinear { terms, .. } => {
                let t: Vec<String> = terms.iter().map(|t| format!("{:b}", t.0)).collect();
                t.join("+")
            }
        }
    }
}

fn symmetric_difference_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    a.iter().filter(|x| !b.contains(x)).count() + b.iter().filter(|x| !a.contains(x)).count()
}

impl Ord for ModelId {
    fn cmp(&self, other: &Self) -> Ordering {
        let kind = |m: &ModelId| match m {
            ModelId::Linear { intercept, .. } => u8::from(!*intercept),
            ModelId::Loglinear { .. } => 2,
        };
        self.dim()
            .cmp(&other.dim())
            .then_with(|| kind(self).cmp(&kind(other)))
            .then_with(|| self.member_keys().cmp(&other.member_keys()))
    }
}

impl PartialOrd for ModelId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label(&[]))
    }
}

/// All `2^p` covariate subsets in canonical order (dimension, then members).
pub fn enumerate_linear_models(p: usize, include_intercept: bool) -> Result<Vec<ModelId>> {
    if p > ENUMERATION_CAP {
        return Err(Error::Capacity { requested: p, cap: ENUMERATION_CAP });
    }
    let mut models: Vec<ModelId> = (0u32..(1u32 << p))
        .map(|mask| ModelId::Linear {
            intercept: include_intercept,
            covariates: (0..p).filter(|&j| mask & (1 << j) != 0).collect(),
        })
        .collect();
    models.sort();
    Ok(models)
}

/// All hierarchical term sets containing the forced terms and drawn from
/// forced ∪ candidate terms, in canonical order.
pub fn enumerate_hierarchical_models(spec: &FactorSpec) -> Result<Vec<ModelId>> {
    let pool: Vec<Term> = spec.forced.iter().chain(&spec.candidates).copied().collect();
    for t in &spec.forced {
        if let Some(m) = t.margins().find(|m| !spec.forced.contains(m)) {
            return Err(Error::Specification(format!(
                "forced term {} requires margin {} which is not forced",
                spec.term_label(*t),
                spec.term_label(m)
            )));
        }
    }
    for t in &spec.candidates {
        if let Some(m) = t.margins().find(|m| !pool.contains(m)) {
            return Err(Error::Specification(format!(
                "candidate term {} has margin {} that is neither forced nor a candidate",
                spec.term_label(*t),
                spec.term_label(m)
            )));
        }
    }
    let k = spec.candidates.len();
    if k > ENUMERATION_CAP {
        return Err(Error::Capacity { requested: k, cap: ENUMERATION_CAP });
    }
    let mut models = Vec::new();
    for mask in 0u32..(1u32 << k) {
        let terms: Vec<Term> = spec
            .forced
            .iter()
            .copied()
            .chain((0..k).filter(|&j| mask & (1 << j) != 0).map(|j| spec.candidates[j]))
            .collect();
        if is_hierarchical(&terms) {
            models.push(spec.model(&terms)?);
        }
    }
    models.sort();
    Ok(models)
}

/// Rule producing the unnormalized log prior model weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyVariant {
    /// `log p(m)`.
    Uniform,
    /// `log p(m) + d·log c`.
    AdjustedC,
    /// `log p(m) + ½ log(|V|·|i|)`.
    AdjustedInfo,
    /// `log p(m) + ½ log(|V|·|i + n⁻¹V⁻¹|)`; linear models only.
    AdjustedExact,
    /// `log p(m) + ½ log|V| + ½ log|Xᵀ Diag(λ₀) X| − (d/2) log n`, with
    /// `λ₀ = exp(Xμ)` and `n` the number of cells.
    LoglinearAdjusted,
}

/// Baseline model probabilities `p(m)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    Constant,
    /// `p(m) = w^{d_m}`.
    PerDimension { weight: f64 },
    /// `log p(m) = (d/2)(log n0 − psi0)`; the reference sample size is fixed.
    Calibrated { n0: f64, psi0: f64 },
    /// Explicit positive weights per model.
    Table(Vec<(ModelId, f64)>),
}

impl Baseline {
    pub fn log_p(&self, m: &ModelId) -> Result<f64> {
        match self {
            Baseline::Constant => Ok(0.0),
            Baseline::PerDimension { weight } => {
                if !(*weight > 0.0) || !weight.is_finite() {
                    return Err(Error::Specification(format!("per-dimension weight {weight} must be positive")));
                }
                Ok(m.dim() as f64 * weight.ln())
            }
            Baseline::Calibrated { n0, psi0 } => calibrate_p(m.dim(), *n0, *psi0),
            Baseline::Table(rows) => {
                let w = rows
                    .iter()
                    .find(|(id, _)| id == m)
                    .map(|(_, w)| *w)
                    .ok_or_else(|| Error::Specification(format!("model {m} missing from baseline table")))?;
                if !(w > 0.0) || !w.is_finite() {
                    return Err(Error::Specification(format!("baseline weight {w} for {m} must be positive")));
                }
                Ok(w.ln())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelPriorPolicy {
    pub variant: PolicyVariant,
    pub baseline: Baseline,
}

impl ModelPriorPolicy {
    pub fn new(variant: PolicyVariant, baseline: Baseline) -> Self {
        Self { variant, baseline }
    }

    pub fn uniform() -> Self {
        Self::new(PolicyVariant::Uniform, Baseline::Constant)
    }

    /// Short name used in reports.
    pub fn name(&self) -> &'static str {
        match self.variant {
            PolicyVariant::Uniform => "uniform",
            PolicyVariant::AdjustedC => "adjusted_c",
            PolicyVariant::AdjustedInfo => "adjusted_info",
            PolicyVariant::AdjustedExact => "adjusted_exact",
            PolicyVariant::LoglinearAdjusted => "loglinear_adjusted",
        }
    }

    /// Whether the weight needs an information matrix.
    pub fn needs_information(&self) -> bool {
        !matches!(self.variant, PolicyVariant::Uniform | PolicyVariant::AdjustedC)
    }
}

/// Baseline calibrated to an information criterion with penalty `psi0` at
/// sample size `n0`: `(d/2)(log n0 − psi0)`.
pub fn calibrate_p(d: usize, n0: f64, psi0: f64) -> Result<f64> {
    if !(n0 >= 2.0) || !(psi0 > 0.0) {
        return Err(Error::Specification(format!(
            "calibration requires n0 >= 2 and psi0 > 0 (got n0={n0}, psi0={psi0})"
        )));
    }
    Ok(0.5 * d as f64 * (n0.ln() - psi0))
}

/// Unnormalized log prior weight `log f(m)` of model `m`.
///
/// `info` may be `None` for the uniform and `adjusted_c` variants.
pub fn log_prior_model_weight(
    m: &ModelId,
    policy: &ModelPriorPolicy,
    prior: &ParamPrior,
    info: Option<&InformationSource>,
) -> Result<f64> {
    let d = m.dim();
    if prior.dim() != d {
        return Err(Error::Contract(format!(
            "prior has dimension {} but model {m} has {d}",
            prior.dim()
        )));
    }
    let log_p = policy.baseline.log_p(m)?;
    if !policy.needs_information() {
        return Ok(match policy.variant {
            PolicyVariant::AdjustedC => log_p + 0.5 * d as f64 * prior.c2().ln(),
            _ => log_p,
        });
    }
    let info = info.ok_or_else(|| {
        Error::Contract(format!("policy {} requires an information source", policy.name()))
    })?;
    if info.dim() != d {
        return Err(Error::Contract(format!(
            "information matrix has dimension {} but model {m} has {d}",
            info.dim()
        )));
    }
    let log_det_v = prior.log_det_variance();
    let n = info.n() as f64;
    match policy.variant {
        PolicyVariant::AdjustedInfo => Ok(log_p + 0.5 * (log_det_v + info.log_det())),
        PolicyVariant::AdjustedExact => {
            if !matches!(info.kind(), InformationKind::Linear) {
                return Err(Error::Contract("adjusted_exact requires linear-model information".into()));
            }
            let augmented = info.unit_information() + prior.precision() / n;
            let log_det_aug = crate::linalg::spd_log_det(&augmented)?;
            Ok(log_p + 0.5 * (log_det_v + log_det_aug))
        }
        PolicyVariant::LoglinearAdjusted => {
            if !matches!(info.kind(), InformationKind::Poisson { .. }) {
                return Err(Error::Contract("loglinear_adjusted requires Poisson information".into()));
            }
            // |XᵀDiag(λ₀)X| = nᵈ·|i|
            let log_det_xdx = info.log_det() + d as f64 * n.ln();
            Ok(log_p + 0.5 * log_det_v + 0.5 * log_det_xdx - 0.5 * d as f64 * n.ln())
        }
        PolicyVariant::Uniform | PolicyVariant::AdjustedC => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oha_spec() -> FactorSpec {
        let factors = vec![
            Factor { name: "O".into(), levels: 3 },
            Factor { name: "H".into(), levels: 2 },
            Factor { name: "A".into(), levels: 4 },
        ];
        let forced = vec![Term::INTERCEPT, Term::from_factors(&[0]), Term::from_factors(&[1]), Term::from_factors(&[2])];
        let candidates = vec![Term::from_factors(&[0, 1]), Term::from_factors(&[1, 2])];
        FactorSpec::new(factors, forced, candidates).unwrap()
    }

    #[test]
    fn linear_power_set() {
        let m = enumerate_linear_models(2, true).unwrap();
        let dims: Vec<usize> = m.iter().map(ModelId::dim).collect();
        assert_eq!(dims, vec![1, 2, 2, 3]);
        assert_eq!(enumerate_linear_models(15, true).unwrap().len(), 32768);
        let m0 = enumerate_linear_models(0, true).unwrap();
        assert_eq!(m0.len(), 1);
        assert_eq!(m0[0].dim(), 1);
    }

    #[test]
    fn linear_cap_names_sampler() {
        let err = enumerate_linear_models(26, true).unwrap_err();
        assert!(matches!(err, Error::Capacity { requested: 26, cap: 25 }));
        assert!(err.to_string().contains("sampler"));
    }

    #[test]
    fn table_one_space() {
        let spec = oha_spec();
        let models = enumerate_hierarchical_models(&spec).unwrap();
        let labels: Vec<String> = models.iter().map(|m| spec.model_label(m)).collect();
        assert_eq!(labels, vec!["O+H+A", "OH+A", "O+HA", "OH+HA"]);
        let dims: Vec<usize> = models.iter().map(ModelId::dim).collect();
        assert_eq!(dims, vec![7, 9, 10, 12]);
    }

    #[test]
    fn all_forced_gives_single_model() {
        let base = oha_spec();
        let all: Vec<Term> = base.forced().iter().chain(base.candidates()).copied().collect();
        let spec = FactorSpec::new(base.factors().to_vec(), all, vec![]).unwrap();
        assert_eq!(enumerate_hierarchical_models(&spec).unwrap().len(), 1);
    }

    #[test]
    fn two_factor_count_matches_brute_force() {
        let factors = vec![Factor { name: "O".into(), levels: 3 }, Factor { name: "H".into(), levels: 2 }];
        let cands = vec![Term::from_factors(&[0]), Term::from_factors(&[1]), Term::from_factors(&[0, 1])];
        let spec = FactorSpec::new(factors, vec![Term::INTERCEPT], cands.clone()).unwrap();
        // brute force: every subset, closed under margins
        let mut brute = 0;
        for mask in 0..8u32 {
            let mut set = vec![Term::INTERCEPT];
            for (j, c) in cands.iter().enumerate() {
                if mask & (1 << j) != 0 {
                    set.push(*c);
                }
            }
            let closed = set.iter().all(|t| t.factors().iter().all(|&f| set.contains(&Term(t.0 & !(1 << f)))));
            brute += usize::from(closed);
        }
        let models = enumerate_hierarchical_models(&spec).unwrap();
        assert_eq!(models.len(), brute);
        assert_eq!(brute, 5);
        for m in &models {
            if let ModelId::Loglinear { terms, .. } = m {
                assert!(is_hierarchical(terms));
            }
        }
    }

    #[test]
    fn missing_margin_is_specification_error() {
        let factors = vec![Factor { name: "O".into(), levels: 3 }, Factor { name: "H".into(), levels: 2 }];
        let spec = FactorSpec::new(
            factors,
            vec![Term::INTERCEPT, Term::from_factors(&[0])],
            vec![Term::from_factors(&[0, 1])],
        )
        .unwrap();
        assert!(matches!(enumerate_hierarchical_models(&spec), Err(Error::Specification(_))));
    }

    #[test]
    fn forced_and_candidate_must_be_disjoint() {
        let factors = vec![Factor { name: "O".into(), levels: 3 }];
        let t = Term::from_factors(&[0]);
        assert!(FactorSpec::new(factors, vec![Term::INTERCEPT, t], vec![t]).is_err());
    }

    #[test]
    fn parse_terms() {
        let spec = oha_spec();
        assert_eq!(spec.parse_term("OH").unwrap(), Term::from_factors(&[0, 1]));
        assert_eq!(spec.parse_term("H:A").unwrap(), Term::from_factors(&[1, 2]));
        assert_eq!(spec.parse_term("1").unwrap(), Term::INTERCEPT);
        assert!(spec.parse_term("Z").is_err());
    }

    #[test]
    fn calibration() {
        assert!(calibrate_p(4, 50.0, 50f64.ln()).unwrap().abs() < 1e-15);
        let v = calibrate_p(3, 50.0, 2.0).unwrap();
        assert!((v - 1.5 * (50f64.ln() - 2.0)).abs() < 1e-15);
        assert!((v - 2.868_03).abs() < 1e-4);
        assert_eq!(calibrate_p(0, 50.0, 7.0).unwrap(), 0.0);
        assert!(calibrate_p(1, 1.0, 1.0).is_err());
        assert!(calibrate_p(1, 10.0, 0.0).is_err());
    }

    #[test]
    fn canonical_order_and_equality() {
        let a = ModelId::linear(true, &[4, 3]).unwrap();
        let b = ModelId::linear(true, &[3, 4]).unwrap();
        assert_eq!(a, b);
        assert!(ModelId::linear(true, &[3, 3]).is_err());
        assert_eq!(a.label(&[]), "1+X4+X5");
        assert!(ModelId::linear(true, &[0]).unwrap() < a);
    }

    #[test]
    fn neighbors() {
        let spec = oha_spec();
        let models = enumerate_hierarchical_models(&spec).unwrap();
        for m in &models {
            let k = models.iter().filter(|o| m.is_neighbor(o)).count();
            assert_eq!(k, 2);
        }
        assert!(!models[0].is_neighbor(&models[3]));
    }
}

//! Poisson log-linear fitting and Laplace-approximate marginal likelihoods.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{block_diagonal, gram, SpdFactor};
use crate::marginal::{LogMarginal, MarginalMethod};
use crate::model_space::{FactorSpec, ModelId, Term};
use crate::param_priors::{BaseStructure, ParamPrior, MAX_LINEAR_PREDICTOR};
use crate::special::ln_gamma;

pub const MAX_NEWTON_ITERATIONS: usize = 100;
/// Coefficient norm beyond which an unpenalized fit is declared degenerate.
pub const DIVERGENCE_NORM: f64 = 30.0;
const GRAD_TOL: f64 = 1e-8;
const STEP_TOL: f64 = 1e-7;
const MAX_HALVINGS: usize = 60;

/// Counts of a complete contingency table, cells in row-major order over the
/// factors (last factor varies fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct ContingencyTable {
    spec: FactorSpec,
    counts: Vec<u64>,
}

impl ContingencyTable {
    pub fn new(spec: FactorSpec, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != spec.n_cells() {
            return Err(Error::Contract(format!(
                "table has {} counts but the factors define {} cells",
                counts.len(),
                spec.n_cells()
            )));
        }
        Ok(Self { spec, counts })
    }

    pub fn spec(&self) -> &FactorSpec {
        &self.spec
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n_cells(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn likelihood(&self) -> PoissonLikelihood {
        PoissonLikelihood::new(self.counts.iter().map(|&c| c as f64).collect())
    }

    /// Same table with every count multiplied by `k`.
    pub fn scaled(&self, k: u64) -> Self {
        Self { spec: self.spec.clone(), counts: self.counts.iter().map(|c| c * k).collect() }
    }
}

/// Column range of one term in a design matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermBlock {
    pub term: Term,
    pub start: usize,
    pub width: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Design {
    pub x: DMatrix<f64>,
    pub blocks: Vec<TermBlock>,
}

/// Level index of each factor for every cell, row-major.
pub fn cell_levels(spec: &FactorSpec) -> Vec<Vec<usize>> {
    let levels: Vec<usize> = spec.factors().iter().map(|f| f.levels).collect();
    let mut out = Vec::with_capacity(spec.n_cells());
    for mut cell in 0..spec.n_cells() {
        let mut idx = vec![0; levels.len()];
        for f in (0..levels.len()).rev() {
            idx[f] = cell % levels[f];
            cell /= levels[f];
        }
        out.push(idx);
    }
    out
}

/// Sum-to-zero code of level `l` for contrast column `j` of a factor with `levels` levels.
fn contrast(l: usize, j: usize, levels: usize) -> f64 {
    if l == j {
        1.0
    } else if l == levels - 1 {
        -1.0
    } else {
        0.0
    }
}

/// Design columns of a single term (`n_cells × term_dim`).
pub fn term_columns(spec: &FactorSpec, t: Term) -> DMatrix<f64> {
    let cells = cell_levels(spec);
    let fs = t.factors();
    let widths: Vec<usize> = fs.iter().map(|&f| spec.factors()[f].levels - 1).collect();
    let width: usize = widths.iter().product();
    DMatrix::from_fn(cells.len(), width, |i, col| {
        // decompose the column index, first factor slowest
        let mut rem = col;
        let mut v = 1.0;
        for k in (0..fs.len()).rev() {
            let j = rem % widths[k];
            rem /= widths[k];
            v *= contrast(cells[i][fs[k]], j, spec.factors()[fs[k]].levels);
        }
        v
    })
}

/// Design matrix of a hierarchical log-linear model, terms in canonical order.
pub fn build_design(spec: &FactorSpec, m: &ModelId) -> Result<Design> {
    let ModelId::Loglinear { terms, dim } = m else {
        return Err(Error::Contract("log-linear design needs a term-set model".into()));
    };
    let mut x = DMatrix::zeros(spec.n_cells(), *dim);
    let mut blocks = Vec::with_capacity(terms.len());
    let mut at = 0;
    for &t in terms {
        let cols = term_columns(spec, t);
        let w = cols.ncols();
        if at + w > *dim {
            return Err(Error::Contract("model dimension does not match its terms".into()));
        }
        x.view_mut((0, at), (cols.nrows(), w)).copy_from(&cols);
        blocks.push(TermBlock { term: t, start: at, width: w });
        at += w;
    }
    if at != *dim {
        return Err(Error::Contract("model dimension does not match its terms".into()));
    }
    Ok(Design { x, blocks })
}

/// Log-likelihood of a regression model with linear predictor `Xβ`,
/// including all normalizing constants.
pub trait RegressionLikelihood {
    fn n_obs(&self) -> usize;
    /// `−∞` when the linear predictor leaves the representable range.
    fn loglik(&self, x: &DMatrix<f64>, beta: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DMatrix<f64>, beta: &DVector<f64>) -> DVector<f64>;
    /// Second-derivative matrix `H(β)` of the log-likelihood.
    fn hessian(&self, x: &DMatrix<f64>, beta: &DVector<f64>) -> DMatrix<f64>;
    /// Whether the maximum may fail to exist (triggers the divergence check).
    fn can_diverge(&self) -> bool {
        true
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoissonLikelihood {
    y: DVector<f64>,
    log_factorials: f64,
}

impl PoissonLikelihood {
    pub fn new(y: Vec<f64>) -> Self {
        let log_factorials = y.iter().map(|&v| ln_gamma(v + 1.0)).sum();
        Self { y: DVector::from_vec(y), log_factorials }
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }
}

impl RegressionLikelihood for PoissonLikelihood {
    fn n_obs(&self) -> usize {
        self.y.len()
    }

    fn loglik(&self, x: &DMatrix<f64>, beta: &DVector<f64>) -> f64 {
        let eta = x * beta;
        if eta.iter().any(|e| !(e.abs() <= MAX_LINEAR_PREDICTOR)) {
            return f64::NEG_INFINITY;
        }
        eta.iter().zip(self.y.iter()).map(|(e, y)| y * e - e.exp()).sum::<f64>() - self.log_factorials
    }

    fn gradient(&self, x: &DMatrix<f64>, beta: &DVector<f64>) -> DVector<f64> {
        let mu = (x * beta).map(f64::exp);
        x.tr_mul(&(&self.y - mu))
    }

    fn hessian(&self, x: &DMatrix<f64>, beta: &DVector<f64>) -> DMatrix<f64> {
        let mu = (x * beta).map(f64::exp);
        let mut w = x.clone();
        for (mut row, m) in w.row_iter_mut().zip(mu.iter()) {
            row *= *m;
        }
        let h = -x.tr_mul(&w);
        (&h + h.transpose()) * 0.5
    }
}

/// Normal linear model with known error variance (quadratic log-likelihood).
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianKnownVariance {
    pub y: DVector<f64>,
    pub sigma2: f64,
}

impl RegressionLikelihood for GaussianKnownVariance {
    fn n_obs(&self) -> usize {
        self.y.len()
    }

    fn loglik(&self, x: &DMatrix<f64>, beta: &DVector<f64>) -> f64 {
        let n = self.y.len() as f64;
        let r = &self.y - x * beta;
        -0.5 * n * (2.0 * std::f64::consts::PI * self.sigma2).ln() - 0.5 * r.norm_squared() / self.sigma2
    }

    fn gradient(&self, x: &DMatrix<f64>, beta: &DVector<f64>) -> DVector<f64> {
        x.tr_mul(&(&self.y - x * beta)) / self.sigma2
    }

    fn hessian(&self, x: &DMatrix<f64>, _beta: &DVector<f64>) -> DMatrix<f64> {
        -gram(x) / self.sigma2
    }

    fn can_diverge(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlmFit {
    pub beta_hat: DVector<f64>,
    pub loglik_at_mode: f64,
    /// `H(β̂)` of the log-likelihood (not of the penalized objective).
    pub hessian: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Maximizes `loglik(β) − ½(β−μ)ᵀV⁻¹(β−μ)` (or the plain log-likelihood when
/// `penalty` is `None`) by Newton's method with step halving.
pub fn newton_fit<L: RegressionLikelihood + ?Sized>(
    lik: &L,
    x: &DMatrix<f64>,
    start: DVector<f64>,
    penalty: Option<(&DVector<f64>, &DMatrix<f64>)>,
) -> Result<GlmFit> {
    if x.nrows() != lik.n_obs() || x.ncols() != start.len() {
        return Err(Error::Contract("design, data and starting point do not conform".into()));
    }
    let objective = |b: &DVector<f64>| {
        let base = lik.loglik(x, b);
        match penalty {
            Some((mu, prec)) => {
                let r = b - mu;
                base - 0.5 * r.dot(&(prec * &r))
            }
            None => base,
        }
    };
    let mut beta = start;
    let mut value = objective(&beta);
    if !value.is_finite() {
        return Err(Error::NumericalDomain("objective is not finite at the starting point".into()));
    }
    let diverges = penalty.is_none() && lik.can_diverge();
    for it in 0..MAX_NEWTON_ITERATIONS {
        let mut g = lik.gradient(x, &beta);
        let mut neg_h = -lik.hessian(x, &beta);
        if let Some((mu, prec)) = penalty {
            g -= prec * (&beta - mu);
            neg_h += prec;
        }
        let f = SpdFactor::new(&neg_h).map_err(|e| {
            if diverges && beta.norm() > 0.5 * DIVERGENCE_NORM {
                Error::DegenerateData(format!("fitted means approach zero ({e})"))
            } else {
                Error::NumericalDomain(format!("objective curvature is not negative definite: {e}"))
            }
        })?;
        let step = f.solve(&g);
        // Stationary when the gradient vanishes or the predicted gain is below
        // rounding, and the Newton step itself is negligible. The step test
        // keeps a fit that slides along a zero margin from looking converged.
        let gain = 0.5 * g.dot(&step);
        let small_step = step.amax() <= STEP_TOL * (1.0 + beta.amax());
        if small_step && (g.norm() <= GRAD_TOL || gain <= 1e-15 * (1.0 + value.abs())) {
            let polished = &beta + &step;
            let v = objective(&polished);
            if v.is_finite() && v >= value {
                beta = polished;
            }
            return finish(lik, x, beta, it + 1);
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let cand = &beta + &step * t;
            let v = objective(&cand);
            if v.is_finite() && v >= value {
                beta = cand;
                value = v;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if diverges && beta.norm() > DIVERGENCE_NORM {
            return Err(Error::DegenerateData(format!(
                "coefficient norm {:.1} exceeds {DIVERGENCE_NORM}; a fitted margin is zero",
                beta.norm()
            )));
        }
        if !accepted {
            break;
        }
    }
    Err(Error::NonConvergence { iterations: MAX_NEWTON_ITERATIONS, last: beta.iter().copied().collect() })
}

fn finish<L: RegressionLikelihood + ?Sized>(lik: &L, x: &DMatrix<f64>, beta: DVector<f64>, iterations: usize) -> Result<GlmFit> {
    Ok(GlmFit {
        loglik_at_mode: lik.loglik(x, &beta),
        hessian: lik.hessian(x, &beta),
        beta_hat: beta,
        converged: true,
        iterations,
    })
}

pub fn fit_mle<L: RegressionLikelihood + ?Sized>(lik: &L, x: &DMatrix<f64>) -> Result<GlmFit> {
    newton_fit(lik, x, DVector::zeros(x.ncols()), None)
}

pub fn fit_map<L: RegressionLikelihood + ?Sized>(lik: &L, x: &DMatrix<f64>, prior: &ParamPrior) -> Result<GlmFit> {
    if prior.dim() != x.ncols() {
        return Err(Error::Contract("prior dimension does not match the design".into()));
    }
    let prec = prior.precision();
    newton_fit(lik, x, prior.mu().clone(), Some((prior.mu(), &prec)))
}

pub fn fit_mle_poisson(table: &ContingencyTable, m: &ModelId) -> Result<GlmFit> {
    let d = build_design(table.spec(), m)?;
    fit_mle(&table.likelihood(), &d.x)
}

pub fn fit_map_poisson(table: &ContingencyTable, m: &ModelId, prior: &ParamPrior) -> Result<GlmFit> {
    let d = build_design(table.spec(), m)?;
    fit_map(&table.likelihood(), &d.x, prior)
}

/// Expansion point of the Laplace approximation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplaceVariant {
    AtMle,
    AtMap,
}

/// Laplace approximation together with the fit it was expanded around.
#[derive(Clone, Debug)]
pub struct LaplaceResult {
    pub logml: LogMarginal,
    pub fit: GlmFit,
    /// `(V⁻¹ − H(β₀))⁻¹`, the Gaussian approximation to the posterior variance.
    pub posterior_cov: DMatrix<f64>,
}

/// Laplace approximation to `log ∫ f(y|β) N(β; μ, V) dβ`:
/// `log f(y|β₀) − ½log|V| − ½(β₀−μ)ᵀV⁻¹(β₀−μ) − ½log|V⁻¹ − H(β₀)|`.
/// The `(2π)^{d/2}` factors of the prior density and of the Gaussian
/// integral cancel. At the posterior mode this is exact for quadratic
/// log-likelihoods.
pub fn log_marginal_laplace<L: RegressionLikelihood + ?Sized>(
    lik: &L,
    x: &DMatrix<f64>,
    prior: &ParamPrior,
    variant: LaplaceVariant,
) -> Result<LaplaceResult> {
    let fit = match variant {
        LaplaceVariant::AtMle => fit_mle(lik, x)?,
        LaplaceVariant::AtMap => fit_map(lik, x, prior)?,
    };
    if prior.dim() != x.ncols() {
        return Err(Error::Contract("prior dimension does not match the design".into()));
    }
    SpdFactor::new(&-&fit.hessian)
        .map_err(|e| Error::NumericalDomain(format!("log-likelihood Hessian is not negative definite: {e}")))?;
    let post_prec = prior.precision() - &fit.hessian;
    let fp = SpdFactor::new(&post_prec)?;
    let value = fit.loglik_at_mode - 0.5 * prior.log_det_variance() - 0.5 * prior.mahalanobis(&fit.beta_hat) - 0.5 * fp.log_det();
    if !value.is_finite() {
        return Err(Error::NumericalDomain("non-finite Laplace approximation".into()));
    }
    let method = match variant {
        LaplaceVariant::AtMle => MarginalMethod::Laplace,
        LaplaceVariant::AtMap => MarginalMethod::LaplacePenalized,
    };
    Ok(LaplaceResult { logml: LogMarginal::full(value, method), fit, posterior_cov: fp.inverse() })
}

pub fn log_marginal_laplace_table(
    table: &ContingencyTable,
    m: &ModelId,
    prior: &ParamPrior,
    variant: LaplaceVariant,
) -> Result<LaplaceResult> {
    let d = build_design(table.spec(), m)?;
    log_marginal_laplace(&table.likelihood(), &d.x, prior, variant)
}

/// Exact `log ∫ N(y; Xβ, σ²I) N(β; μ, V) dβ` for known `σ²`.
pub fn log_marginal_gaussian_exact(lik: &GaussianKnownVariance, x: &DMatrix<f64>, prior: &ParamPrior) -> Result<LogMarginal> {
    let n = lik.y.len();
    let cov = x * prior.variance() * x.transpose() + DMatrix::identity(n, n) * lik.sigma2;
    let f = SpdFactor::new(&cov)?;
    let r = &lik.y - x * prior.mu();
    let value = -0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * f.log_det() - 0.5 * f.inv_quad_form(&r);
    Ok(LogMarginal::full(value, MarginalMethod::ExactGaussian))
}

/// Prior covariance form of one log-linear term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermScale {
    /// `k² (X_jᵀX_j)⁻¹`.
    XtxInverse,
    /// `k² I`.
    Identity,
}

/// Prior of one term: `N(mean, k2 · scale)`; `mean = None` means zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermPrior {
    pub k2: f64,
    pub scale: TermScale,
    pub mean: Option<Vec<f64>>,
}

/// Independent per-term priors for log-linear models, with a default for
/// terms that have no explicit entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermPriorSet {
    pub default: TermPrior,
    pub overrides: Vec<(Term, TermPrior)>,
}

impl TermPriorSet {
    pub fn uniform(k2: f64, scale: TermScale) -> Self {
        Self { default: TermPrior { k2, scale, mean: None }, overrides: Vec::new() }
    }

    pub fn with_term(mut self, t: Term, p: TermPrior) -> Self {
        self.overrides.retain(|(u, _)| *u != t);
        self.overrides.push((t, p));
        self
    }

    pub fn for_term(&self, t: Term) -> &TermPrior {
        self.overrides.iter().find(|(u, _)| *u == t).map(|(_, p)| p).unwrap_or(&self.default)
    }

    /// Block-diagonal prior for model `m` with `c² = 1` (the `k_j²` carry the dispersion).
    pub fn prior_for(&self, spec: &FactorSpec, m: &ModelId) -> Result<ParamPrior> {
        let design = build_design(spec, m)?;
        let mut blocks = Vec::new();
        let mut mu = Vec::with_capacity(m.dim());
        let mut all_xtx = true;
        for b in &design.blocks {
            let tp = self.for_term(b.term);
            if !(tp.k2 > 0.0) || !tp.k2.is_finite() {
                return Err(Error::Specification(format!("k² for term {} must be positive", spec.term_label(b.term))));
            }
            let block = match tp.scale {
                TermScale::XtxInverse => {
                    let xj = design.x.columns(b.start, b.width).into_owned();
                    SpdFactor::new(&gram(&xj))?.inverse() * tp.k2
                }
                TermScale::Identity => {
                    all_xtx = false;
                    DMatrix::identity(b.width, b.width) * tp.k2
                }
            };
            blocks.push(block);
            match &tp.mean {
                Some(v) if v.len() == b.width => mu.extend_from_slice(v),
                Some(v) => {
                    return Err(Error::Specification(format!(
                        "prior mean for term {} has length {} but the term has {} parameters",
                        spec.term_label(b.term),
                        v.len(),
                        b.width
                    )))
                }
                None => mu.extend(std::iter::repeat_n(0.0, b.width)),
            }
        }
        let structure = if all_xtx { BaseStructure::BlockwiseTerm } else { BaseStructure::Custom };
        ParamPrior::new(DVector::from_vec(mu), block_diagonal(&blocks), structure, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_space::{enumerate_hierarchical_models, Factor};

    fn oha() -> FactorSpec {
        let factors = vec![
            Factor { name: "O".into(), levels: 3 },
            Factor { name: "H".into(), levels: 2 },
            Factor { name: "A".into(), levels: 4 },
        ];
        let forced = vec![Term::INTERCEPT, Term::from_factors(&[0]), Term::from_factors(&[1]), Term::from_factors(&[2])];
        FactorSpec::new(factors, forced, vec![Term::from_factors(&[0, 1]), Term::from_factors(&[1, 2])]).unwrap()
    }

    #[test]
    fn main_effects_design_shape() {
        let spec = oha();
        let m = &enumerate_hierarchical_models(&spec).unwrap()[0];
        let d = build_design(&spec, m).unwrap();
        assert_eq!(d.x.shape(), (24, 7));
        let widths: Vec<usize> = d.blocks.iter().map(|b| b.width).collect();
        assert_eq!(widths, vec![1, 2, 1, 3]);
        // sum-to-zero: every non-intercept column sums to 0
        for j in 1..7 {
            assert!(d.x.column(j).sum().abs() < 1e-15);
        }
    }

    #[test]
    fn saturated_design_is_invertible() {
        let base = oha();
        let all: Vec<Term> = (0u32..8).map(Term).collect();
        let spec = FactorSpec::new(base.factors().to_vec(), all.clone(), vec![]).unwrap();
        let m = spec.model(&all).unwrap();
        let d = build_design(&spec, &m).unwrap();
        assert_eq!(d.x.shape(), (24, 24));
        assert!(crate::linalg::dependent_columns(&d.x).is_empty());
    }

    #[test]
    fn two_level_coding() {
        let spec = FactorSpec::new(vec![Factor { name: "F".into(), levels: 2 }], vec![Term::INTERCEPT, Term(1)], vec![]).unwrap();
        let m = spec.full_model().unwrap();
        let d = build_design(&spec, &m).unwrap();
        assert_eq!(d.x, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]));
    }

    fn one_factor_table(counts: Vec<u64>) -> (ContingencyTable, ModelId) {
        let spec = FactorSpec::new(
            vec![Factor { name: "F".into(), levels: counts.len() }],
            vec![Term::INTERCEPT],
            vec![],
        )
        .unwrap();
        let m = spec.full_model().unwrap();
        (ContingencyTable::new(spec, counts).unwrap(), m)
    }

    #[test]
    fn intercept_only_mle_is_log_mean() {
        let (t, m) = one_factor_table(vec![2, 4]);
        let fit = fit_mle_poisson(&t, &m).unwrap();
        assert!((fit.beta_hat[0] - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_fit_reproduces_counts() {
        let spec = FactorSpec::new(
            vec![Factor { name: "O".into(), levels: 3 }, Factor { name: "H".into(), levels: 2 }],
            vec![Term::INTERCEPT, Term(1), Term(2), Term(3)],
            vec![],
        )
        .unwrap();
        let counts = vec![5, 9, 12, 3, 7, 20];
        let t = ContingencyTable::new(spec.clone(), counts.clone()).unwrap();
        let m = spec.full_model().unwrap();
        let fit = fit_mle_poisson(&t, &m).unwrap();
        let x = build_design(&spec, &m).unwrap().x;
        let mu = (x * &fit.beta_hat).map(f64::exp);
        for (a, b) in mu.iter().zip(&counts) {
            assert!((a - *b as f64).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_margin_is_degenerate() {
        let spec = FactorSpec::new(
            vec![Factor { name: "F".into(), levels: 3 }],
            vec![Term::INTERCEPT, Term(1)],
            vec![],
        )
        .unwrap();
        let t = ContingencyTable::new(spec.clone(), vec![0, 5, 8]).unwrap();
        let m = spec.full_model().unwrap();
        assert!(matches!(fit_mle_poisson(&t, &m), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn map_limits() {
        let (t, m) = one_factor_table(vec![3, 8, 6, 11]);
        let x = build_design(t.spec(), &m).unwrap().x;
        let mle = fit_mle(&t.likelihood(), &x).unwrap();
        let mu = DVector::from_element(1, 0.4);
        let wide = ParamPrior::new(mu.clone(), DMatrix::identity(1, 1), BaseStructure::Custom, 1e12).unwrap();
        let map = fit_map(&t.likelihood(), &x, &wide).unwrap();
        assert!((map.beta_hat[0] - mle.beta_hat[0]).abs() < 1e-5);
        let tight = ParamPrior::new(mu, DMatrix::identity(1, 1), BaseStructure::Custom, 1e-12).unwrap();
        let map = fit_map(&t.likelihood(), &x, &tight).unwrap();
        assert!((map.beta_hat[0] - 0.4).abs() < 1e-5);
    }

    #[test]
    fn hessian_is_minus_n_times_unit_information() {
        let spec = oha();
        let m = &enumerate_hierarchical_models(&spec).unwrap()[1];
        let counts: Vec<u64> = (0..24).map(|i| 5 + (i * 7 % 11) as u64).collect();
        let t = ContingencyTable::new(spec.clone(), counts).unwrap();
        let fit = fit_mle_poisson(&t, m).unwrap();
        let x = build_design(&spec, m).unwrap().x;
        let info = crate::param_priors::fisher_info_poisson(&x, &fit.beta_hat).unwrap();
        let diff = (-&fit.hessian / 24.0 - info).amax();
        assert!(diff < 1e-12 * fit.hessian.amax(), "{diff}");
    }

    #[test]
    fn term_prior_blocks() {
        let spec = oha();
        let ms = enumerate_hierarchical_models(&spec).unwrap();
        let set = TermPriorSet::uniform(48.0, TermScale::XtxInverse);
        let p = set.prior_for(&spec, &ms[0]).unwrap();
        assert_eq!(p.structure(), BaseStructure::BlockwiseTerm);
        // intercept block: 48 / 24
        assert!((p.sigma_base()[(0, 0)] - 2.0).abs() < 1e-14);
        let bad = set.with_term(Term::from_factors(&[1, 2]), TermPrior { k2: 1.0, scale: TermScale::XtxInverse, mean: Some(vec![0.0]) });
        assert!(bad.prior_for(&spec, &ms[2]).is_err());
    }
}

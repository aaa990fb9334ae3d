//! Conjugate normal-inverse-gamma computations for normal linear models.
//!
//! The prior is `β | σ² ~ N(μ, σ²V)` with `σ⁻² ~ Gamma(α, rate λ)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dependent_columns, gram, SpdFactor};
use crate::marginal::{LogMarginal, MarginalMethod};
use crate::model_space::{ModelId, PolicyVariant};
use crate::param_priors::ParamPrior;
use crate::special::{ln_gamma, log_sum_exp, normal_log_pdf};

/// Covariates and response of a linear regression. The intercept is not a
/// column of `x`; it is added by [`LinearDataset::design`] when the model asks for it.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearDataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    labels: Vec<String>,
}

impl LinearDataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, labels: Vec<String>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::Contract("dataset has no observations".into()));
        }
        if x.nrows() != y.len() {
            return Err(Error::Contract(format!("{} covariate rows but {} responses", x.nrows(), y.len())));
        }
        if labels.len() != x.ncols() {
            return Err(Error::Contract(format!("{} labels for {} covariates", labels.len(), x.ncols())));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Contract("dataset contains missing or non-finite values".into()));
        }
        Ok(Self { x, y, labels })
    }

    /// Labels `X1 … Xp`.
    pub fn unlabeled(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let labels = (1..=x.ncols()).map(|j| format!("X{j}")).collect();
        Self::new(x, y, labels)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Design matrix of `m`: a column of ones (if present) then the selected covariates.
    pub fn design(&self, m: &ModelId) -> Result<DMatrix<f64>> {
        let ModelId::Linear { intercept, covariates } = m else {
            return Err(Error::Contract("linear dataset needs a covariate-subset model".into()));
        };
        if let Some(&c) = covariates.iter().find(|&&c| c >= self.p()) {
            return Err(Error::Contract(format!("covariate {c} out of range (p = {})", self.p())));
        }
        let off = usize::from(*intercept);
        let mut out = DMatrix::zeros(self.n(), off + covariates.len());
        if *intercept {
            out.column_mut(0).fill(1.0);
        }
        for (k, &c) in covariates.iter().enumerate() {
            out.column_mut(off + k).copy_from(&self.x.column(c));
        }
        Ok(out)
    }

    /// Full-rank design of `m`; on rank loss the error lists design columns.
    pub fn full_rank_design(&self, m: &ModelId) -> Result<DMatrix<f64>> {
        let x = self.design(m)?;
        let deps = dependent_columns(&x);
        if !deps.is_empty() {
            return Err(Error::RankDeficient { columns: deps });
        }
        Ok(x)
    }

    pub fn without_row(&self, j: usize) -> Result<LinearDataset> {
        if j >= self.n() {
            return Err(Error::Contract(format!("row {j} out of range (n = {})", self.n())));
        }
        if self.n() == 1 {
            return Err(Error::Contract("cannot delete the only observation".into()));
        }
        Ok(Self { x: self.x.clone().remove_row(j), y: self.y.clone().remove_row(j), labels: self.labels.clone() })
    }

    /// Rank of the full covariate matrix with an intercept column.
    pub fn column_rank(&self) -> usize {
        let m = ModelId::Linear { intercept: true, covariates: (0..self.p()).collect() };
        let x = self.design(&m).expect("all covariates are in range");
        x.ncols() - dependent_columns(&x).len()
    }
}

/// Posterior quantities of one model under the NIG prior.
#[derive(Clone, Debug)]
pub struct LinearPosterior {
    /// `(V⁻¹ + XᵀX)⁻¹`.
    pub vstar: DMatrix<f64>,
    pub beta_tilde: DVector<f64>,
    pub a_post: f64,
    pub lambda_post: f64,
    pub log_det_vstar: f64,
    pub logml: LogMarginal,
}

fn nig_parts(prior: &ParamPrior) -> Result<(f64, f64, bool)> {
    let h = prior
        .nig()
        .ok_or_else(|| Error::Contract("linear models need NIG hyperparameters on the prior".into()))?;
    let improper = prior.is_improper_sigma2();
    if !improper && !h.is_proper() {
        return Err(Error::Contract("alpha = lambda = 0 requires the improper-sigma2 flag".into()));
    }
    Ok((h.alpha, h.lambda, improper))
}

/// Model-independent constant separating the full NIG marginal from its kernel.
pub fn nig_kernel_constant(n: usize, alpha: f64, lambda: f64) -> f64 {
    let n = n as f64;
    -0.5 * n * PI.ln() + alpha * (2.0 * lambda).ln() + ln_gamma(alpha + 0.5 * n) - ln_gamma(alpha)
}

fn posterior_kernel(data: &LinearDataset, m: &ModelId, prior: &ParamPrior) -> Result<(LinearPosterior, f64)> {
    let (alpha, lambda, improper) = nig_parts(prior)?;
    let x = data.full_rank_design(m)?;
    if prior.dim() != x.ncols() {
        return Err(Error::Contract(format!(
            "prior has dimension {} but model {m} has {}",
            prior.dim(),
            x.ncols()
        )));
    }
    let y = data.y();
    let vinv = prior.precision();
    let a = &vinv + gram(&x);
    let fa = SpdFactor::new(&a)?;
    let b = &vinv * prior.mu() + x.tr_mul(y);
    let beta_tilde = fa.solve(&b);
    let resid = y - &x * &beta_tilde;
    // Q = yᵀy + μᵀV⁻¹μ − β̃ᵀV*⁻¹β̃, written as a sum of nonnegative terms
    let q = resid.norm_squared() + prior.mahalanobis(&beta_tilde);
    let n = data.n() as f64;
    let a_post = alpha + 0.5 * n;
    let log_det_vstar = -fa.log_det();
    let kernel = 0.5 * log_det_vstar - 0.5 * prior.log_det_variance() - a_post * (2.0 * lambda + q).ln();
    if !kernel.is_finite() {
        return Err(Error::NumericalDomain(format!("non-finite log marginal for model {m}")));
    }
    let mut logml = LogMarginal::kernel(kernel, MarginalMethod::ExactNig);
    logml.comparison_only = improper;
    let post = LinearPosterior {
        vstar: fa.inverse(),
        beta_tilde,
        a_post,
        lambda_post: lambda + 0.5 * q,
        log_det_vstar,
        logml,
    };
    Ok((post, kernel))
}

/// Posterior moments and log marginal likelihood of `m`.
///
/// The log marginal carries the full normalizing constant when the prior is
/// proper and the kernel convention (comparison only) when it is not.
pub fn posterior_moments(data: &LinearDataset, m: &ModelId, prior: &ParamPrior) -> Result<LinearPosterior> {
    let (mut post, kernel) = posterior_kernel(data, m, prior)?;
    if !prior.is_improper_sigma2() {
        let h = prior.nig().expect("checked by nig_parts");
        post.logml = LogMarginal::full(kernel + nig_kernel_constant(data.n(), h.alpha, h.lambda), MarginalMethod::ExactNig);
    }
    Ok(post)
}

/// `log f(y | m)` under the NIG prior (see [`posterior_moments`] for the convention).
pub fn log_marginal_nig(data: &LinearDataset, m: &ModelId, prior: &ParamPrior) -> Result<LogMarginal> {
    posterior_moments(data, m, prior).map(|p| p.logml)
}

/// NIG log marginal in the kernel convention, comparable with
/// [`log_marginal_gprior_closed`].
pub fn log_marginal_nig_kernel(data: &LinearDataset, m: &ModelId, prior: &ParamPrior) -> Result<LogMarginal> {
    posterior_kernel(data, m, prior).map(|(p, _)| p.logml)
}

/// Sufficient statistics of a model for the closed-form g-prior marginal,
/// which can then be evaluated cheaply at any `c²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GpriorSummary {
    pub n: usize,
    pub d: usize,
    pub yty: f64,
    /// `Σ (y_i − ȳ)²`.
    pub syy: f64,
    /// Residual sum of squares of the least-squares fit, `S_y²(1 − R²)`.
    pub rss: f64,
}

impl GpriorSummary {
    pub fn new(data: &LinearDataset, m: &ModelId) -> Result<Self> {
        if !m.has_intercept() {
            return Err(Error::Contract("the closed-form g-prior marginal needs an intercept".into()));
        }
        let x = data.full_rank_design(m)?;
        let y = data.y();
        let f = SpdFactor::new(&gram(&x))?;
        let beta = f.solve(&x.tr_mul(y));
        let rss = (y - &x * beta).norm_squared();
        let mean = y.mean();
        let syy = y.iter().map(|v| (v - mean).powi(2)).sum();
        Ok(Self { n: data.n(), d: x.ncols(), yty: y.norm_squared(), syy, rss })
    }

    pub fn r2(&self) -> f64 {
        if self.syy > 0.0 {
            1.0 - self.rss / self.syy
        } else {
            0.0
        }
    }

    /// Log posterior kernel `−(d/2)log(n + c⁻²) − d log c − (α+n/2) log(2λ + yᵀy/(1+nc²) + nc²/(1+nc²)·S_y²(1−R²))`.
    pub fn log_kernel(&self, c2: f64, alpha: f64, lambda: f64) -> f64 {
        let n = self.n as f64;
        let d = self.d as f64;
        let nc2 = n * c2;
        let shrink = nc2 / (1.0 + nc2);
        -0.5 * d * (n + 1.0 / c2).ln() - 0.5 * d * c2.ln()
            - (alpha + 0.5 * n) * (2.0 * lambda + self.yty / (1.0 + nc2) + shrink * self.rss).ln()
    }
}

/// Centred cross-products of a dataset. Summaries of intercept models are
/// read off submatrices without revisiting the rows, which keeps sweeps over
/// `2^p` subsets cheap.
#[derive(Clone, Debug)]
pub struct GramCache {
    n: usize,
    yty: f64,
    syy: f64,
    sxx: DMatrix<f64>,
    sxy: DVector<f64>,
}

impl GramCache {
    pub fn new(data: &LinearDataset) -> Self {
        let n = data.n();
        let y = data.y();
        let ybar = y.mean();
        let yc = y.map(|v| v - ybar);
        let mut xc = data.x().clone();
        for mut col in xc.column_iter_mut() {
            let m = col.mean();
            col.add_scalar_mut(-m);
        }
        Self { n, yty: y.norm_squared(), syy: yc.norm_squared(), sxx: gram(&xc), sxy: xc.tr_mul(&yc) }
    }

    pub fn summary(&self, m: &ModelId) -> Result<GpriorSummary> {
        let ModelId::Linear { intercept: true, covariates } = m else {
            return Err(Error::Contract("the closed-form g-prior marginal needs an intercept".into()));
        };
        if let Some(&c) = covariates.iter().find(|&&c| c >= self.sxx.nrows()) {
            return Err(Error::Contract(format!("covariate {c} out of range (p = {})", self.sxx.nrows())));
        }
        let k = covariates.len();
        let rss = if k == 0 {
            self.syy
        } else {
            let s = DMatrix::from_fn(k, k, |i, j| self.sxx[(covariates[i], covariates[j])]);
            let b = DVector::from_fn(k, |i, _| self.sxy[covariates[i]]);
            let f = SpdFactor::new(&s).map_err(|_| Error::RankDeficient { columns: (1..=k).collect() })?;
            (self.syy - b.dot(&f.solve(&b))).max(0.0)
        };
        Ok(GpriorSummary { n: self.n, d: k + 1, yty: self.yty, syy: self.syy, rss })
    }
}

/// Closed-form log marginal kernel for the g-prior `V = c² n (XᵀX)⁻¹`, `μ = 0`.
pub fn log_marginal_gprior_closed(
    data: &LinearDataset,
    m: &ModelId,
    c2: f64,
    alpha: f64,
    lambda: f64,
) -> Result<LogMarginal> {
    if !(c2 > 0.0) || !c2.is_finite() {
        return Err(Error::Contract(format!("dispersion c² must be positive, got {c2}")));
    }
    if !(alpha >= 0.0 && lambda >= 0.0) {
        return Err(Error::Contract("alpha and lambda must be nonnegative".into()));
    }
    let s = GpriorSummary::new(data, m)?;
    let mut out = LogMarginal::kernel(s.log_kernel(c2, alpha, lambda), MarginalMethod::ClosedGprior);
    out.comparison_only = alpha == 0.0 && lambda == 0.0;
    Ok(out)
}

/// Log prior model weight for the g-prior base, in closed form.
///
/// With `|Σ| = |i|⁻¹` the information-based weights reduce to `d log c`
/// (`adjusted_info`) and `d log c + (d/2) log(1 + 1/(nc²))` (`adjusted_exact`).
pub fn gprior_log_prior_weight(variant: PolicyVariant, log_p: f64, d: usize, n: usize, c2: f64) -> Result<f64> {
    let d = d as f64;
    Ok(match variant {
        PolicyVariant::Uniform => log_p,
        PolicyVariant::AdjustedC | PolicyVariant::AdjustedInfo => log_p + 0.5 * d * c2.ln(),
        PolicyVariant::AdjustedExact => log_p + 0.5 * d * c2.ln() + 0.5 * d * (1.0 / (n as f64 * c2)).ln_1p(),
        PolicyVariant::LoglinearAdjusted => {
            return Err(Error::Contract("loglinear_adjusted does not apply to linear models".into()))
        }
    })
}

/// `log f(y_j | y_{∖j}, m)` as a ratio of full-constant marginals. The prior is held fixed.
pub fn loo_log_predictive_exact(data: &LinearDataset, m: &ModelId, prior: &ParamPrior, j: usize) -> Result<f64> {
    require_proper(prior)?;
    let full = log_marginal_nig(data, m, prior)?;
    let rest = log_marginal_nig(&data.without_row(j)?, m, prior)?;
    Ok(full.value - rest.value)
}

/// `f(y_j | y_{∖j}, m)`.
pub fn loo_predictive_exact(data: &LinearDataset, m: &ModelId, prior: &ParamPrior, j: usize) -> Result<f64> {
    loo_log_predictive_exact(data, m, prior, j).map(f64::exp)
}

fn require_proper(prior: &ParamPrior) -> Result<()> {
    match prior.nig() {
        Some(h) if h.is_proper() && !prior.is_improper_sigma2() => Ok(()),
        _ => Err(Error::Contract("predictive densities need a proper NIG prior (alpha, lambda > 0)".into())),
    }
}

/// One element of a model space together with its parameter prior and
/// unnormalized log prior model weight.
#[derive(Clone, Debug)]
pub struct CandidateModel {
    pub id: ModelId,
    pub prior: ParamPrior,
    pub log_prior_weight: f64,
}

/// Weights used to average the per-model leave-one-out predictive densities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvWeighting {
    /// Prior model probabilities `f(m)`.
    Prior,
    /// Leave-one-out posterior probabilities `f(m | y_{∖j})`.
    Posterior,
}

/// One draw from the joint posterior over `(m, β, σ²)`; `model` indexes the candidate list.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDraw {
    pub model: usize,
    pub beta: DVector<f64>,
    pub sigma2: f64,
}

/// Whether draws are independent or consecutive states of a Markov chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleKind {
    Independent,
    Chain,
}

#[derive(Clone, Copy, Debug)]
pub enum CvMode<'a> {
    Exact(CvWeighting),
    Gelfand { draws: &'a [JointDraw], kind: SampleKind },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    /// `−Σ_j log f^p(j)`.
    pub score: f64,
    /// Monte Carlo standard error (Gelfand mode only).
    pub std_error: Option<f64>,
    /// Weighting of the exact score; Gelfand estimates target posterior weights.
    pub weighting: CvWeighting,
}

/// Negative cross-validation log score.
pub fn cv_score(models: &[CandidateModel], data: &LinearDataset, mode: CvMode<'_>) -> Result<CvScore> {
    if models.is_empty() {
        return Err(Error::Contract("cross-validation needs at least one model".into()));
    }
    match mode {
        CvMode::Exact(w) => cv_exact(models, data, w),
        CvMode::Gelfand { draws, kind } => cv_gelfand(models, data, draws, kind),
    }
}

fn cv_exact(models: &[CandidateModel], data: &LinearDataset, weighting: CvWeighting) -> Result<CvScore> {
    for c in models {
        require_proper(&c.prior)?;
    }
    let log_prior: Vec<f64> = models.iter().map(|c| c.log_prior_weight).collect();
    let lse_prior = log_sum_exp(&log_prior);
    let full: Vec<f64> = models
        .iter()
        .map(|c| log_marginal_nig(data, &c.id, &c.prior).map(|l| l.value))
        .collect::<Result<_>>()?;
    let mut score = 0.0;
    for j in 0..data.n() {
        let rest = data.without_row(j)?;
        let loo: Vec<f64> = models
            .iter()
            .map(|c| log_marginal_nig(&rest, &c.id, &c.prior).map(|l| l.value))
            .collect::<Result<_>>()?;
        let log_fp = match weighting {
            CvWeighting::Prior => {
                let terms: Vec<f64> = (0..models.len()).map(|k| log_prior[k] - lse_prior + full[k] - loo[k]).collect();
                log_sum_exp(&terms)
            }
            CvWeighting::Posterior => {
                let num: Vec<f64> = (0..models.len()).map(|k| log_prior[k] + full[k]).collect();
                let den: Vec<f64> = (0..models.len()).map(|k| log_prior[k] + loo[k]).collect();
                log_sum_exp(&num) - log_sum_exp(&den)
            }
        };
        score -= log_fp;
    }
    Ok(CvScore { score, std_error: None, weighting })
}

fn cv_gelfand(models: &[CandidateModel], data: &LinearDataset, draws: &[JointDraw], kind: SampleKind) -> Result<CvScore> {
    if draws.is_empty() {
        return Err(Error::Contract("Gelfand estimator needs a nonempty posterior sample".into()));
    }
    let designs: Vec<DMatrix<f64>> = models.iter().map(|c| data.design(&c.id)).collect::<Result<_>>()?;
    let n = data.n();
    let t = draws.len();
    // log h_jt = −log f(y_j | θ_t)
    let mut log_h = DMatrix::zeros(n, t);
    for (k, dr) in draws.iter().enumerate() {
        let x = designs
            .get(dr.model)
            .ok_or_else(|| Error::Contract(format!("draw references model {} out of range", dr.model)))?;
        if dr.beta.len() != x.ncols() || !(dr.sigma2 > 0.0) {
            return Err(Error::Contract("draw does not match its model".into()));
        }
        let fitted = x * &dr.beta;
        for j in 0..n {
            log_h[(j, k)] = -normal_log_pdf(data.y()[j], fitted[j], dr.sigma2);
        }
    }
    let ln_t = (t as f64).ln();
    let log_hbar: Vec<f64> = (0..n)
        .map(|j| log_sum_exp(log_h.row(j).transpose().as_slice()) - ln_t)
        .collect();
    let score = log_hbar.iter().sum();
    // delta method: S ≈ Σ_j log h̄_j, gradient 1/h̄_j
    let g: Vec<f64> = (0..t).map(|k| (0..n).map(|j| (log_h[(j, k)] - log_hbar[j]).exp()).sum()).collect();
    let se = match kind {
        SampleKind::Independent => {
            let mean = g.iter().sum::<f64>() / t as f64;
            let var = g.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t.max(2) - 1) as f64;
            (var / t as f64).sqrt()
        }
        SampleKind::Chain => batch_means_se(&g),
    };
    Ok(CvScore { score, std_error: Some(se), weighting: CvWeighting::Posterior })
}

/// Standard error of the mean of a correlated series by batch means with
/// `⌊√N⌋` batches of equal length (the tail remainder is dropped).
pub fn batch_means_se(x: &[f64]) -> f64 {
    let n = x.len();
    let b = (n as f64).sqrt().floor() as usize;
    if b < 2 {
        return f64::NAN;
    }
    let len = n / b;
    let means: Vec<f64> = (0..b).map(|i| x[i * len..(i + 1) * len].iter().sum::<f64>() / len as f64).collect();
    let grand = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (b - 1) as f64;
    (var / b as f64).sqrt()
}

/// Exact posterior probabilities over `models` with full-constant marginals.
pub fn exact_model_probs(models: &[CandidateModel], data: &LinearDataset) -> Result<Vec<f64>> {
    let logs: Vec<f64> = models
        .iter()
        .map(|c| log_marginal_nig(data, &c.id, &c.prior).map(|l| l.value + c.log_prior_weight))
        .collect::<Result<_>>()?;
    let lse = log_sum_exp(&logs);
    Ok(logs.iter().map(|l| (l - lse).exp()).collect())
}

/// Independent draws from the joint posterior over `(m, β, σ²)`.
pub fn sample_joint_posterior<R: Rng + ?Sized>(
    models: &[CandidateModel],
    data: &LinearDataset,
    n_draws: usize,
    rng: &mut R,
) -> Result<Vec<JointDraw>> {
    for c in models {
        require_proper(&c.prior)?;
    }
    let probs = exact_model_probs(models, data)?;
    let posts: Vec<(LinearPosterior, DMatrix<f64>)> = models
        .iter()
        .map(|c| {
            let p = posterior_moments(data, &c.id, &c.prior)?;
            let l = SpdFactor::new(&p.vstar)?.lower();
            Ok((p, l))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = probs.len() - 1;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                k = i;
                break;
            }
        }
        let (post, l) = &posts[k];
        let gamma = Gamma::new(post.a_post, 1.0 / post.lambda_post)
            .map_err(|e| Error::NumericalDomain(format!("invalid posterior gamma: {e}")))?;
        let sigma2 = 1.0 / gamma.sample(rng);
        let z = DVector::from_fn(post.beta_tilde.len(), |_, _| StandardNormal.sample(rng));
        let beta = &post.beta_tilde + l * z * sigma2.sqrt();
        out.push(JointDraw { model: k, beta, sigma2 });
    }
    Ok(out)
}

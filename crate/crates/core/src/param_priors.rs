//! Parameter priors `N(μ, c²Σ)`, base-matrix constructors and unit
//! information.
//!
//! For linear models the prior variance `V = c²Σ` is the variance of `β`
//! given `σ²`; for generalized linear models it is the variance of `β`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{block_diagonal, gram, SpdFactor};

/// Largest absolute linear predictor accepted before `exp` is considered to overflow.
pub const MAX_LINEAR_PREDICTOR: f64 = 700.0;

/// How the base matrix `Σ` was built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseStructure {
    /// `n (XᵀX)⁻¹`.
    Gprior,
    /// Identity.
    Independence,
    /// Block diagonal over log-linear terms, blocks `k_j² (X_jᵀX_j)⁻¹`.
    BlockwiseTerm,
    Custom,
}

/// Normal-inverse-gamma hyperparameters: `σ⁻² ~ Gamma(alpha, rate = lambda)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NigHyper {
    pub alpha: f64,
    pub lambda: f64,
}

impl NigHyper {
    pub fn is_proper(&self) -> bool {
        self.alpha > 0.0 && self.lambda > 0.0
    }
}

/// Gaussian parameter prior with mean `mu` and variance `c2 · sigma_base`.
#[derive(Clone, Debug)]
pub struct ParamPrior {
    mu: DVector<f64>,
    sigma_base: DMatrix<f64>,
    structure: BaseStructure,
    c2: f64,
    nig: Option<NigHyper>,
    improper_sigma2: bool,
    sigma_factor: SpdFactor,
}

impl ParamPrior {
    pub fn new(mu: DVector<f64>, sigma_base: DMatrix<f64>, structure: BaseStructure, c2: f64) -> Result<Self> {
        if sigma_base.nrows() != mu.len() {
            return Err(Error::Contract(format!(
                "prior mean has length {} but base matrix is {}x{}",
                mu.len(),
                sigma_base.nrows(),
                sigma_base.ncols()
            )));
        }
        check_c2(c2)?;
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalDomain("prior mean has non-finite entries".into()));
        }
        let sigma_factor = SpdFactor::new(&sigma_base)?;
        Ok(Self { mu, sigma_base, structure, c2, nig: None, improper_sigma2: false, sigma_factor })
    }

    /// Zero-mean prior.
    pub fn centered(sigma_base: DMatrix<f64>, structure: BaseStructure, c2: f64) -> Result<Self> {
        let d = sigma_base.nrows();
        Self::new(DVector::zeros(d), sigma_base, structure, c2)
    }

    /// Attaches proper NIG hyperparameters (`alpha, lambda > 0`).
    pub fn with_nig(mut self, alpha: f64, lambda: f64) -> Result<Self> {
        if !(alpha > 0.0 && lambda > 0.0) || !alpha.is_finite() || !lambda.is_finite() {
            return Err(Error::Contract(format!(
                "NIG hyperparameters must be positive (alpha={alpha}, lambda={lambda}); use with_improper_sigma2 for alpha=lambda=0"
            )));
        }
        self.nig = Some(NigHyper { alpha, lambda });
        self.improper_sigma2 = false;
        Ok(self)
    }

    /// Uses `f(σ²) ∝ σ⁻²` (`alpha = lambda = 0`); comparison only.
    pub fn with_improper_sigma2(mut self) -> Self {
        self.nig = Some(NigHyper { alpha: 0.0, lambda: 0.0 });
        self.improper_sigma2 = true;
        self
    }

    /// Same prior with a different dispersion; the base factorization is reused.
    pub fn with_c2(&self, c2: f64) -> Result<Self> {
        check_c2(c2)?;
        let mut out = self.clone();
        out.c2 = c2;
        Ok(out)
    }

    pub fn with_mean(&self, mu: DVector<f64>) -> Result<Self> {
        if mu.len() != self.dim() {
            return Err(Error::Contract("prior mean length mismatch".into()));
        }
        let mut out = self.clone();
        out.mu = mu;
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma_base(&self) -> &DMatrix<f64> {
        &self.sigma_base
    }

    pub fn structure(&self) -> BaseStructure {
        self.structure
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn nig(&self) -> Option<NigHyper> {
        self.nig
    }

    pub fn is_improper_sigma2(&self) -> bool {
        self.improper_sigma2
    }

    /// `V = c²Σ`.
    pub fn variance(&self) -> DMatrix<f64> {
        &self.sigma_base * self.c2
    }

    /// `V⁻¹ = c⁻² Σ⁻¹`.
    pub fn precision(&self) -> DMatrix<f64> {
        self.sigma_factor.inverse() / self.c2
    }

    pub fn log_det_sigma(&self) -> f64 {
        self.sigma_factor.log_det()
    }

    /// `log|V| = d log c² + log|Σ|`.
    pub fn log_det_variance(&self) -> f64 {
        self.dim() as f64 * self.c2.ln() + self.sigma_factor.log_det()
    }

    /// `(β − μ)ᵀ V⁻¹ (β − μ)`.
    pub fn mahalanobis(&self, beta: &DVector<f64>) -> f64 {
        self.sigma_factor.inv_quad_form(&(beta - &self.mu)) / self.c2
    }
}

fn check_c2(c2: f64) -> Result<()> {
    if !(c2 > 0.0) || !c2.is_finite() {
        return Err(Error::Contract(format!("dispersion c² must be positive and finite, got {c2}")));
    }
    Ok(())
}

/// Whether the information was evaluated at the prior mean or at an estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfoReference {
    PriorMean,
    /// Evaluated at a data-based estimate; the resulting model prior is not fully Bayesian.
    Empirical,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InformationKind {
    /// `i = n⁻¹ XᵀX` (unit information times `σ²`).
    Linear,
    /// `i = n⁻¹ Xᵀ Diag(exp(X β_ref)) X`.
    Poisson { beta_ref: DVector<f64>, reference: InfoReference },
}

/// Unit Fisher information for a model, with its cached log-determinant.
#[derive(Clone, Debug)]
pub struct InformationSource {
    kind: InformationKind,
    n: usize,
    unit_info: DMatrix<f64>,
    factor: SpdFactor,
}

impl InformationSource {
    pub fn linear(x: &DMatrix<f64>) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::Contract("design has no rows".into()));
        }
        let unit_info = gram(x) / n as f64;
        Self::finish(InformationKind::Linear, n, unit_info)
    }

    /// Linear information from a precomputed Gram matrix `XᵀX`.
    pub fn linear_from_gram(gram: &DMatrix<f64>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Contract("design has no rows".into()));
        }
        Self::finish(InformationKind::Linear, n, gram / n as f64)
    }

    pub fn poisson(x: &DMatrix<f64>, beta_ref: &DVector<f64>, reference: InfoReference) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::Contract("design has no rows".into()));
        }
        let unit_info = fisher_info_poisson(x, beta_ref)?;
        Self::finish(InformationKind::Poisson { beta_ref: beta_ref.clone(), reference }, n, unit_info)
    }

    fn finish(kind: InformationKind, n: usize, unit_info: DMatrix<f64>) -> Result<Self> {
        let factor = SpdFactor::new(&unit_info)
            .map_err(|e| Error::NumericalDomain(format!("singular information matrix: {e}")))?;
        Ok(Self { kind, n, unit_info, factor })
    }

    pub fn kind(&self) -> &InformationKind {
        &self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.unit_info.nrows()
    }

    pub fn unit_information(&self) -> &DMatrix<f64> {
        &self.unit_info
    }

    /// `log|i|`.
    pub fn log_det(&self) -> f64 {
        self.factor.log_det()
    }

    /// False when the information was evaluated at a data-based estimate.
    pub fn is_bayesian(&self) -> bool {
        !matches!(self.kind, InformationKind::Poisson { reference: InfoReference::Empirical, .. })
    }
}

/// g-prior base `Σ = n (XᵀX)⁻¹`.
pub fn gprior_base(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = x.nrows() as f64;
    let deps = crate::linalg::dependent_columns(x);
    if !deps.is_empty() {
        return Err(Error::NumericalDomain(format!("g-prior base needs full column rank; dependent columns {deps:?}")));
    }
    let f = SpdFactor::new(&gram(x))?;
    Ok(f.inverse() * n)
}

/// Block-diagonal base for log-linear term priors: each entry is the design
/// block `X_j` of one term and its `k_j²`.
pub fn blockwise_term_base(blocks: &[(DMatrix<f64>, f64)]) -> Result<DMatrix<f64>> {
    let mats = blocks
        .iter()
        .map(|(xj, k2)| {
            check_c2(*k2)?;
            Ok(SpdFactor::new(&gram(xj))?.inverse() * *k2)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(block_diagonal(&mats))
}

/// Number of units of information in the prior, `c⁻² = (|V|·|i|)^{-1/d}`.
pub fn unit_information_count(v: &DMatrix<f64>, i: &DMatrix<f64>) -> Result<f64> {
    let d = v.nrows();
    if d == 0 {
        return Err(Error::Contract("unit information count is undefined for d = 0".into()));
    }
    if i.nrows() != d {
        return Err(Error::Contract("prior variance and information differ in dimension".into()));
    }
    let log_v = SpdFactor::new(v)?.log_det();
    let log_i = SpdFactor::new(i)?.log_det();
    Ok((-(log_v + log_i) / d as f64).exp())
}

/// Unit Poisson information `n⁻¹ Xᵀ Diag(exp(Xβ)) X`.
pub fn fisher_info_poisson(x: &DMatrix<f64>, beta: &DVector<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() != beta.len() {
        return Err(Error::Contract(format!(
            "design has {} columns but coefficient vector has length {}",
            x.ncols(),
            beta.len()
        )));
    }
    let n = x.nrows();
    let eta = x * beta;
    if let Some(bad) = eta.iter().find(|e| !(e.abs() <= MAX_LINEAR_PREDICTOR)) {
        return Err(Error::NumericalDomain(format!("linear predictor {bad} overflows exp")));
    }
    let mut weighted = x.clone();
    for (mut row, e) in weighted.row_iter_mut().zip(eta.iter()) {
        row *= e.exp();
    }
    let info = x.tr_mul(&weighted) / n as f64;
    Ok((&info + info.transpose()) * 0.5)
}

/// Exact multivariate normal log density of `beta` under `prior`.
pub fn log_prior_density(beta: &DVector<f64>, prior: &ParamPrior) -> Result<f64> {
    if beta.len() != prior.dim() {
        return Err(Error::Contract("coefficient vector length mismatch".into()));
    }
    let d = prior.dim() as f64;
    Ok(-0.5 * d * (2.0 * PI).ln() - 0.5 * prior.log_det_variance() - 0.5 * prior.mahalanobis(beta))
}

/// `log ∫ N(β; μ, Σ)^{1/c²} dβ` for a `d`-dimensional normal with `log|Σ| = log_det_sigma`.
///
/// Renormalizing the powered density gives `N(μ, c²Σ)`.
pub fn flattened_log_mass(d: usize, log_det_sigma: f64, c2: f64) -> f64 {
    let d = d as f64;
    let shrink = 1.0 - 1.0 / c2;
    0.5 * d * shrink * (2.0 * PI).ln() + 0.5 * shrink * log_det_sigma + 0.5 * d * c2.ln()
}

/// Component masses of a mixture `Σ_m w_m N(μ_m, Σ_m)` (components on spaces
/// of possibly different dimension) after raising the mixture density to the
/// power `1/c²` and renormalizing.
pub fn flattened_mixture_weights(components: &[(f64, &ParamPrior)], c2: f64) -> Vec<f64> {
    let logs: Vec<f64> = components
        .iter()
        .map(|(w, p)| w.ln() / c2 + flattened_log_mass(p.dim(), p.log_det_sigma(), c2))
        .collect();
    normalize_logs(&logs)
}

/// Large-`c²` limit of [`flattened_mixture_weights`]: proportional to
/// `|Σ_m|^{1/2} c^{d_m} (2π)^{d_m/2}`, independent of the original weights.
pub fn limiting_mixture_weights(components: &[&ParamPrior], c2: f64) -> Vec<f64> {
    let logs: Vec<f64> = components
        .iter()
        .map(|p| {
            let d = p.dim() as f64;
            0.5 * p.log_det_sigma() + 0.5 * d * c2.ln() + 0.5 * d * (2.0 * PI).ln()
        })
        .collect();
    normalize_logs(&logs)
}

fn normalize_logs(logs: &[f64]) -> Vec<f64> {
    let lse = crate::special::log_sum_exp(logs);
    logs.iter().map(|l| (l - lse).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd3() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 0.8])
    }

    #[test]
    fn gprior_identity_design() {
        let x = DMatrix::identity(4, 4);
        let s = gprior_base(&x).unwrap();
        assert!((s - DMatrix::identity(4, 4) * 4.0).amax() < 1e-12);
    }

    #[test]
    fn gprior_ones_column() {
        let x = DMatrix::from_element(7, 1, 1.0);
        let s = gprior_base(&x).unwrap();
        assert!((s[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gprior_rank_deficient() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert!(matches!(gprior_base(&x), Err(Error::NumericalDomain(_))));
    }

    #[test]
    fn unit_count_scaling() {
        let i = spd3();
        let inv = SpdFactor::new(&i).unwrap().inverse();
        assert!((unit_information_count(&inv, &i).unwrap() - 1.0).abs() < 1e-12);
        assert!((unit_information_count(&(inv * 4.0), &i).unwrap() - 0.25).abs() < 1e-12);
        assert!(unit_information_count(&DMatrix::zeros(0, 0), &DMatrix::zeros(0, 0)).is_err());
    }

    #[test]
    fn unit_count_two_by_two_direct() {
        let v = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let i = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.7]);
        let det_v: f64 = 3.0 * 2.0 - 1.0;
        let det_i: f64 = 0.5 * 0.7 - 0.01;
        let want = (det_v * det_i).powf(-0.5);
        assert!((unit_information_count(&v, &i).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn poisson_info_at_zero_is_gram() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 1.0, -1.0, 1.0, 0.5, 1.0, 2.0]);
        let info = fisher_info_poisson(&x, &DVector::zeros(2)).unwrap();
        assert!((info - gram(&x) / 4.0).amax() < 1e-14);
        let one = fisher_info_poisson(&DMatrix::from_element(1, 1, 1.0), &DVector::from_element(1, 0.7)).unwrap();
        assert!((one[(0, 0)] - 0.7f64.exp()).abs() < 1e-14);
    }

    #[test]
    fn poisson_info_overflow() {
        let x = DMatrix::from_element(1, 1, 1.0);
        assert!(matches!(
            fisher_info_poisson(&x, &DVector::from_element(1, 800.0)),
            Err(Error::NumericalDomain(_))
        ));
    }

    #[test]
    fn log_density_scalar_and_at_mean() {
        let p = ParamPrior::centered(DMatrix::identity(1, 1), BaseStructure::Custom, 1.0).unwrap();
        let v = log_prior_density(&DVector::zeros(1), &p).unwrap();
        assert!((v + 0.5 * (2.0 * PI).ln()).abs() < 1e-15);

        let mu = DVector::from_vec(vec![0.5, -1.0, 2.0]);
        let p = ParamPrior::new(mu.clone(), spd3(), BaseStructure::Custom, 9.0).unwrap();
        let det = spd3().determinant();
        let want = -1.5 * (2.0 * PI).ln() - 0.5 * det.ln() - 3.0 * 3f64.ln();
        assert!((log_prior_density(&mu, &p).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn log_density_matches_explicit_inverse() {
        let mu = DVector::from_vec(vec![0.5, -1.0, 2.0]);
        let p = ParamPrior::new(mu.clone(), spd3(), BaseStructure::Custom, 2.5).unwrap();
        let beta = DVector::from_vec(vec![1.0, 0.2, -0.3]);
        let v = spd3() * 2.5;
        let vinv = v.clone().try_inverse().unwrap();
        let r = &beta - &mu;
        let want = -1.5 * (2.0 * PI).ln() - 0.5 * v.determinant().ln() - 0.5 * (r.transpose() * vinv * &r)[(0, 0)];
        assert!((log_prior_density(&beta, &p).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn non_pd_base_is_rejected() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(ParamPrior::centered(bad, BaseStructure::Custom, 1.0).is_err());
    }

    #[test]
    fn unit_count_scales_with_c2_in_log_space() {
        let s = spd3();
        let i = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 0.9, 0.1, 0.0, 0.1, 1.3]);
        let base = unit_information_count(&s, &i).unwrap();
        for &c2 in &[1e-3, 7.0, 1e8, 1e20] {
            let scaled = unit_information_count(&(&s * c2), &i).unwrap();
            assert!(((scaled / base).ln() + c2.ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn nig_and_improper_flags() {
        let p = ParamPrior::centered(DMatrix::identity(2, 2), BaseStructure::Independence, 1.0).unwrap();
        assert!(p.clone().with_nig(0.0, 0.0).is_err());
        let q = p.clone().with_improper_sigma2();
        assert!(q.is_improper_sigma2());
        assert!(!q.nig().unwrap().is_proper());
        let r = p.with_nig(0.01, 0.01).unwrap();
        assert!(r.nig().unwrap().is_proper());
    }
}

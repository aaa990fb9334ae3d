//! Reversible-jump MCMC over an enumerated model space.
//!
//! Between-model moves pick a neighbouring model uniformly and draw its
//! coefficients from an independence proposal, the per-model Gaussian
//! approximation to the posterior. Within-model moves are random-walk
//! Metropolis steps scaled by the proposal standard deviations. For linear
//! models with a NIG prior the state also carries `σ²`, refreshed by a Gibbs
//! step after each within-model move.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging_shrinkage::ModelPosterior;
use crate::error::{Error, Result};
use crate::glm_laplace::{log_marginal_laplace, GaussianKnownVariance, LaplaceVariant, PoissonLikelihood, RegressionLikelihood};
use crate::linalg::SpdFactor;
use crate::linear_exact::{posterior_moments, JointDraw, LinearDataset};
use crate::model_space::ModelId;
use crate::param_priors::ParamPrior;

/// Identity of the pseudo-random generator recorded in chain metadata.
pub const PRNG_NAME: &str = "chacha20";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Number of sweeps; one state is recorded per sweep.
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub within_model_scale: f64,
    pub between_model_moves_per_sweep: usize,
}

impl SamplerConfig {
    pub fn new(iterations: usize, seed: u64) -> Self {
        Self { iterations, burn_in: iterations / 10, thin: 1, seed, within_model_scale: 1.0, between_model_moves_per_sweep: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::Contract(format!("burn-in {} must be below iterations {}", self.burn_in, self.iterations)));
        }
        if self.thin == 0 {
            return Err(Error::Contract("thin must be at least 1".into()));
        }
        if !(self.within_model_scale > 0.0) || !self.within_model_scale.is_finite() {
            return Err(Error::Contract("within-model scale must be positive".into()));
        }
        Ok(())
    }
}

/// Current state; `model` indexes the target's model list.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub model: usize,
    pub beta: DVector<f64>,
    pub sigma2: Option<f64>,
}

/// A model of the target space with its prior and design.
#[derive(Clone, Debug)]
pub struct RjModel {
    pub id: ModelId,
    pub prior: ParamPrior,
    pub log_prior_weight: f64,
    pub x: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub enum RjData {
    Poisson(PoissonLikelihood),
    GaussianKnownVariance(GaussianKnownVariance),
    /// Normal linear model with unknown `σ²` and NIG prior.
    LinearNig { y: DVector<f64>, alpha: f64, lambda: f64 },
}

#[derive(Clone, Debug)]
struct Proposal {
    mean: DVector<f64>,
    lower: DMatrix<f64>,
    factor: SpdFactor,
    sd: DVector<f64>,
}

impl Proposal {
    fn new(mean: DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        let factor = SpdFactor::new(cov).map_err(|e| Error::NumericalDomain(format!("proposal covariance: {e}")))?;
        let sd = cov.diagonal().map(f64::sqrt);
        Ok(Self { lower: factor.lower(), mean, factor, sd })
    }

    /// Draw from `N(mean, scale2 · cov)`.
    fn draw<R: Rng + ?Sized>(&self, scale2: f64, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.mean.len(), |_, _| StandardNormal.sample(rng));
        &self.mean + &self.lower * z * scale2.sqrt()
    }

    fn log_density(&self, beta: &DVector<f64>, scale2: f64) -> f64 {
        let d = beta.len() as f64;
        -0.5 * d * (2.0 * PI * scale2).ln() - 0.5 * self.factor.log_det() - 0.5 * self.factor.inv_quad_form(&(beta - &self.mean)) / scale2
    }
}

/// Joint posterior target over `(m, β)` (or `(m, β, σ²)`), with precomputed proposals.
#[derive(Clone, Debug)]
pub struct RjTarget {
    models: Vec<RjModel>,
    data: RjData,
    neighbors: Vec<Vec<usize>>,
    proposals: Vec<Proposal>,
    prior_factors: Vec<SpdFactor>,
}

impl RjTarget {
    pub fn new(models: Vec<RjModel>, data: RjData) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::Contract("sampler needs at least one model".into()));
        }
        let n = match &data {
            RjData::Poisson(l) => l.n_obs(),
            RjData::GaussianKnownVariance(l) => l.n_obs(),
            RjData::LinearNig { y, alpha, lambda } => {
                if !(*alpha > 0.0 && *lambda > 0.0) {
                    return Err(Error::Contract("the sampler needs a proper NIG prior".into()));
                }
                y.len()
            }
        };
        for m in &models {
            if m.x.nrows() != n || m.x.ncols() != m.prior.dim() || m.id.dim() != m.prior.dim() {
                return Err(Error::Contract(format!("model {} does not conform with the data", m.id)));
            }
        }
        let neighbors = (0..models.len())
            .map(|i| (0..models.len()).filter(|&j| models[i].id.is_neighbor(&models[j].id)).collect())
            .collect();
        let proposals = models
            .iter()
            .map(|m| match &data {
                RjData::Poisson(l) => laplace_proposal(l, m),
                RjData::GaussianKnownVariance(l) => laplace_proposal(l, m),
                RjData::LinearNig { y, alpha, lambda } => {
                    let ds = LinearDataset::unlabeled(m.x.clone(), y.clone())?;
                    let own = ModelId::Linear { intercept: false, covariates: (0..m.x.ncols()).collect() };
                    let prior = m.prior.clone().with_nig(*alpha, *lambda)?;
                    let post = posterior_moments(&ds, &own, &prior)?;
                    Proposal::new(post.beta_tilde, &post.vstar)
                }
            })
            .collect::<Result<_>>()?;
        let prior_factors = models.iter().map(|m| SpdFactor::new(&m.prior.variance())).collect::<Result<_>>()?;
        Ok(Self { models, data, neighbors, proposals, prior_factors })
    }

    /// Log-linear target from fitted priors; each model's proposal comes from its Laplace fit.
    pub fn loglinear(models: Vec<RjModel>, likelihood: PoissonLikelihood) -> Result<Self> {
        Self::new(models, RjData::Poisson(likelihood))
    }

    pub fn models(&self) -> &[RjModel] {
        &self.models
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn proposal_mean(&self, i: usize) -> &DVector<f64> {
        &self.proposals[i].mean
    }

    pub fn proposal_sd(&self, i: usize) -> &DVector<f64> {
        &self.proposals[i].sd
    }

    fn has_sigma2(&self) -> bool {
        matches!(self.data, RjData::LinearNig { .. })
    }

    /// `σ²`-scale used by the proposal: the current `σ²` for NIG targets, 1 otherwise.
    fn proposal_scale2(&self, state: &ChainState) -> f64 {
        state.sigma2.unwrap_or(1.0)
    }

    /// Unnormalized log target density.
    fn log_target(&self, i: usize, beta: &DVector<f64>, sigma2: Option<f64>) -> f64 {
        let m = &self.models[i];
        let f = &self.prior_factors[i];
        let r = beta - m.prior.mu();
        let d = beta.len() as f64;
        match &self.data {
            RjData::Poisson(l) => {
                m.log_prior_weight + l.loglik(&m.x, beta) - 0.5 * d * (2.0 * PI).ln() - 0.5 * f.log_det() - 0.5 * f.inv_quad_form(&r)
            }
            RjData::GaussianKnownVariance(l) => {
                m.log_prior_weight + l.loglik(&m.x, beta) - 0.5 * d * (2.0 * PI).ln() - 0.5 * f.log_det() - 0.5 * f.inv_quad_form(&r)
            }
            RjData::LinearNig { y, .. } => {
                // σ²-dependent factors common to all models cancel in every ratio taken at fixed σ²
                let s2 = sigma2.expect("NIG target carries sigma2");
                let n = y.len() as f64;
                let rss = (y - &m.x * beta).norm_squared();
                m.log_prior_weight - 0.5 * n * (2.0 * PI * s2).ln() - 0.5 * rss / s2 - 0.5 * d * (2.0 * PI * s2).ln()
                    - 0.5 * f.log_det()
                    - 0.5 * f.inv_quad_form(&r) / s2
            }
        }
    }

    fn initial_state(&self) -> ChainState {
        let sigma2 = match &self.data {
            RjData::LinearNig { y, alpha, lambda } => {
                let m = &self.models[0];
                let beta = &self.proposals[0].mean;
                let rss = (y - &m.x * beta).norm_squared();
                Some((lambda + 0.5 * rss) / (alpha + 0.5 * y.len() as f64))
            }
            _ => None,
        };
        ChainState { model: 0, beta: self.proposals[0].mean.clone(), sigma2 }
    }
}

fn laplace_proposal<L: RegressionLikelihood + ?Sized>(lik: &L, m: &RjModel) -> Result<Proposal> {
    let lap = log_marginal_laplace(lik, &m.x, &m.prior, LaplaceVariant::AtMap)?;
    Proposal::new(lap.fit.beta_hat, &lap.posterior_cov)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub prng: String,
    pub seed: u64,
    pub stream: u64,
    pub between_proposed: u64,
    pub between_accepted: u64,
    pub within_proposed: u64,
    pub within_accepted: u64,
}

impl ChainMeta {
    pub fn within_acceptance_rate(&self) -> f64 {
        self.within_accepted as f64 / self.within_proposed.max(1) as f64
    }

    pub fn between_acceptance_rate(&self) -> f64 {
        self.between_accepted as f64 / self.between_proposed.max(1) as f64
    }
}

/// One state per sweep, including burn-in.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    pub states: Vec<ChainState>,
    pub meta: ChainMeta,
}

/// Runs one chain on stream 0.
pub fn rjmcmc_run(target: &RjTarget, config: &SamplerConfig) -> Result<Chain> {
    run_chain(target, config, 0)
}

/// Runs one chain on an independent stream of the configured seed.
pub fn run_chain(target: &RjTarget, config: &SamplerConfig, stream: u64) -> Result<Chain> {
    config.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);
    let mut meta = ChainMeta {
        prng: PRNG_NAME.into(),
        seed: config.seed,
        stream,
        between_proposed: 0,
        between_accepted: 0,
        within_proposed: 0,
        within_accepted: 0,
    };
    let mut state = target.initial_state();
    let mut states = Vec::with_capacity(config.iterations);
    let scale2 = config.within_model_scale * config.within_model_scale;
    for _ in 0..config.iterations {
        for _ in 0..config.between_model_moves_per_sweep {
            let nb = &target.neighbors[state.model];
            if nb.is_empty() {
                break;
            }
            let to = nb[rng.random_range(0..nb.len())];
            let s2 = target.proposal_scale2(&state);
            let prop_new = &target.proposals[to];
            let prop_old = &target.proposals[state.model];
            let beta_new = prop_new.draw(s2, &mut rng);
            let log_a = target.log_target(to, &beta_new, state.sigma2) - prop_new.log_density(&beta_new, s2)
                - (target.neighbors[to].len() as f64).ln()
                - (target.log_target(state.model, &state.beta, state.sigma2) - prop_old.log_density(&state.beta, s2)
                    - (nb.len() as f64).ln());
            meta.between_proposed += 1;
            if accept(log_a, &mut rng) {
                state.model = to;
                state.beta = beta_new;
                meta.between_accepted += 1;
            }
        }
        within_move(target, &mut state, scale2, &mut rng, &mut meta);
        if target.has_sigma2() {
            gibbs_sigma2(target, &mut state, &mut rng)?;
        }
        states.push(state.clone());
    }
    Ok(Chain { states, meta })
}

fn accept<R: Rng + ?Sized>(log_a: f64, rng: &mut R) -> bool {
    if log_a.is_nan() {
        return false;
    }
    log_a >= 0.0 || rng.random::<f64>().ln() < log_a
}

fn within_move<R: Rng + ?Sized>(target: &RjTarget, state: &mut ChainState, scale2: f64, rng: &mut R, meta: &mut ChainMeta) {
    let sd = &target.proposals[state.model].sd;
    let s = (scale2 * target.proposal_scale2(state)).sqrt();
    let cand = DVector::from_fn(sd.len(), |k, _| state.beta[k] + s * sd[k] * rng.sample::<f64, _>(StandardNormal));
    let log_a = target.log_target(state.model, &cand, state.sigma2) - target.log_target(state.model, &state.beta, state.sigma2);
    meta.within_proposed += 1;
    if accept(log_a, rng) {
        state.beta = cand;
        meta.within_accepted += 1;
    }
}

fn gibbs_sigma2<R: Rng + ?Sized>(target: &RjTarget, state: &mut ChainState, rng: &mut R) -> Result<()> {
    let RjData::LinearNig { y, alpha, lambda } = &target.data else {
        return Ok(());
    };
    let m = &target.models[state.model];
    let f = &target.prior_factors[state.model];
    let rss = (y - &m.x * &state.beta).norm_squared();
    let quad = f.inv_quad_form(&(&state.beta - m.prior.mu()));
    let shape = alpha + 0.5 * (y.len() + state.beta.len()) as f64;
    let rate = lambda + 0.5 * rss + 0.5 * quad;
    let g = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::NumericalDomain(format!("sigma2 update: {e}")))?;
    state.sigma2 = Some(1.0 / g.sample(rng));
    Ok(())
}

/// Runs `n_chains` chains concurrently on streams `0..n_chains`.
pub fn run_chains(target: &RjTarget, config: &SamplerConfig, n_chains: usize) -> Result<Vec<Chain>> {
    (0..n_chains as u64).into_par_iter().map(|s| run_chain(target, config, s)).collect()
}

/// Visit frequencies with batch-means standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelProbEstimate {
    pub probs: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub kept: usize,
}

impl ModelProbEstimate {
    pub fn to_posterior(&self, models: &[ModelId]) -> Result<ModelPosterior> {
        ModelPosterior::from_probabilities(models.iter().cloned().zip(self.probs.iter().copied()).collect())
    }
}

/// Frequencies of model indices after discarding `burn_in` states and keeping every `thin`-th.
pub fn estimate_model_probs(chain: &Chain, n_models: usize, burn_in: usize, thin: usize) -> Result<ModelProbEstimate> {
    let visits: Vec<usize> = chain.states.iter().map(|s| s.model).collect();
    estimate_from_visits(&visits, n_models, burn_in, thin)
}

pub fn estimate_from_visits(visits: &[usize], n_models: usize, burn_in: usize, thin: usize) -> Result<ModelProbEstimate> {
    if thin == 0 {
        return Err(Error::Contract("thin must be at least 1".into()));
    }
    let kept: Vec<usize> = visits.iter().skip(burn_in).step_by(thin).copied().collect();
    if kept.is_empty() {
        return Err(Error::Contract("no states left after burn-in and thinning".into()));
    }
    if let Some(&bad) = kept.iter().find(|&&m| m >= n_models) {
        return Err(Error::Contract(format!("chain visits model {bad} outside the space")));
    }
    let n = kept.len() as f64;
    let mut probs = vec![0.0; n_models];
    for &m in &kept {
        probs[m] += 1.0;
    }
    for p in &mut probs {
        *p /= n;
    }
    let std_errors = (0..n_models)
        .map(|k| {
            let ind: Vec<f64> = kept.iter().map(|&m| f64::from(u8::from(m == k))).collect();
            let se = crate::linear_exact::batch_means_se(&ind);
            if se.is_nan() {
                0.0
            } else {
                se
            }
        })
        .collect();
    Ok(ModelProbEstimate { probs, std_errors, kept: kept.len() })
}

impl Chain {
    /// Draws after burn-in and thinning in the form used by the Gelfand estimator.
    pub fn joint_draws(&self, burn_in: usize, thin: usize) -> Result<Vec<JointDraw>> {
        if thin == 0 {
            return Err(Error::Contract("thin must be at least 1".into()));
        }
        self.states
            .iter()
            .skip(burn_in)
            .step_by(thin)
            .map(|s| {
                let sigma2 = s.sigma2.ok_or_else(|| Error::Contract("chain has no sigma2 draws".into()))?;
                Ok(JointDraw { model: s.model, beta: s.beta.clone(), sigma2 })
            })
            .collect()
    }

    /// CSV dump: `iteration,model,sigma2,beta_1,…,beta_D` with empty trailing fields
    /// for models of lower dimension.
    pub fn write_csv<W: Write>(&self, models: &[ModelId], labels: &dyn Fn(&ModelId) -> String, out: &mut W) -> std::io::Result<()> {
        let dmax = models.iter().map(ModelId::dim).max().unwrap_or(0);
        write!(out, "iteration,model,sigma2")?;
        for k in 1..=dmax {
            write!(out, ",beta_{k}")?;
        }
        writeln!(out)?;
        for (i, s) in self.states.iter().enumerate() {
            write!(out, "{},{},", i + 1, labels(&models[s.model]))?;
            if let Some(v) = s.sigma2 {
                write!(out, "{v:.16e}")?;
            }
            for k in 0..dmax {
                match s.beta.get(k) {
                    Some(v) => write!(out, ",{v:.16e}")?,
                    None => write!(out, ",")?,
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::param_priors::BaseStructure;

    fn fake_chain(models: &[usize]) -> Chain {
        Chain {
            states: models.iter().map(|&m| ChainState { model: m, beta: DVector::zeros(0), sigma2: None }).collect(),
            meta: ChainMeta {
                prng: PRNG_NAME.into(),
                seed: 0,
                stream: 0,
                between_proposed: 0,
                between_accepted: 0,
                within_proposed: 0,
                within_accepted: 0,
            },
        }
    }

    #[test]
    fn estimate_single_and_alternating() {
        let e = estimate_model_probs(&fake_chain(&[0; 50]), 2, 0, 1).unwrap();
        assert_eq!(e.probs, vec![1.0, 0.0]);
        assert_eq!(e.std_errors, vec![0.0, 0.0]);
        let alt: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let e = estimate_model_probs(&fake_chain(&alt), 2, 0, 1).unwrap();
        assert_eq!(e.probs, vec![0.5, 0.5]);
    }

    #[test]
    fn estimate_known_frequencies_with_burn_in() {
        let mut v = vec![2; 10];
        v.extend(std::iter::repeat_n(0, 30));
        v.extend(std::iter::repeat_n(1, 60));
        v.extend(std::iter::repeat_n(2, 10));
        let e = estimate_model_probs(&fake_chain(&v), 3, 10, 1).unwrap();
        assert_eq!(e.kept, 100);
        assert_eq!(e.probs, vec![0.3, 0.6, 0.1]);
        assert!(estimate_model_probs(&fake_chain(&v), 3, 500, 1).is_err());
    }

    fn gaussian_single(n: usize) -> RjTarget {
        let x = DMatrix::from_element(n, 1, 1.0);
        let y = DVector::from_fn(n, |i, _| (i as f64 * 0.37).sin() + 1.0);
        let prior = ParamPrior::centered(DMatrix::identity(1, 1), BaseStructure::Custom, 4.0).unwrap();
        let m = RjModel { id: ModelId::linear(true, &[]).unwrap(), prior, log_prior_weight: 0.0, x };
        RjTarget::new(vec![m], RjData::GaussianKnownVariance(GaussianKnownVariance { y, sigma2: 1.0 })).unwrap()
    }

    #[test]
    fn seed_determinism() {
        let t = gaussian_single(20);
        let cfg = SamplerConfig::new(500, 42);
        let a = rjmcmc_run(&t, &cfg).unwrap();
        let b = rjmcmc_run(&t, &cfg).unwrap();
        assert_eq!(a, b);
        let c = run_chain(&t, &cfg, 1).unwrap();
        assert_ne!(a.states, c.states);
    }

    #[test]
    fn config_validation() {
        let mut c = SamplerConfig::new(10, 1);
        c.burn_in = 10;
        assert!(c.validate().is_err());
        c.burn_in = 0;
        c.thin = 0;
        assert!(c.validate().is_err());
    }
}

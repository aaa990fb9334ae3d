mod common;

use jointprior_core::glm_laplace::{log_marginal_gaussian_exact, GaussianKnownVariance};
use jointprior_core::linear_exact::{batch_means_se, exact_model_probs, CandidateModel, LinearDataset};
use jointprior_core::model_space::ModelId;
use jointprior_core::param_priors::{gprior_base, BaseStructure, ParamPrior};
use jointprior_core::rj_sampler::{estimate_model_probs, rjmcmc_run, run_chains, RjData, RjModel, RjTarget, SamplerConfig};
use nalgebra::{DMatrix, DVector};

fn toy_linear(n: usize, slope: f64, seed: u64) -> LinearDataset {
    let z = common::normals(seed, 2 * n);
    let x = DMatrix::from_fn(n, 1, |i, _| z[i]);
    let y = DVector::from_fn(n, |i, _| 1.0 + slope * z[i] + z[n + i]);
    LinearDataset::unlabeled(x, y).unwrap()
}

fn two_models() -> [ModelId; 2] {
    [ModelId::linear(true, &[]).unwrap(), ModelId::linear(true, &[0]).unwrap()]
}

#[test]
fn single_model_chain_stays_and_centres_on_mode() {
    let data = toy_linear(30, 0.8, 3);
    let m = ModelId::linear(true, &[0]).unwrap();
    let x = data.design(&m).unwrap();
    let prior = ParamPrior::centered(DMatrix::identity(2, 2) * 10.0, BaseStructure::Independence, 1.0).unwrap();
    let target = RjTarget::new(
        vec![RjModel { id: m, prior, log_prior_weight: 0.0, x }],
        RjData::GaussianKnownVariance(GaussianKnownVariance { y: data.y().clone(), sigma2: 1.0 }),
    )
    .unwrap();
    let mut cfg = SamplerConfig::new(40_000, 9);
    cfg.within_model_scale = 2.4;
    let chain = rjmcmc_run(&target, &cfg).unwrap();
    assert!(chain.states.iter().all(|s| s.model == 0));
    let mode = target.proposal_mean(0).clone();
    for k in 0..2 {
        let draws: Vec<f64> = chain.states[cfg.burn_in..].iter().map(|s| s.beta[k]).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let se = batch_means_se(&draws);
        assert!((mean - mode[k]).abs() < 3.0 * se, "coef {k}: {mean} vs {} (se {se})", mode[k]);
    }
}

#[test]
fn within_model_acceptance_matches_theory() {
    // one-dimensional Gaussian posterior; proposal sd = scale × posterior sd
    let y = DVector::from_vec(vec![0.3, -0.2, 1.1, 0.4]);
    let x = DMatrix::from_element(4, 1, 1.0);
    let prior = ParamPrior::centered(DMatrix::identity(1, 1), BaseStructure::Custom, 1.0).unwrap();
    let target = RjTarget::new(
        vec![RjModel { id: ModelId::linear(true, &[]).unwrap(), prior, log_prior_weight: 0.0, x }],
        RjData::GaussianKnownVariance(GaussianKnownVariance { y, sigma2: 1.0 }),
    )
    .unwrap();
    for scale in [0.5, 1.0, 2.4, 5.0] {
        let mut cfg = SamplerConfig::new(20_000, 17);
        cfg.within_model_scale = scale;
        let chain = rjmcmc_run(&target, &cfg).unwrap();
        let theory = 2.0 / std::f64::consts::PI * (2.0 / scale).atan();
        let rate = chain.meta.within_acceptance_rate();
        assert!((rate - theory).abs() < 0.05, "scale {scale}: {rate} vs {theory}");
    }
}

#[test]
fn two_model_linear_frequencies_match_enumeration() {
    let data = toy_linear(30, 0.3, 21);
    let models: Vec<CandidateModel> = two_models()
        .into_iter()
        .map(|id| {
            let base = gprior_base(&data.design(&id).unwrap()).unwrap();
            let prior = ParamPrior::centered(base, BaseStructure::Gprior, 1.0).unwrap().with_nig(1.0, 1.0).unwrap();
            CandidateModel { id, prior, log_prior_weight: 0.0 }
        })
        .collect();
    let exact = exact_model_probs(&models, &data).unwrap();
    assert!(exact[0] > 0.05 && exact[0] < 0.95, "fixture should be ambiguous: {exact:?}");
    let rj: Vec<RjModel> = models
        .iter()
        .map(|c| RjModel { id: c.id.clone(), prior: c.prior.clone(), log_prior_weight: 0.0, x: data.design(&c.id).unwrap() })
        .collect();
    let target = RjTarget::new(rj, RjData::LinearNig { y: data.y().clone(), alpha: 1.0, lambda: 1.0 }).unwrap();
    let cfg = SamplerConfig::new(200_000, 5);
    let chain = rjmcmc_run(&target, &cfg).unwrap();
    let est = estimate_model_probs(&chain, 2, cfg.burn_in, 1).unwrap();
    #[allow(clippy::needless_range_loop)]
    for k in 0..2 {
        assert!((est.probs[k] - exact[k]).abs() < 3.0 * est.std_errors[k], "model {k}: {} vs {} (se {})", est.probs[k], exact[k], est.std_errors[k]);
    }
    assert!(chain.states.iter().all(|s| s.sigma2.is_some_and(|v| v > 0.0)));
}

#[test]
fn equal_evidence_models_split_evenly() {
    let data = toy_linear(25, 0.6, 8);
    let lik = GaussianKnownVariance { y: data.y().clone(), sigma2: 1.0 };
    let rj: Vec<RjModel> = two_models()
        .into_iter()
        .map(|id| {
            let x = data.design(&id).unwrap();
            let prior = ParamPrior::centered(DMatrix::identity(id.dim(), id.dim()) * 4.0, BaseStructure::Independence, 1.0).unwrap();
            let logml = log_marginal_gaussian_exact(&lik, &x, &prior).unwrap().value;
            RjModel { id, prior, log_prior_weight: -logml, x }
        })
        .collect();
    let target = RjTarget::new(rj, RjData::GaussianKnownVariance(lik)).unwrap();
    let cfg = SamplerConfig::new(50_000, 77);
    let chains = run_chains(&target, &cfg, 2).unwrap();
    assert_ne!(chains[0].states, chains[1].states);
    for chain in &chains {
        let est = estimate_model_probs(chain, 2, cfg.burn_in, 1).unwrap();
        // the proposals are the exact conditional posteriors here, so every jump is accepted
        assert!((est.probs[0] - 0.5).abs() <= 3.0 * est.std_errors[0] + 1e-12, "{:?}", est);
        assert!(chain.meta.between_acceptance_rate() > 0.999);
    }
}

#[test]
fn non_positive_definite_proposal_is_rejected_at_setup() {
    // a maximum-likelihood fit that does not exist: all-zero counts
    let x = DMatrix::from_element(3, 1, 1.0);
    let prior = ParamPrior::centered(DMatrix::identity(1, 1) * 1e300, BaseStructure::Custom, 1.0).unwrap();
    let lik = jointprior_core::glm_laplace::PoissonLikelihood::new(vec![0.0, 0.0, 0.0]);
    let res = RjTarget::new(vec![RjModel { id: ModelId::linear(true, &[]).unwrap(), prior, log_prior_weight: 0.0, x }], RjData::Poisson(lik));
    assert!(res.is_err());
}

mod common;

use jointprior_core::averaging_shrinkage::{inclusion_probs, ModelPosterior};
use jointprior_core::linear_exact::{log_marginal_gprior_closed, log_marginal_nig, log_marginal_nig_kernel, LinearDataset};
use jointprior_core::marginal::ConstantConvention;
use jointprior_core::model_space::{enumerate_linear_models, log_prior_model_weight, Baseline, ModelId, ModelPriorPolicy, PolicyVariant};
use jointprior_core::param_priors::{gprior_base, BaseStructure, InformationSource, ParamPrior};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn dataset(seed: u64, n: usize, p: usize) -> LinearDataset {
    let z = common::normals(seed, n * (p + 1));
    let x = DMatrix::from_fn(n, p, |i, j| z[i * (p + 1) + j]);
    let y = DVector::from_fn(n, |i, _| 0.7 * x[(i, 0)] + z[i * (p + 1) + p]);
    LinearDataset::unlabeled(x, y).unwrap()
}

fn gprior(data: &LinearDataset, m: &ModelId, c2: f64, alpha: f64, lambda: f64) -> ParamPrior {
    let x = data.design(m).unwrap();
    ParamPrior::centered(gprior_base(&x).unwrap(), BaseStructure::Gprior, c2).unwrap().with_nig(alpha, lambda).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bayes_factor_independent_of_constant_convention(seed in 0u64..1000, c2 in 0.01f64..1e4, alpha in 0.1f64..5.0, lambda in 0.1f64..5.0) {
        let data = dataset(seed, 20, 3);
        let m1 = ModelId::linear(true, &[0]).unwrap();
        let m2 = ModelId::linear(true, &[0, 2]).unwrap();
        let (p1, p2) = (gprior(&data, &m1, c2, alpha, lambda), gprior(&data, &m2, c2, alpha, lambda));
        let full = log_marginal_nig(&data, &m1, &p1).unwrap().value - log_marginal_nig(&data, &m2, &p2).unwrap().value;
        let kern = log_marginal_nig_kernel(&data, &m1, &p1).unwrap().value - log_marginal_nig_kernel(&data, &m2, &p2).unwrap().value;
        prop_assert!((full - kern).abs() < 1e-9 * (1.0 + full.abs()));
    }

    #[test]
    fn gprior_marginal_invariant_to_column_scaling(seed in 0u64..1000, s in 0.01f64..100.0, c2 in 0.1f64..1e6) {
        let data = dataset(seed, 25, 2);
        let mut x = data.x().clone();
        x.column_mut(1).scale_mut(s);
        let scaled = LinearDataset::unlabeled(x, data.y().clone()).unwrap();
        let m = ModelId::linear(true, &[0, 1]).unwrap();
        let a = log_marginal_nig(&data, &m, &gprior(&data, &m, c2, 1.0, 1.0)).unwrap().value;
        let b = log_marginal_nig(&scaled, &m, &gprior(&scaled, &m, c2, 1.0, 1.0)).unwrap().value;
        prop_assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()));
    }

    #[test]
    fn marginal_invariant_to_row_permutation(seed in 0u64..1000, shift in 1usize..19) {
        let data = dataset(seed, 20, 2);
        let perm: Vec<usize> = (0..20).map(|i| (i * 7 + shift) % 20).collect();
        let x = DMatrix::from_fn(20, 2, |i, j| data.x()[(perm[i], j)]);
        let y = DVector::from_fn(20, |i, _| data.y()[perm[i]]);
        let permuted = LinearDataset::unlabeled(x, y).unwrap();
        let m = ModelId::linear(true, &[0, 1]).unwrap();
        for c2 in [0.5, 100.0] {
            let a = log_marginal_nig(&data, &m, &gprior(&data, &m, c2, 2.0, 1.0)).unwrap().value;
            let b = log_marginal_nig(&permuted, &m, &gprior(&permuted, &m, c2, 2.0, 1.0)).unwrap().value;
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn adjusted_c_equals_adjusted_info_for_unit_information_base(seed in 0u64..1000, c2 in 1e-2f64..1e8, k in 1usize..4) {
        let data = dataset(seed, 30, 4);
        let m = ModelId::linear(true, &(0..k).collect::<Vec<_>>()).unwrap();
        let x = data.design(&m).unwrap();
        let prior = ParamPrior::centered(gprior_base(&x).unwrap(), BaseStructure::Gprior, c2).unwrap();
        let info = InformationSource::linear(&x).unwrap();
        let a = log_prior_model_weight(&m, &ModelPriorPolicy::new(PolicyVariant::AdjustedC, Baseline::Constant), &prior, None).unwrap();
        let b = log_prior_model_weight(&m, &ModelPriorPolicy::new(PolicyVariant::AdjustedInfo, Baseline::Constant), &prior, Some(&info)).unwrap();
        prop_assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()));
    }

    #[test]
    fn lindley_limit_favors_null_under_uniform_policy(seed in 0u64..1000) {
        let data = dataset(seed, 30, 2);
        let models = enumerate_linear_models(2, true).unwrap();
        let null_prob = |c2: f64| {
            let w: Vec<(ModelId, f64)> = models
                .iter()
                .map(|m| (m.clone(), log_marginal_gprior_closed(&data, m, c2, 1.0, 1.0).unwrap().value))
                .collect();
            ModelPosterior::from_log_weights(w, ConstantConvention::Kernel).unwrap().probabilities()[0]
        };
        let probs: Vec<f64> = [1e8, 1e16, 1e24, 1e32].iter().map(|&c2| null_prob(c2)).collect();
        prop_assert!(probs.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        prop_assert!(probs[3] > 0.999);
    }

    #[test]
    fn posterior_log_odds_equal_weight_differences(ws in prop::collection::vec(-200.0f64..200.0, 2..8)) {
        let entries: Vec<(ModelId, f64)> = ws.iter().enumerate().map(|(i, w)| (ModelId::linear(true, &[i]).unwrap(), *w)).collect();
        let post = ModelPosterior::from_log_weights(entries, ConstantConvention::Full).unwrap();
        let total: f64 = post.probabilities().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for (i, j) in [(0usize, 1usize), (1, ws.len() - 1)] {
            let (a, b) = (&post.entries()[i], &post.entries()[j]);
            prop_assert!((a.log_probability - b.log_probability - (ws[i] - ws[j])).abs() < 1e-9);
        }
    }

    #[test]
    fn inclusion_unchanged_by_zero_probability_model(ps in prop::collection::vec(0.01f64..1.0, 4)) {
        let models = enumerate_linear_models(2, true).unwrap();
        let base: Vec<(ModelId, f64)> = models.iter().cloned().zip(ps.iter().copied()).collect();
        let mut extended = base.clone();
        extended.push((ModelId::linear(true, &[0, 1, 2]).unwrap(), 0.0));
        let a = inclusion_probs(&ModelPosterior::from_probabilities(base).unwrap(), 3).unwrap();
        let b = inclusion_probs(&ModelPosterior::from_probabilities(extended).unwrap(), 3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-15);
        }
        prop_assert_eq!(b[2], 0.0);
    }
}

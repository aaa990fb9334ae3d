//! Task dispatch: each task turns a loaded config into a result table.

use std::path::Path;

use jointprior_core::averaging_shrinkage::{shrinkage_curve, KPolicy, ModelPosterior};
use jointprior_core::glm_laplace::{ContingencyTable, LaplaceVariant};
use jointprior_core::linear_exact::{
    cv_score, exact_model_probs, sample_joint_posterior, CvMode, LinearDataset, SampleKind,
};
use jointprior_core::model_space::{FactorSpec, ModelId, ModelPriorPolicy};
use jointprior_core::rj_sampler::{
    estimate_model_probs, run_chains, RjData, RjModel, RjTarget, SamplerConfig, PRNG_NAME,
};
use nalgebra::DVector;
use rand_distr::{Distribution, Normal};

use crate::config::{
    require_seed, CvModeKind, DataSource, ExperimentConfig, GeneratorName, KPolicyKind, LoadedConfig, Task,
};
use crate::data_io::{load_contingency_csv, load_linear_csv};
use crate::error::{BenchError, Result};
use crate::linear::{cv_sweep, linear_prior, log_weight, parse_linear_model, run_sweep, subset_models, LinearSpace};
use crate::loglinear::{self, half_log2_baseline, LoglinearModel};
use crate::output::{Provenance, Table, Value};
use crate::simulate::{rng_for, simulate_dfn, simulate_nott_kohn, simulate_table, with_correlated_extras};

/// Intercept of simulated tables when none is configured (cell means near 55).
pub const DEFAULT_SIM_INTERCEPT: f64 = 4.0;
/// Standard deviation of the non-intercept coefficients of simulated tables.
pub const SIM_COEF_SD: f64 = 0.3;

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct TaskOutput {
    pub table: Table,
    pub provenance: Provenance,
}

/// Runs the configured task. `cli_task` must match the config when both are given.
pub fn run(loaded: &LoadedConfig, cli_task: Option<Task>, ov: &Overrides) -> Result<TaskOutput> {
    let mut cfg = loaded.config.clone();
    if let Some(t) = cli_task {
        if t != cfg.task {
            return Err(BenchError::Parse(format!("subcommand {} does not match config task {}", t.name(), cfg.task.name())));
        }
    }
    if ov.seed.is_some() {
        cfg.seed = ov.seed;
    }
    let mut prov = Provenance::default();
    prov.add("tool", concat!("jointprior ", env!("CARGO_PKG_VERSION")));
    prov.add("config_hash", &loaded.sha256);
    prov.add("task", cfg.task.name());
    prov.add("seed", cfg.seed.map_or("none".to_string(), |s| s.to_string()));
    let table = match cfg.task {
        Task::PriorProbs => prior_probs(&cfg, &mut prov)?,
        Task::Sweep => sweep(&cfg, &mut prov)?,
        Task::Cv => cv(&cfg, &mut prov)?,
        Task::Rjmcmc => rjmcmc(&cfg, &mut prov)?,
        Task::Shrinkage => shrinkage(&cfg, &mut prov)?,
        Task::Simulate => simulate(&cfg, &mut prov)?,
    };
    Ok(TaskOutput { table, provenance: prov })
}

fn policies(cfg: &ExperimentConfig) -> Vec<ModelPriorPolicy> {
    let baseline = match &cfg.loglinear {
        Some(l) if l.half_log2_baseline => half_log2_baseline(),
        _ => cfg.policy.baseline.to_baseline(),
    };
    cfg.policy.variants.iter().map(|&v| ModelPriorPolicy::new(v, baseline.clone())).collect()
}

fn policy_names(ps: &[ModelPriorPolicy]) -> String {
    ps.iter().map(ModelPriorPolicy::name).collect::<Vec<_>>().join(";")
}

fn add_prior_provenance(cfg: &ExperimentConfig, prov: &mut Provenance) {
    let ps = policies(cfg);
    prov.add("policy", policy_names(&ps));
    prov.add("baseline", format!("{:?}", ps[0].baseline));
    if let Some(l) = &cfg.loglinear {
        prov.add("prior_template", match l.preset {
            Some(p) => format!("loglinear preset {p:?}, ks_k2={:?}", l.ks_k2),
            None => format!("loglinear default_k2={:?} default_scale={:?}", l.default_k2, l.default_scale),
        });
    } else {
        let t = &cfg.prior;
        prov.add("prior_template", format!("{:?} base, alpha={}, lambda={}, intercept={}", t.base, t.alpha, t.lambda, t.intercept));
    }
}

fn grid(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    cfg.grid.as_ref().ok_or_else(|| BenchError::Parse(format!("task {} needs a [grid] section", cfg.task.name())))?.values()
}

/// Regression data and the 0-based covariates spanning the model space.
pub fn resolve_linear(cfg: &ExperimentConfig, prov: &mut Provenance) -> Result<(LinearDataset, Vec<usize>)> {
    let src = cfg.data.as_ref().ok_or_else(|| BenchError::Parse("a [data] section is required".into()))?;
    let (data, covariates) = match src {
        DataSource::Csv { path, response } => {
            let (data, rep) = load_linear_csv(path, response)?;
            prov.add("data", format!("csv {}", path.display()));
            prov.add("data_shape", format!("n={} p={} rank={}", rep.n, rep.p, rep.rank));
            (data, Vec::new())
        }
        DataSource::Generator { name, extra_correlations, extra_target, covariates } => {
            let seed = require_seed(cfg)?;
            let base = match name {
                GeneratorName::Dfn => simulate_dfn(seed),
                GeneratorName::NottKohn => simulate_nott_kohn(seed),
            };
            let data = if extra_correlations.is_empty() {
                base
            } else {
                if *extra_target == 0 {
                    return Err(BenchError::Parse("data.extra_target is 1-based".into()));
                }
                with_correlated_extras(&base, extra_target - 1, extra_correlations, seed)?
            };
            prov.add("data", format!("generator {name:?}"));
            (data, covariates.clone())
        }
        DataSource::Contingency { .. } => {
            return Err(BenchError::Parse(format!("task {} needs regression data, not a contingency table", cfg.task.name())))
        }
    };
    let covariates = if covariates.is_empty() {
        (0..data.p()).collect()
    } else {
        covariates
            .iter()
            .map(|&c| {
                if c == 0 || c > data.p() {
                    Err(BenchError::Parse(format!("covariate index {c} outside 1..={}", data.p())))
                } else {
                    Ok(c - 1)
                }
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok((data, covariates))
}

struct LoglinearSetup {
    spec: FactorSpec,
    labels: Vec<Vec<String>>,
    priors: jointprior_core::glm_laplace::TermPriorSet,
}

fn loglinear_setup(cfg: &ExperimentConfig) -> Result<Option<LoglinearSetup>> {
    cfg.loglinear
        .as_ref()
        .map(|sec| loglinear::from_section(sec).map(|(spec, labels, priors)| LoglinearSetup { spec, labels, priors }))
        .transpose()
}

/// Coefficients for a simulated table: configured intercept, others `N(0, SIM_COEF_SD²)`.
pub fn simulation_coefficients(dim: usize, intercept: f64, seed: u64) -> DVector<f64> {
    let mut rng = rng_for(seed, 2);
    let normal = Normal::new(0.0, SIM_COEF_SD).expect("positive sd");
    DVector::from_fn(dim, |i, _| if i == 0 { intercept } else { normal.sample(&mut rng) })
}

fn resolve_table(cfg: &ExperimentConfig, setup: &LoglinearSetup, prov: &mut Provenance) -> Result<ContingencyTable> {
    let sec = cfg.loglinear.as_ref().expect("setup implies section");
    match (&cfg.data, &sec.simulate_from) {
        (Some(DataSource::Contingency { path }), None) => {
            prov.add("data", format!("contingency {}", path.display()));
            load_contingency_csv(path, &setup.spec, &setup.labels)
        }
        (None, Some(label)) => {
            let seed = require_seed(cfg)?;
            let m = loglinear::parse_model(&setup.spec, label)?;
            let beta = simulation_coefficients(m.dim(), sec.simulate_intercept.unwrap_or(DEFAULT_SIM_INTERCEPT), seed);
            prov.add("data", format!("simulated from {label}"));
            simulate_table(&setup.spec, &m, &beta, seed)
        }
        (Some(_), Some(_)) => Err(BenchError::Parse("give either a contingency [data] source or loglinear.simulate_from, not both".into())),
        _ => Err(BenchError::Parse("log-linear tasks need a contingency [data] source or loglinear.simulate_from".into())),
    }
}

fn prior_probs(cfg: &ExperimentConfig, prov: &mut Provenance) -> Result<Table> {
    add_prior_provenance(cfg, prov);
    let ps = policies(cfg);
    if let Some(setup) = loglinear_setup(cfg)? {
        let mut t = Table::new(&["policy", "model", "dim", "log_weight", "probability"]);
        for p in &ps {
            let models = loglinear::weighted_models(&setup.spec, &setup.priors, p)?;
            let probs = loglinear::prior_probabilities(&models)?.probabilities();
            for (m, pr) in models.iter().zip(probs) {
                t.push(vec![p.name().into(), m.label.clone().into(), m.id.dim().into(), m.log_prior_weight.into(), pr.into()]);
            }
        }
        return Ok(t);
    }
    let (data, cov) = resolve_linear(cfg, prov)?;
    let models = subset_models(&cov, cfg.prior.intercept)?;
    let mut t = Table::new(&["policy", "c2", "model", "dim", "log_weight", "probability"]);
    for p in &ps {
        for &c2 in &grid(cfg)? {
            let w = models
                .iter()
                .map(|m| {
                    let prior = linear_prior(&cfg.prior, &data, m, c2)?;
                    Ok((m.clone(), log_weight(p, &data, m, &prior)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let post = ModelPosterior::from_log_weights(w.clone(), jointprior_core::marginal::ConstantConvention::Full)
                .map_err(|e| BenchError::core("prior probabilities", e))?;
            for ((m, lw), pr) in w.iter().zip(post.probabilities()) {
                t.push(vec![p.name().into(), c2.into(), m.label(data.labels()).into(), m.dim().into(), (*lw).into(), pr.into()]);
            }
        }
    }
    Ok(t)
}

fn sweep(cfg: &ExperimentConfig, prov: &mut Provenance) -> Result<Table> {
    add_prior_provenance(cfg, prov);
    let ps = policies(cfg);
    if let Some(setup) = loglinear_setup(cfg)? {
        let table = resolve_table(cfg, &setup, prov)?;
        prov.add("convention", "full");
        prov.add("marginal", "laplace at_map");
        let mut t = Table::new(&["policy", "model", "dim", "prior_probability", "posterior_probability"]);
        for p in &ps {
            let models = loglinear::weighted_models(&setup.spec, &setup.priors, p)?;
            let prior = loglinear::prior_probabilities(&models)?.probabilities();
            let post = loglinear::posterior_probabilities(&table, &models, LaplaceVariant::AtMap)?.probabilities();
            for ((m, a), b) in models.iter().zip(prior).zip(post) {
                t.push(vec![p.name().into(), m.label.clone().into(), m.id.dim().into(), a.into(), b.into()]);
            }
        }
        return Ok(t);
    }
    let (data, cov) = resolve_linear(cfg, prov)?;
    let models = subset_models(&cov, cfg.prior.intercept)?;
    let watch = cfg
        .sweep
        .watch
        .iter()
        .map(|w| parse_linear_model(&data, w, cfg.prior.intercept))
        .collect::<Result<Vec<_>>>()?;
    let space = LinearSpace::new(&data, models, cfg.prior.clone())?;
    prov.add("convention", if space.uses_closed_form() { "kernel" } else { "full" });
    prov.add("models", space.models.len());
    let points = run_sweep(&space, &ps, &grid(cfg)?)?;
    let mut t = Table::new(&["policy", "c2", "quantity", "name", "value"]);
    for pt in &points {
        let mut named: Vec<&ModelId> = pt.posterior.top(cfg.sweep.top_k).iter().map(|e| &e.model).collect();
        for w in &watch {
            if !named.contains(&w) {
                named.push(w);
            }
        }
        for m in named {
            let pr = pt.posterior.probability(m).ok_or_else(|| BenchError::Parse(format!("watched model {} is not in the space", m.label(data.labels()))))?;
            t.push(vec![pt.policy.clone().into(), pt.c2.into(), "model_probability".into(), m.label(data.labels()).into(), pr.into()]);
        }
        for &j in &cov {
            t.push(vec![pt.policy.clone().into(), pt.c2.into(), "inclusion".into(), data.labels()[j].clone().into(), pt.inclusion[j].into()]);
        }
    }
    Ok(t)
}

fn cv(cfg: &ExperimentConfig, prov: &mut Provenance) -> Result<Table> {
    add_prior_provenance(cfg, prov);
    let ps = policies(cfg);
    let (data, cov) = resolve_linear(cfg, prov)?;
    let models = subset_models(&cov, cfg.prior.intercept)?;
    let space = LinearSpace::new(&data, models, cfg.prior.clone())?;
    prov.add("convention", "full");
    let g = grid(cfg)?;
    let mut t = Table::new(&["policy", "c2", "mode", "weighting", "score", "std_error"]);
    match cfg.cv.mode {
        CvModeKind::Exact => {
            for (p, c2, s) in cv_sweep(&space, &ps, &g, cfg.cv.weighting)? {
                t.push(vec![p.into(), c2.into(), "exact".into(), format!("{:?}", s.weighting).to_lowercase().into(), s.score.into(), f64::NAN.into()]);
            }
        }
        CvModeKind::Gelfand => {
            let seed = require_seed(cfg)?;
            prov.add("prng", PRNG_NAME);
            let mut stream = 0;
            for p in &ps {
                for &c2 in &g {
                    let cands = space.candidates(p, c2)?;
                    let mut rng = rng_for(seed, stream);
                    stream += 1;
                    let at = |e| BenchError::core(format!("gelfand cv at c2={c2:e}"), e);
                    let draws = sample_joint_posterior(&cands, &data, cfg.cv.draws, &mut rng).map_err(at)?;
                    let s = cv_score(&cands, &data, CvMode::Gelfand { draws: &draws, kind: SampleKind::Independent }).map_err(at)?;
                    t.push(vec![p.name().into(), c2.into(), "gelfand".into(), "posterior".into(), s.score.into(), s.std_error.unwrap_or(f64::NAN).into()]);
                }
            }
        }
    }
    Ok(t)
}

fn sampler_config(cfg: &ExperimentConfig, seed: u64) -> Result<SamplerConfig> {
    let r = &cfg.rjmcmc;
    let sc = SamplerConfig {
        iterations: r.iterations,
        burn_in: r.burn_in,
        thin: r.thin,
        seed,
        within_model_scale: r.within_model_scale,
        between_model_moves_per_sweep: r.between_moves,
    };
    sc.validate().map_err(|e| BenchError::core("rjmcmc settings", e))?;
    if r.chains == 0 {
        return Err(BenchError::Parse("rjmcmc.chains must be at least 1".into()));
    }
    Ok(sc)
}

fn dump_path(base: &Path, chain: usize) -> std::path::PathBuf {
    let stem = base.file_stem().map_or("chain".into(), |s| s.to_string_lossy().into_owned());
    let ext = base.extension().map_or("csv".into(), |s| s.to_string_lossy().into_owned());
    base.with_file_name(format!("{stem}_{chain}.{ext}"))
}

fn rjmcmc(cfg: &ExperimentConfig, prov: &mut Provenance) -> Result<Table> {
    add_prior_provenance(cfg, prov);
    let seed = require_seed(cfg)?;
    let sc = sampler_config(cfg, seed)?;
    let ps = policies(cfg);
    if ps.len() != 1 {
        return Err(BenchError::Parse("rjmcmc takes exactly one policy variant".into()));
    }
    let policy = &ps[0];
    prov.add("prng", PRNG_NAME);
    let (target, labels, exact): (RjTarget, Vec<String>, Vec<f64>) = if let Some(setup) = loglinear_setup(cfg)? {
        let table = resolve_table(cfg, &setup, prov)?;
        let models: Vec<LoglinearModel> = loglinear::weighted_models(&setup.spec, &setup.priors, policy)?;
        let exact = loglinear::posterior_probabilities(&table, &models, LaplaceVariant::AtMap)?.probabilities();
        prov.add("reference", "laplace at_map enumeration");
        (loglinear::rj_target(&table, &models)?, models.iter().map(|m| m.label.clone()).collect(), exact)
    } else {
        let (data, cov) = resolve_linear(cfg, prov)?;
        if cfg.prior.alpha == 0.0 && cfg.prior.lambda == 0.0 {
            return Err(BenchError::Parse("linear rjmcmc needs a proper NIG prior (alpha, lambda > 0)".into()));
        }
        let space = LinearSpace::new(&data, subset_models(&cov, cfg.prior.intercept)?, cfg.prior.clone())?;
        let cands = space.candidates(policy, cfg.rjmcmc.c2)?;
        let exact = exact_model_probs(&cands, &data).map_err(|e| BenchError::core("enumeration", e))?;
        let rj = cands
            .iter()
            .map(|c| {
                let x = data.full_rank_design(&c.id).map_err(|e| BenchError::core("design", e))?;
                Ok(RjModel { id: c.id.clone(), prior: c.prior.clone(), log_prior_weight: c.log_prior_weight, x })
            })
            .collect::<Result<Vec<_>>>()?;
        let data_rj = RjData::LinearNig { y: data.y().clone(), alpha: cfg.prior.alpha, lambda: cfg.prior.lambda };
        prov.add("reference", "exact enumeration");
        prov.add("c2", cfg.rjmcmc.c2);
        let target = RjTarget::new(rj, data_rj).map_err(|e| BenchError::core("sampler setup", e))?;
        (target, cands.iter().map(|c| c.id.label(data.labels())).collect(), exact)
    };
    let chains = run_chains(&target, &sc, cfg.rjmcmc.chains).map_err(|e| BenchError::core("rjmcmc", e))?;
    let ids: Vec<ModelId> = target.models().iter().map(|m| m.id.clone()).collect();
    let mut t = Table::new(&["chain", "model", "estimate", "std_error", "reference", "z"]);
    for (k, ch) in chains.iter().enumerate() {
        prov.add(&format!("chain_{k}"), format!(
            "stream={} within_acceptance={:.6} between_acceptance={:.6}",
            ch.meta.stream,
            ch.meta.within_acceptance_rate(),
            ch.meta.between_acceptance_rate()
        ));
        let est = estimate_model_probs(ch, ids.len(), sc.burn_in, sc.thin).map_err(|e| BenchError::core("estimates", e))?;
        for i in 0..ids.len() {
            let z = (est.probs[i] - exact[i]) / est.std_errors[i];
            t.push(vec![k.into(), labels[i].clone().into(), est.probs[i].into(), est.std_errors[i].into(), exact[i].into(), z.into()]);
        }
        if let Some(base) = &cfg.rjmcmc.chain_dump {
            let path = dump_path(base, k);
            let file = std::fs::File::create(&path).map_err(|e| BenchError::io(path.display().to_string(), e))?;
            let mut w = std::io::BufWriter::new(file);
            let label_of = |m: &ModelId| labels[ids.iter().position(|x| x == m).expect("model in space")].clone();
            ch.write_csv(&ids, &label_of, &mut w).map_err(|e| BenchError::io(path.display().to_string(), e))?;
        }
    }
    Ok(t)
}

fn shrinkage(cfg: &ExperimentConfig, prov: &mut Provenance) -> Result<Table> {
    let s = &cfg.shrinkage;
    let k = match s.k_policy {
        KPolicyKind::Fixed => KPolicy::Fixed(s.k),
        KPolicyKind::InverseC => KPolicy::ProportionalInverseC(s.k),
    };
    prov.add("shrinkage", format!("n={} beta_hat={} sigma2={} k={k:?}", s.n, s.beta_hat, s.sigma2));
    let curve = shrinkage_curve(s.n, s.beta_hat, s.sigma2, k, &s.grid.values()?).map_err(|e| BenchError::core("shrinkage curve", e))?;
    let mut t = Table::new(&["c_inv2", "coefficient", "post_prob_m1", "expansion_coefficient", "approx_coefficient"]);
    for p in curve {
        t.push(vec![p.c_inv2.into(), p.coefficient.into(), p.post_prob_m1.into(), p.expansion_coefficient.into(), p.approx_coefficient.into()]);
    }
    Ok(t)
}

fn simulate(cfg: &ExperimentConfig, prov: &mut Provenance) -> Result<Table> {
    prov.add("prng", PRNG_NAME);
    if let Some(setup) = loglinear_setup(cfg)? {
        let table = resolve_table(cfg, &setup, prov)?;
        let mut cols: Vec<&str> = setup.spec.factors().iter().map(|f| f.name.as_str()).collect();
        cols.push("count");
        let mut t = Table::new(&cols);
        for (idx, levels) in jointprior_core::glm_laplace::cell_levels(&setup.spec).iter().enumerate() {
            let mut row: Vec<Value> = levels.iter().zip(&setup.labels).map(|(&l, labs)| labs[l].clone().into()).collect();
            row.push(Value::Int(table.counts()[idx] as i64));
            t.push(row);
        }
        return Ok(t);
    }
    let (data, _) = resolve_linear(cfg, prov)?;
    let mut cols: Vec<&str> = data.labels().iter().map(String::as_str).collect();
    cols.push("y");
    let mut t = Table::new(&cols);
    for i in 0..data.n() {
        let mut row: Vec<Value> = (0..data.p()).map(|j| data.x()[(i, j)].into()).collect();
        row.push(data.y()[i].into());
        t.push(row);
    }
    Ok(t)
}

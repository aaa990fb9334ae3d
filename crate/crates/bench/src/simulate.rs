//! Synthetic datasets for the dispersion experiments.

use jointprior_core::glm_laplace::{build_design, ContingencyTable};
use jointprior_core::linear_exact::LinearDataset;
use jointprior_core::model_space::FactorSpec;
use jointprior_core::model_space::ModelId;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{BenchError, Result};

/// Generator for replicate `stream` of a seeded experiment.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normals(rng: &mut ChaCha20Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(rng))
}

fn labelled(x: DMatrix<f64>, y: DVector<f64>) -> LinearDataset {
    LinearDataset::unlabeled(x, y).expect("generated data are finite and conformable")
}

/// `n = 50`, 15 independent standard normal covariates, `Y ~ N(X4 + X5, 2.5²)`.
pub fn simulate_dfn(seed: u64) -> LinearDataset {
    simulate_dfn_stream(seed, 0)
}

pub fn simulate_dfn_stream(seed: u64, stream: u64) -> LinearDataset {
    let mut rng = rng_for(seed, stream);
    let x = normals(&mut rng, 50, 15);
    let e = normals(&mut rng, 50, 1);
    let y = DVector::from_fn(50, |i, _| x[(i, 3)] + x[(i, 4)] + 2.5 * e[(i, 0)]);
    labelled(x, y)
}

/// `n = 50`: `X1..X10` iid N(0,1); `X11..X15 ~ N(0.3X1 + 0.5X2 + 0.7X3 + 0.9X4 + 1.1X5, 1)`;
/// `Y ~ N(4 + 2X1 − X5 + 1.5X7 + X11 + 0.5X13, 2.5²)`.
pub fn simulate_nott_kohn(seed: u64) -> LinearDataset {
    simulate_nott_kohn_stream(seed, 0)
}

pub fn simulate_nott_kohn_stream(seed: u64, stream: u64) -> LinearDataset {
    let n = 50;
    let mut rng = rng_for(seed, stream);
    let z = normals(&mut rng, n, 10);
    let u = normals(&mut rng, n, 5);
    let e = normals(&mut rng, n, 1);
    let x = DMatrix::from_fn(n, 15, |i, j| {
        if j < 10 {
            z[(i, j)]
        } else {
            0.3 * z[(i, 0)] + 0.5 * z[(i, 1)] + 0.7 * z[(i, 2)] + 0.9 * z[(i, 3)] + 1.1 * z[(i, 4)] + u[(i, j - 10)]
        }
    });
    let y = DVector::from_fn(n, |i, _| {
        4.0 + 2.0 * x[(i, 0)] - x[(i, 4)] + 1.5 * x[(i, 6)] + x[(i, 10)] + 0.5 * x[(i, 12)] + 2.5 * e[(i, 0)]
    });
    labelled(x, y)
}

/// Appends covariates `E1, E2, …` whose sample correlation with column `target`
/// equals the given values exactly. Each is built from a fresh normal vector
/// orthogonalized against the centred target; the results are standardized.
pub fn with_correlated_extras(data: &LinearDataset, target: usize, correlations: &[f64], seed: u64) -> Result<LinearDataset> {
    if target >= data.p() {
        return Err(BenchError::Parse(format!("target covariate {target} out of range")));
    }
    if let Some(r) = correlations.iter().find(|r| !(r.abs() < 1.0)) {
        return Err(BenchError::Parse(format!("correlation {r} must lie in (-1, 1)")));
    }
    let n = data.n();
    let scale = ((n - 1) as f64).sqrt();
    let unit = |v: DVector<f64>| {
        let m = v.mean();
        let c = v.add_scalar(-m);
        let norm = c.norm();
        c / norm
    };
    let t = unit(data.x().column(target).into_owned());
    let mut rng = rng_for(seed, 1);
    let mut x = data.x().clone();
    let mut labels = data.labels().to_vec();
    for (k, &r) in correlations.iter().enumerate() {
        let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let zc = unit(z);
        let orth = unit(&zc - &t * t.dot(&zc));
        let e = (&t * r + orth * (1.0 - r * r).sqrt()) * scale;
        let last = x.ncols();
        x = x.insert_column(last, 0.0);
        x.column_mut(last).copy_from(&e);
        labels.push(format!("E{}", k + 1));
    }
    LinearDataset::new(x, data.y().clone(), labels).map_err(|e| BenchError::core("correlated extras", e))
}

/// Poisson counts from log-linear model `m` with coefficients `beta`.
pub fn simulate_table(spec: &FactorSpec, m: &ModelId, beta: &DVector<f64>, seed: u64) -> Result<ContingencyTable> {
    let design = build_design(spec, m).map_err(|e| BenchError::core("simulated table", e))?;
    if design.x.ncols() != beta.len() {
        return Err(BenchError::Parse(format!("model has {} coefficients, {} supplied", design.x.ncols(), beta.len())));
    }
    let mut rng = rng_for(seed, 0);
    let eta = &design.x * beta;
    let counts = eta
        .iter()
        .map(|e| {
            let pois = Poisson::new(e.exp()).map_err(|err| BenchError::Parse(format!("cell mean {}: {err}", e.exp())))?;
            Ok(pois.sample(&mut rng) as u64)
        })
        .collect::<Result<Vec<u64>>>()?;
    ContingencyTable::new(spec.clone(), counts).map_err(|e| BenchError::core("simulated table", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    /// Least-squares coefficients and standard errors.
    fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let xtx_inv = x.tr_mul(x).try_inverse().unwrap();
        let b = &xtx_inv * x.tr_mul(y);
        let r = y - x * &b;
        let s2 = r.norm_squared() / (x.nrows() - x.ncols()) as f64;
        (b, xtx_inv.diagonal().map(|v| (v * s2).sqrt()))
    }

    #[test]
    fn dfn_reproducible_and_sane() {
        let a = simulate_dfn(3);
        assert_eq!(a, simulate_dfn(3));
        assert_ne!(a, simulate_dfn(4));
        assert_eq!((a.n(), a.p()), (50, 15));
        for j in 0..15 {
            let c: Vec<f64> = a.x().column(j).iter().copied().collect();
            let m = c.iter().sum::<f64>() / 50.0;
            let v = c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 49.0;
            assert!((0.4..=1.8).contains(&v), "column {j} variance {v}");
        }
        let x = DMatrix::from_fn(50, 3, |i, j| if j == 0 { 1.0 } else { a.x()[(i, j + 2)] });
        let (b, se) = ols(&x, a.y());
        for k in 1..3 {
            assert!((b[k] - 1.0).abs() < 3.0 * se[k], "coef {k}: {} ± {}", b[k], se[k]);
        }
    }

    #[test]
    fn nott_kohn_structure() {
        assert_eq!(simulate_nott_kohn(1), simulate_nott_kohn(1));
        let mut mean_corr = 0.0;
        for r in 0..100 {
            let d = simulate_nott_kohn_stream(9, r);
            let c11: Vec<f64> = d.x().column(10).iter().copied().collect();
            let c5: Vec<f64> = d.x().column(4).iter().copied().collect();
            mean_corr += corr(&c11, &c5) / 100.0;
        }
        assert!(mean_corr > 0.0);
        let d = simulate_nott_kohn(5);
        let x = DMatrix::from_fn(50, 16, |i, j| if j == 0 { 1.0 } else { d.x()[(i, j - 1)] });
        let (b, se) = ols(&x, d.y());
        let mut truth = [0.0; 16];
        truth[0] = 4.0;
        truth[1] = 2.0;
        truth[5] = -1.0;
        truth[7] = 1.5;
        truth[11] = 1.0;
        truth[13] = 0.5;
        for k in 0..16 {
            assert!((b[k] - truth[k]).abs() < 3.0 * se[k], "coef {k}: {} vs {}", b[k], truth[k]);
        }
    }

    #[test]
    fn extras_have_exact_correlations() {
        let d = simulate_dfn(2);
        let rho = [0.99, 0.97, 0.93, 0.89];
        let e = with_correlated_extras(&d, 3, &rho, 2).unwrap();
        assert_eq!(e.p(), 19);
        assert_eq!(&e.labels()[15..], ["E1", "E2", "E3", "E4"]);
        let t: Vec<f64> = e.x().column(3).iter().copied().collect();
        for (k, r) in rho.iter().enumerate() {
            let c: Vec<f64> = e.x().column(15 + k).iter().copied().collect();
            assert!((corr(&t, &c) - r).abs() < 1e-12);
        }
    }
}

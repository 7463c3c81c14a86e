//! Expected-improvement acquisition: closed-form EI, Monte-Carlo batch EI (qEI)
//! with common random numbers, and greedy multi-start L-BFGS batch construction.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::design::{DesignError, DesignPoint, DesignSpace};
use crate::linalg::{Cholesky, LinalgError, Pivots};
use crate::optim::{self, LbfgsConfig};
use crate::surrogate::{rbf_kernel, GpModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AcqError {
    #[error("joint posterior covariance is not positive semi-definite: {0}")]
    NotPsd(#[from] LinalgError),
    #[error("invalid acquisition config: {0}")]
    Config(String),
    #[error(transparent)]
    Design(#[from] DesignError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcquisitionConfig {
    pub batch_size: usize,
    pub mc_samples: usize,
    pub restarts: usize,
    pub raw_candidates: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        AcquisitionConfig {
            batch_size: 4,
            mc_samples: 4096,
            restarts: 10,
            raw_candidates: 512,
            max_iter: 50,
            seed: 0,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<(), AcqError> {
        if self.batch_size == 0 {
            return Err(AcqError::Config("batch_size must be >= 1".into()));
        }
        if self.mc_samples == 0 {
            return Err(AcqError::Config("mc_samples must be >= 1".into()));
        }
        if self.restarts == 0 {
            return Err(AcqError::Config("restarts must be >= 1".into()));
        }
        if self.raw_candidates == 0 {
            return Err(AcqError::Config("raw_candidates must be >= 1".into()));
        }
        Ok(())
    }
}

pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Closed-form EI of a Gaussian `N(mu, sigma^2)` over `best` (maximization).
pub fn ei_from_moments(mu: f64, sigma: f64, best: f64) -> f64 {
    let imp = mu - best;
    if !(sigma > 1e-12) {
        return imp.max(0.0);
    }
    let z = imp / sigma;
    (imp * norm_cdf(z) + sigma * norm_pdf(z)).max(0.0)
}

pub fn ei(model: &GpModel, x: &[f64], best: f64) -> f64 {
    let p = model.predict(&[x.to_vec()]);
    ei_from_moments(p.mean[0], p.variance(0).max(0.0).sqrt(), best)
}

/// Fixed standard-normal draws shared by every batch evaluated against them.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseDraws {
    samples: usize,
    width: usize,
    z: Vec<f64>,
}

impl BaseDraws {
    pub fn new(samples: usize, width: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = (0..samples * width).map(|_| rng.sample(StandardNormal)).collect();
        BaseDraws { samples, width, z }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn width(&self) -> usize {
        self.width
    }

    fn row(&self, s: usize) -> &[f64] {
        &self.z[s * self.width..(s + 1) * self.width]
    }
}

fn psd_tol(cov: &[f64], q: usize) -> f64 {
    let scale = (0..q).map(|i| cov[i * q + i].abs()).fold(0.0, f64::max);
    1e-10 * scale.max(1e-300)
}

/// Monte-Carlo qEI from the joint posterior moments of a batch.
///
/// Sample `s` uses the first `q` columns of row `s` of `draws`, so a batch and
/// any prefix of it are evaluated on the same random numbers.
pub fn qei_from_moments(mean: &[f64], cov: &[f64], best: f64, draws: &BaseDraws) -> Result<f64, AcqError> {
    let q = mean.len();
    if q == 0 || q > draws.width {
        return Err(AcqError::Config(format!(
            "batch of {q} points needs 1..={} draw columns",
            draws.width
        )));
    }
    let chol = Cholesky::factor_with(cov, q, 0.0, Pivots::SemiDefinite { tol: psd_tol(cov, q) })?;
    let mut total = 0.0;
    for s in 0..draws.samples {
        let z = draws.row(s);
        let mut top = f64::NEG_INFINITY;
        for i in 0..q {
            let mut f = mean[i];
            for k in 0..=i {
                f += chol.get(i, k) * z[k];
            }
            top = top.max(f);
        }
        total += (top - best).max(0.0);
    }
    Ok(total / draws.samples as f64)
}

pub fn qei_mc(model: &GpModel, batch: &[Vec<f64>], best: f64, draws: &BaseDraws) -> Result<f64, AcqError> {
    let p = model.predict(batch);
    qei_from_moments(&p.mean, &p.cov, best, draws)
}

/// qEI of `chosen ∪ {x}` as a function of `x`, with the chosen points' joint
/// factor and per-sample maxima cached.
struct GreedyQei<'a> {
    model: &'a GpModel,
    draws: &'a BaseDraws,
    best: f64,
    chosen: Vec<Vec<f64>>,
    chosen_proj: Vec<Vec<f64>>,
    chol: Cholesky,
    running_max: Vec<f64>,
    tol: f64,
}

impl<'a> GreedyQei<'a> {
    fn new(model: &'a GpModel, draws: &'a BaseDraws, best: f64, chosen: &[Vec<f64>]) -> Result<Self, AcqError> {
        let p = model.predict(chosen);
        let k = chosen.len();
        let s2 = model.target_std().powi(2);
        let tol = 1e-10 * (model.hyper().signal_variance * s2).max(1e-300);
        let chol = Cholesky::factor_with(&p.cov, k, 0.0, Pivots::SemiDefinite { tol })?;
        let running_max = (0..draws.samples)
            .map(|s| {
                let z = draws.row(s);
                (0..k)
                    .map(|i| p.mean[i] + (0..=i).map(|j| chol.get(i, j) * z[j]).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        Ok(GreedyQei {
            model,
            draws,
            best,
            chosen: chosen.to_vec(),
            chosen_proj: chosen.iter().map(|c| model.project(c).1).collect(),
            chol,
            running_max,
            tol,
        })
    }

    fn value(&self, x: &[f64]) -> f64 {
        let model = self.model;
        let hyper = model.hyper();
        let s2 = model.target_std().powi(2);
        let (ks, v) = model.project(x);
        let alpha_mean: f64 = ks.iter().zip(model.alpha()).map(|(a, b)| a * b).sum();
        let mu = model.target_mean() + model.target_std() * alpha_mean;
        let var = (hyper.signal_variance - v.iter().map(|a| a * a).sum::<f64>()) * s2;
        let cross: Vec<f64> = self
            .chosen
            .iter()
            .zip(&self.chosen_proj)
            .map(|(c, vc)| {
                let prior = rbf_kernel(x, c, &hyper.lengthscales, hyper.signal_variance);
                (prior - v.iter().zip(vc).map(|(a, b)| a * b).sum::<f64>()) * s2
            })
            .collect();
        let Ok((row, diag)) = self
            .chol
            .bordered_row(&cross, var, Pivots::SemiDefinite { tol: self.tol })
        else {
            return f64::NAN;
        };
        let k = self.chosen.len();
        let mut total = 0.0;
        for s in 0..self.draws.samples {
            let z = self.draws.row(s);
            let f = mu + row.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() + diag * z[k];
            total += (f.max(self.running_max[s]) - self.best).max(0.0);
        }
        total / self.draws.samples as f64
    }
}

fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-6, 1.0 - 1e-6);
    (p / (1.0 - p)).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchProposal {
    pub points: Vec<DesignPoint>,
    /// The same points in unit-cube coordinates.
    pub unit: Vec<Vec<f64>>,
    /// qEI of the full batch under the proposal's base draws.
    pub qei: f64,
}

/// Greedy sequential qEI batch: each slot maximizes qEI of (chosen ∪ candidate)
/// by L-BFGS in logistic coordinates, started from the best raw uniform samples.
pub fn propose_batch<R: Rng>(
    model: &GpModel,
    space: &DesignSpace,
    best: f64,
    config: &AcquisitionConfig,
    rng: &mut R,
) -> Result<BatchProposal, AcqError> {
    config.validate()?;
    let d = space.dim();
    if model.dim() != d {
        return Err(AcqError::Config(format!(
            "model has {} inputs but the design space has {d}",
            model.dim()
        )));
    }
    let draws = BaseDraws::new(config.mc_samples, config.batch_size, config.seed);
    let lbfgs = LbfgsConfig {
        max_iter: config.max_iter,
        grad_tol: 1e-9,
        f_tol: 1e-12,
        ..Default::default()
    };
    let mut chosen: Vec<Vec<f64>> = Vec::with_capacity(config.batch_size);

    for _ in 0..config.batch_size {
        let raw: Vec<Vec<f64>> = (0..config.raw_candidates)
            .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
            .collect();
        let picked = match GreedyQei::new(model, &draws, best, &chosen) {
            Ok(acq) => optimize_slot(&acq, &raw, config.restarts, &lbfgs),
            Err(_) => raw[0].clone(),
        };
        chosen.push(picked);
    }

    let qei = qei_mc(model, &chosen, best, &draws)?;
    let points = chosen
        .iter()
        .map(|u| space.from_unit_cube(u))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BatchProposal {
        points,
        unit: chosen,
        qei,
    })
}

fn optimize_slot(acq: &GreedyQei<'_>, raw: &[Vec<f64>], restarts: usize, lbfgs: &LbfgsConfig) -> Vec<f64> {
    let mut scored: Vec<(usize, f64)> = raw
        .iter()
        .enumerate()
        .map(|(i, x)| (i, acq.value(x)))
        .map(|(i, v)| (i, if v.is_finite() { v } else { f64::NEG_INFINITY }))
        .collect();
    // Stable sort: ties keep the lower raw index first.
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    let fallback = raw[scored[0].0].clone();

    let mut best: Option<(f64, Vec<f64>)> = None;
    for &(idx, v0) in scored.iter().take(restarts) {
        if !v0.is_finite() {
            continue;
        }
        let u0: Vec<f64> = raw[idx].iter().map(|&p| logit(p)).collect();
        let mut neg = |u: &[f64]| {
            let x: Vec<f64> = u.iter().map(|&ui| sigmoid(ui)).collect();
            let v = acq.value(&x);
            if v.is_finite() {
                -v
            } else {
                f64::INFINITY
            }
        };
        let objective = |u: &[f64]| {
            let f = neg(u);
            let g = optim::central_gradient(&mut neg, u, 1e-4);
            (f, g)
        };
        let Ok(res) = optim::minimize(objective, &u0, lbfgs) else {
            continue;
        };
        let x: Vec<f64> = res.x.iter().map(|&ui| sigmoid(ui)).collect();
        let v = acq.value(&x);
        if v.is_finite() && best.as_ref().map_or(true, |(b, _)| v > *b) {
            best = Some((v, x));
        }
    }
    match best {
        Some((v, x)) if v >= scored[0].1 => x,
        _ => fallback,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::GpHyper;

    #[test]
    fn ei_limits() {
        assert_eq!(ei_from_moments(1.0, 0.0, 1.0), 0.0);
        assert_eq!(ei_from_moments(2.0, 0.0, 1.0), 1.0);
        assert!((ei_from_moments(0.0, 1.0, 0.0) - 0.3989422804014327).abs() < 1e-12);
        assert!(ei_from_moments(0.0, 1e-9, 1.0) < 1e-12);
    }

    #[test]
    fn cdf_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-15);
        let d = norm_cdf(1.96) - 0.9750021048517795;
        assert!(d.abs() < 1e-11, "{d:e}");
    }

    fn toy_model() -> GpModel {
        let x = vec![vec![0.1, 0.2], vec![0.5, 0.5], vec![0.9, 0.3], vec![0.4, 0.9]];
        let y = [0.2, 1.0, 0.4, -0.3];
        GpModel::condition(x, &y, GpHyper::isotropic(2, 0.3, 1.0, 1e-4)).unwrap()
    }

    #[test]
    fn duplicate_point_adds_nothing() {
        let m = toy_model();
        let draws = BaseDraws::new(2000, 2, 7);
        let x = vec![0.3, 0.7];
        let one = qei_mc(&m, &[x.clone()], 1.0, &draws).unwrap();
        let two = qei_mc(&m, &[x.clone(), x], 1.0, &draws).unwrap();
        assert!((one - two).abs() <= 1e-12 * one.abs(), "{one} {two}");
    }

    #[test]
    fn superset_is_not_smaller() {
        let m = toy_model();
        let draws = BaseDraws::new(2000, 3, 7);
        let a = vec![0.3, 0.7];
        let b = vec![0.7, 0.1];
        let c = vec![0.95, 0.95];
        let q2 = qei_mc(&m, &[a.clone(), b.clone()], 1.0, &draws).unwrap();
        let q3 = qei_mc(&m, &[a, b, c], 1.0, &draws).unwrap();
        assert!(q3 >= q2);
    }

    #[test]
    fn greedy_value_matches_qei_mc() {
        let m = toy_model();
        let draws = BaseDraws::new(1000, 3, 3);
        let chosen = vec![vec![0.3, 0.7], vec![0.6, 0.2]];
        let acq = GreedyQei::new(&m, &draws, 0.9, &chosen).unwrap();
        let x = vec![0.8, 0.8];
        let mut batch = chosen.clone();
        batch.push(x.clone());
        let direct = qei_mc(&m, &batch, 0.9, &draws).unwrap();
        assert!((acq.value(&x) - direct).abs() < 1e-12 * direct.max(1.0));
    }

    #[test]
    fn negative_definite_is_error() {
        let draws = BaseDraws::new(10, 2, 0);
        let err = qei_from_moments(&[0.0, 0.0], &[1.0, 2.0, 2.0, 1.0], 0.0, &draws).unwrap_err();
        assert!(matches!(err, AcqError::NotPsd(_)));
    }
}

//! Gaussian-process regression with an anisotropic RBF kernel.
//!
//! Inputs live in the unit cube. Targets are standardized to zero mean and unit
//! variance before fitting; predictions are returned in the original units.
//! Hyperparameters are selected by maximizing the log marginal likelihood from
//! several starting points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{Cholesky, LinalgError};
use crate::optim::{self, LbfgsConfig};

pub const LENGTHSCALE_BOUNDS: (f64, f64) = (1e-3, 1e3);
pub const SIGNAL_VARIANCE_BOUNDS: (f64, f64) = (1e-3, 1e3);
pub const NOISE_VARIANCE_MAX: f64 = 10.0;
const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpError {
    #[error("invalid training data: {0}")]
    InvalidInput(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] LinalgError),
    #[error("every hyperparameter restart failed")]
    AllRestartsFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyper {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl GpHyper {
    pub fn isotropic(dim: usize, lengthscale: f64, signal_variance: f64, noise_variance: f64) -> Self {
        GpHyper {
            lengthscales: vec![lengthscale; dim],
            signal_variance,
            noise_variance,
        }
    }

    /// `[ln l_1 .. ln l_d, ln signal_variance, ln noise_variance]`
    pub fn to_log(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.lengthscales.iter().map(|l| l.ln()).collect();
        v.push(self.signal_variance.ln());
        v.push(self.noise_variance.ln());
        v
    }

    pub fn from_log(theta: &[f64]) -> Self {
        let d = theta.len() - 2;
        GpHyper {
            lengthscales: theta[..d].iter().map(|t| t.exp()).collect(),
            signal_variance: theta[d].exp(),
            noise_variance: theta[d + 1].exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpFitConfig {
    pub restarts: usize,
    pub noise_floor: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for GpFitConfig {
    fn default() -> Self {
        GpFitConfig {
            restarts: 8,
            noise_floor: 1e-6,
            max_iter: 200,
            seed: 0,
        }
    }
}

pub fn rbf_kernel(a: &[f64], b: &[f64], lengthscales: &[f64], signal_variance: f64) -> f64 {
    let r2: f64 = a
        .iter()
        .zip(b)
        .zip(lengthscales)
        .map(|((x, y), l)| ((x - y) / l).powi(2))
        .sum();
    signal_variance * (-0.5 * r2).exp()
}

fn kernel_matrix(x: &[Vec<f64>], hyper: &GpHyper) -> Vec<f64> {
    let n = x.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = hyper.signal_variance;
        for j in 0..i {
            let v = rbf_kernel(&x[i], &x[j], &hyper.lengthscales, hyper.signal_variance);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

fn factor_noisy(k: &[f64], n: usize, noise: f64) -> Result<Cholesky, LinalgError> {
    let mut ky = k.to_vec();
    for i in 0..n {
        ky[i * n + i] += noise;
    }
    Cholesky::factor_with_jitter(&ky, n, JITTER_START, JITTER_MAX)
}

fn check_data(x: &[Vec<f64>], y: &[f64]) -> Result<usize, GpError> {
    if x.is_empty() {
        return Err(GpError::InvalidInput("no training points".into()));
    }
    if x.len() != y.len() {
        return Err(GpError::InvalidInput(format!(
            "{} inputs but {} targets",
            x.len(),
            y.len()
        )));
    }
    let d = x[0].len();
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(GpError::InvalidInput("inconsistent input dimension".into()));
    }
    if y.iter().any(|v| !v.is_finite()) || x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(GpError::InvalidInput("non-finite value".into()));
    }
    Ok(d)
}

const LN_2PI: f64 = 1.8378770664093453;

/// Exact Gaussian log marginal likelihood of `y` under the GP prior.
pub fn log_marginal_likelihood(x: &[Vec<f64>], y: &[f64], hyper: &GpHyper) -> Result<f64, GpError> {
    check_data(x, y)?;
    let n = x.len();
    let chol = factor_noisy(&kernel_matrix(x, hyper), n, hyper.noise_variance)?;
    let alpha = chol.solve(y);
    let fit: f64 = y.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    Ok(-0.5 * fit - 0.5 * chol.log_det() - 0.5 * n as f64 * LN_2PI)
}

/// Log marginal likelihood and its gradient with respect to
/// [`GpHyper::to_log`] coordinates.
pub fn lml_with_gradient(x: &[Vec<f64>], y: &[f64], hyper: &GpHyper) -> Result<(f64, Vec<f64>), GpError> {
    let d = check_data(x, y)?;
    let n = x.len();
    let k = kernel_matrix(x, hyper);
    let chol = factor_noisy(&k, n, hyper.noise_variance)?;
    let alpha = chol.solve(y);
    let fit: f64 = y.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    let lml = -0.5 * fit - 0.5 * chol.log_det() - 0.5 * n as f64 * LN_2PI;

    // W = alpha alpha^T - K_y^{-1}; dLML/dtheta = 0.5 tr(W dK/dtheta)
    let mut w = chol.inverse();
    for i in 0..n {
        for j in 0..n {
            w[i * n + j] = alpha[i] * alpha[j] - w[i * n + j];
        }
    }
    let mut grad = vec![0.0; d + 2];
    let inv_l2: Vec<f64> = hyper.lengthscales.iter().map(|l| 1.0 / (l * l)).collect();
    let mut g_signal = 0.0;
    for i in 0..n {
        g_signal += 0.5 * w[i * n + i] * k[i * n + i];
        for j in 0..i {
            let wk = w[i * n + j] * k[i * n + j];
            g_signal += wk;
            for (dd, g) in grad[..d].iter_mut().enumerate() {
                let diff = x[i][dd] - x[j][dd];
                *g += wk * diff * diff * inv_l2[dd];
            }
        }
    }
    grad[d] = g_signal;
    let trace_w: f64 = (0..n).map(|i| w[i * n + i]).sum();
    grad[d + 1] = 0.5 * trace_w * hyper.noise_variance;
    Ok((lml, grad))
}

/// Fitted GP posterior.
#[derive(Debug, Clone)]
pub struct GpModel {
    train_inputs: Vec<Vec<f64>>,
    train_targets: Vec<f64>,
    hyper: GpHyper,
    chol: Cholesky,
    alpha: Vec<f64>,
    target_mean: f64,
    target_std: f64,
    lml: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mean: Vec<f64>,
    /// Row-major `m x m` covariance.
    pub cov: Vec<f64>,
}

impl Prediction {
    pub fn variance(&self, i: usize) -> f64 {
        self.cov[i * self.mean.len() + i]
    }
}

fn standardize(y: &[f64]) -> (Vec<f64>, f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = if var.sqrt() > 1e-12 * mean.abs().max(1.0) {
        var.sqrt()
    } else {
        1.0
    };
    (y.iter().map(|v| (v - mean) / std).collect(), mean, std)
}

impl GpModel {
    /// Condition on data with fixed hyperparameters (targets are standardized first).
    pub fn condition(x: Vec<Vec<f64>>, y: &[f64], hyper: GpHyper) -> Result<Self, GpError> {
        let d = check_data(&x, y)?;
        if hyper.lengthscales.len() != d {
            return Err(GpError::InvalidInput(format!(
                "{} lengthscales for {d} inputs",
                hyper.lengthscales.len()
            )));
        }
        let (ys, target_mean, target_std) = standardize(y);
        let n = x.len();
        let chol = factor_noisy(&kernel_matrix(&x, &hyper), n, hyper.noise_variance)?;
        let alpha = chol.solve(&ys);
        let fit: f64 = ys.iter().zip(&alpha).map(|(a, b)| a * b).sum();
        let lml = -0.5 * fit - 0.5 * chol.log_det() - 0.5 * n as f64 * LN_2PI;
        Ok(GpModel {
            train_inputs: x,
            train_targets: ys,
            hyper,
            chol,
            alpha,
            target_mean,
            target_std,
            lml,
        })
    }

    pub fn hyper(&self) -> &GpHyper {
        &self.hyper
    }

    pub fn dim(&self) -> usize {
        self.hyper.lengthscales.len()
    }

    pub fn len(&self) -> usize {
        self.train_inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train_inputs.is_empty()
    }

    pub fn train_inputs(&self) -> &[Vec<f64>] {
        &self.train_inputs
    }

    /// Standardized training targets.
    pub fn train_targets(&self) -> &[f64] {
        &self.train_targets
    }

    pub fn target_mean(&self) -> f64 {
        self.target_mean
    }

    pub fn target_std(&self) -> f64 {
        self.target_std
    }

    /// Log marginal likelihood of the standardized targets.
    pub fn lml(&self) -> f64 {
        self.lml
    }

    /// `(K + noise I)^{-1} y` for the standardized targets.
    pub(crate) fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Lower-triangular factor of `K + noise I` (row-major).
    pub fn factor(&self) -> &Cholesky {
        &self.chol
    }

    /// Cross-covariances `k(q, X)` and `v = L^{-1} k(q, X)`, in standardized units.
    pub(crate) fn project(&self, q: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let ks: Vec<f64> = self
            .train_inputs
            .iter()
            .map(|x| rbf_kernel(q, x, &self.hyper.lengthscales, self.hyper.signal_variance))
            .collect();
        let mut v = ks.clone();
        self.chol.solve_lower_in_place(&mut v);
        (ks, v)
    }

    /// Latent posterior mean and covariance at `queries`, in original target units.
    pub fn predict(&self, queries: &[Vec<f64>]) -> Prediction {
        let m = queries.len();
        let proj: Vec<(Vec<f64>, Vec<f64>)> = queries.iter().map(|q| self.project(q)).collect();
        let s2 = self.target_std * self.target_std;
        let mean = proj
            .iter()
            .map(|(ks, _)| {
                let mu: f64 = ks.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
                self.target_mean + self.target_std * mu
            })
            .collect();
        let mut cov = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..=i {
                let prior = rbf_kernel(
                    &queries[i],
                    &queries[j],
                    &self.hyper.lengthscales,
                    self.hyper.signal_variance,
                );
                let reduce: f64 = proj[i].1.iter().zip(&proj[j].1).map(|(a, b)| a * b).sum();
                let c = (prior - reduce) * s2;
                cov[i * m + j] = c;
                cov[j * m + i] = c;
            }
        }
        Prediction { mean, cov }
    }

    /// Like [`predict`](Self::predict) but includes observation noise on the diagonal.
    pub fn predict_observed(&self, queries: &[Vec<f64>]) -> Prediction {
        let mut p = self.predict(queries);
        let m = queries.len();
        let extra = self.hyper.noise_variance * self.target_std * self.target_std;
        for i in 0..m {
            p.cov[i * m + i] += extra;
        }
        p
    }
}

fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-9, 1.0 - 1e-9);
    (p / (1.0 - p)).ln()
}

/// Box in log-hyperparameter space, traversed through a logistic map.
struct LogBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl LogBox {
    fn new(d: usize, noise_floor: f64) -> Self {
        let mut lo = vec![LENGTHSCALE_BOUNDS.0.ln(); d];
        let mut hi = vec![LENGTHSCALE_BOUNDS.1.ln(); d];
        lo.push(SIGNAL_VARIANCE_BOUNDS.0.ln());
        hi.push(SIGNAL_VARIANCE_BOUNDS.1.ln());
        lo.push(noise_floor.ln());
        hi.push(NOISE_VARIANCE_MAX.ln());
        LogBox { lo, hi }
    }

    fn to_theta(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(i, &ui)| self.lo[i] + (self.hi[i] - self.lo[i]) * sigmoid(ui))
            .collect()
    }

    fn to_unbounded(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .enumerate()
            .map(|(i, &t)| logit((t - self.lo[i]) / (self.hi[i] - self.lo[i])))
            .collect()
    }

    fn chain(&self, u: &[f64], g_theta: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(i, &ui)| {
                let s = sigmoid(ui);
                g_theta[i] * (self.hi[i] - self.lo[i]) * s * (1.0 - s)
            })
            .collect()
    }
}

/// Starting hyperparameters of the first restart.
pub fn default_hyper(dim: usize) -> GpHyper {
    GpHyper::isotropic(dim, 0.5, 1.0, 1e-3)
}

/// Fit hyperparameters by multi-restart ML-II and condition on the data.
pub fn gp_fit(x: &[Vec<f64>], y: &[f64], cfg: &GpFitConfig) -> Result<GpModel, GpError> {
    let d = check_data(x, y)?;
    if cfg.restarts == 0 {
        return Err(GpError::InvalidInput("restarts must be >= 1".into()));
    }
    let (ys, _, _) = standardize(y);
    let bounds = LogBox::new(d, cfg.noise_floor);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let lbfgs = LbfgsConfig {
        max_iter: cfg.max_iter,
        grad_tol: 1e-5,
        ..Default::default()
    };

    let mut starts = Vec::with_capacity(cfg.restarts);
    let mut first = default_hyper(d);
    first.noise_variance = first.noise_variance.max(cfg.noise_floor * 10.0);
    starts.push(first.to_log());
    for _ in 1..cfg.restarts {
        let mut theta: Vec<f64> = (0..d).map(|_| rng.random_range(0.05f64.ln()..5f64.ln())).collect();
        theta.push(rng.random_range(0.1f64.ln()..10f64.ln()));
        let noise_lo = (cfg.noise_floor * 10.0).ln();
        theta.push(rng.random_range(noise_lo..noise_lo.max(0.1f64.ln()) + 1e-9));
        starts.push(theta);
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    for theta0 in starts {
        let u0 = bounds.to_unbounded(&theta0);
        let objective = |u: &[f64]| {
            let theta = bounds.to_theta(u);
            match lml_with_gradient(x, &ys, &GpHyper::from_log(&theta)) {
                Ok((lml, g)) => (-lml, bounds.chain(u, &g).into_iter().map(|v| -v).collect()),
                Err(_) => (f64::INFINITY, vec![0.0; u.len()]),
            }
        };
        let Ok(res) = optim::minimize(objective, &u0, &lbfgs) else {
            continue;
        };
        let lml = -res.f;
        if best.as_ref().map_or(true, |(b, _)| lml > *b) {
            best = Some((lml, bounds.to_theta(&res.x)));
        }
    }
    let (_, theta) = best.ok_or(GpError::AllRestartsFailed)?;
    GpModel::condition(x.to_vec(), y, GpHyper::from_log(&theta))
}

//! Exact Gaussian-process regression with a Cholesky factorisation and
//! grid-searched hyperparameters.
//!
//! Targets are centred on their training mean; the GP models the residual
//! with zero prior mean. Inputs are standardised feature vectors.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::linalg::{cholesky, cholesky_solve, forward_solve, half_log_det, Matrix};

/// Training rows above this count are subsampled before fitting.
pub const GP_MAX_TRAIN: usize = 1500;
/// Hyperparameter search runs on at most this many of the training rows.
pub const GP_SEARCH_MAX: usize = 400;

pub const LENGTH_SCALE_GRID: [f64; 5] = [0.1, 0.3, 1.0, 3.0, 10.0];
pub const SIGNAL_VARIANCE_GRID: [f64; 3] = [0.5, 1.0, 2.0];
pub const NOISE_VARIANCE_GRID: [f64; 3] = [1e-4, 1e-2, 1e-1];
pub const RQ_ALPHA_GRID: [f64; 3] = [0.5, 1.0, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    RationalQuadratic,
    SquaredExponential,
    Matern52,
    Exponential,
}

impl KernelKind {
    pub const ALL: [KernelKind; 4] = [
        KernelKind::RationalQuadratic,
        KernelKind::SquaredExponential,
        KernelKind::Matern52,
        KernelKind::Exponential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::RationalQuadratic => "rational-quadratic",
            KernelKind::SquaredExponential => "squared-exponential",
            KernelKind::Matern52 => "matern52",
            KernelKind::Exponential => "exponential",
        }
    }
}

/// Covariance function with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpKernel {
    pub kind: KernelKind,
    #[serde(with = "crate::hexfloat")]
    pub signal_variance: f64,
    #[serde(with = "crate::hexfloat")]
    pub length_scale: f64,
    /// Shape parameter; only read by the rational-quadratic kernel.
    #[serde(with = "crate::hexfloat")]
    pub alpha: f64,
    #[serde(with = "crate::hexfloat")]
    pub noise_variance: f64,
}

impl GpKernel {
    /// Covariance as a function of Euclidean distance `r`, without noise.
    pub fn of_distance(&self, r: f64) -> f64 {
        let s2 = self.signal_variance;
        let l = self.length_scale;
        match self.kind {
            KernelKind::Exponential => s2 * (-r / l).exp(),
            KernelKind::SquaredExponential => s2 * (-r * r / (2.0 * l * l)).exp(),
            KernelKind::Matern52 => {
                let q = 5f64.sqrt() * r / l;
                s2 * (1.0 + q + 5.0 * r * r / (3.0 * l * l)) * (-q).exp()
            }
            KernelKind::RationalQuadratic => {
                s2 * (1.0 + r * r / (2.0 * self.alpha * l * l)).powf(-self.alpha)
            }
        }
    }

    pub fn eval(&self, a: &[f64; 4], b: &[f64; 4]) -> f64 {
        self.of_distance(distance(a, b))
    }
}

#[inline]
fn distance(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let mut s = 0.0;
    for j in 0..4 {
        let d = a[j] - b[j];
        s += d * d;
    }
    s.sqrt()
}

/// Search grid in iteration order: length scale ascending (outermost), then
/// signal variance, noise variance and, for rational-quadratic, alpha.
/// Variances are multiples of `target_variance`.
pub fn hyperparameter_grid(kind: KernelKind, target_variance: f64) -> Vec<GpKernel> {
    let alphas: &[f64] = if kind == KernelKind::RationalQuadratic { &RQ_ALPHA_GRID } else { &[1.0] };
    let mut grid = Vec::new();
    for &length_scale in &LENGTH_SCALE_GRID {
        for &s in &SIGNAL_VARIANCE_GRID {
            for &nz in &NOISE_VARIANCE_GRID {
                for &alpha in alphas {
                    grid.push(GpKernel {
                        kind,
                        signal_variance: s * target_variance,
                        length_scale,
                        alpha,
                        noise_variance: nz * target_variance,
                    });
                }
            }
        }
    }
    grid
}

fn distance_matrix(x: &[[f64; 4]]) -> Matrix {
    let n = x.len();
    let mut d = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..i {
            let r = distance(&x[i], &x[j]);
            d.data[i * n + j] = r;
            d.data[j * n + i] = r;
        }
    }
    d
}

fn covariance(dist: &Matrix, kernel: &GpKernel) -> Matrix {
    let n = dist.n;
    let mut k = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            k.data[i * n + j] = kernel.of_distance(dist.data[i * n + j]);
        }
        k.data[i * n + i] += kernel.noise_variance;
    }
    k
}

fn lml_from_factor(l: &Matrix, y: &[f64], alpha: &[f64]) -> f64 {
    let fit: f64 = y.iter().zip(alpha).map(|(a, b)| a * b).sum();
    -0.5 * fit - half_log_det(l) - 0.5 * y.len() as f64 * (std::f64::consts::TAU).ln()
}

/// Log marginal likelihood of centred targets `y` under `kernel`, or `None`
/// when the covariance is not numerically positive definite.
pub fn log_marginal_likelihood(x: &[[f64; 4]], y: &[f64], kernel: &GpKernel) -> Option<f64> {
    let dist = distance_matrix(x);
    let l = cholesky(&covariance(&dist, kernel))?;
    let alpha = crate::learn::linalg::cholesky_solve(&l, y);
    Some(lml_from_factor(&l, y, &alpha))
}

/// Grid entry with the largest log marginal likelihood; ties keep the earlier
/// entry (smaller length scale).
pub fn select_kernel(x: &[[f64; 4]], y_centred: &[f64], grid: &[GpKernel]) -> Option<(GpKernel, f64)> {
    let dist = distance_matrix(x);
    let mut best: Option<(GpKernel, f64)> = None;
    for kernel in grid {
        let Some(l) = cholesky(&covariance(&dist, kernel)) else {
            continue;
        };
        let alpha = cholesky_solve(&l, y_centred);
        let lml = lml_from_factor(&l, y_centred, &alpha);
        if lml.is_finite() && best.is_none_or(|(_, b)| lml > b) {
            best = Some((*kernel, lml));
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("NotPositiveDefinite: covariance factorisation failed for {0:?}")]
pub struct NotPositiveDefinite(pub GpKernel);

/// Fitted exact GP.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpRegressor {
    pub kernel: GpKernel,
    #[serde(with = "crate::hexfloat")]
    pub target_mean: f64,
    #[serde(with = "crate::hexfloat::rows")]
    pub inputs: Vec<[f64; 4]>,
    /// `(K + noise I)^-1 (y - mean)`.
    #[serde(with = "crate::hexfloat::vec")]
    pub weights: Vec<f64>,
    #[serde(with = "crate::hexfloat")]
    pub log_marginal_likelihood: f64,
    #[serde(skip)]
    factor: OnceLock<Matrix>,
}

impl Clone for GpRegressor {
    fn clone(&self) -> Self {
        Self {
            kernel: self.kernel,
            target_mean: self.target_mean,
            inputs: self.inputs.clone(),
            weights: self.weights.clone(),
            log_marginal_likelihood: self.log_marginal_likelihood,
            factor: OnceLock::new(),
        }
    }
}

impl PartialEq for GpRegressor {
    fn eq(&self, other: &Self) -> bool {
        self.kernel == other.kernel
            && self.target_mean.to_bits() == other.target_mean.to_bits()
            && self.inputs == other.inputs
            && self.weights == other.weights
    }
}

impl GpRegressor {
    /// Fit with fixed hyperparameters.
    pub fn fit(inputs: Vec<[f64; 4]>, targets: &[f64], kernel: GpKernel) -> Result<Self, NotPositiveDefinite> {
        let n = targets.len();
        let target_mean = targets.iter().sum::<f64>() / n as f64;
        let y: Vec<f64> = targets.iter().map(|t| t - target_mean).collect();
        let dist = distance_matrix(&inputs);
        let l = cholesky(&covariance(&dist, &kernel)).ok_or(NotPositiveDefinite(kernel))?;
        let weights = cholesky_solve(&l, &y);
        let log_marginal_likelihood = lml_from_factor(&l, &y, &weights);
        let factor = OnceLock::new();
        let _ = factor.set(l);
        Ok(Self { kernel, target_mean, inputs, weights, log_marginal_likelihood, factor })
    }

    pub fn predict_mean(&self, x: &[f64; 4]) -> f64 {
        let s: f64 = self
            .inputs
            .iter()
            .zip(&self.weights)
            .map(|(xi, w)| self.kernel.eval(x, xi) * w)
            .sum();
        self.target_mean + s
    }

    /// Posterior variance of the latent function (observation noise excluded).
    pub fn predict_var(&self, x: &[f64; 4]) -> f64 {
        let l = self.factor.get_or_init(|| {
            let dist = distance_matrix(&self.inputs);
            cholesky(&covariance(&dist, &self.kernel)).expect("factor succeeded at fit time")
        });
        let k: Vec<f64> = self.inputs.iter().map(|xi| self.kernel.eval(x, xi)).collect();
        let v = forward_solve(l, &k);
        let prior = self.kernel.of_distance(0.0);
        (prior - v.iter().map(|a| a * a).sum::<f64>()).max(0.0)
    }
}

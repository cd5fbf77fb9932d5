//! Bayesian ridge regression with evidence-maximizing hyperparameter updates.
//!
//! A column of ones is appended to the design, so the intercept is the last
//! coefficient and is shrunk together with the others. The Gram matrix of
//! that design is diagonalized once per fit; every posterior evaluation then
//! reduces to scaling in the eigenbasis.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{check_columns, check_finite, with_ones, Estimator, Fitted, LinearModel};
use crate::dataset::{Target, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrrConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub max_iter: usize,
    /// Stop once the L1 change of the weights between iterations drops below this.
    pub tol: f64,
}

impl Default for BrrConfig {
    fn default() -> Self {
        BrrConfig {
            lambda1: 1e-6,
            lambda2: 1e-6,
            alpha1: 1e-6,
            alpha2: 1e-6,
            max_iter: 300,
            tol: 1e-3,
        }
    }
}

impl BrrConfig {
    fn validate(&self) -> Result<()> {
        let priors = [self.lambda1, self.lambda2, self.alpha1, self.alpha2];
        if priors.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("BRR hyperpriors must be positive and finite"));
        }
        if self.max_iter == 0 || !(self.tol > 0.0) {
            return Err(Error::invalid("BRR needs max_iter >= 1 and tol > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrrFit {
    /// Posterior mean, intercept last.
    pub mu: Array1<f64>,
    pub sigma: Array2<f64>,
    /// Noise precision.
    pub alpha: f64,
    /// Weight precision.
    pub lambda: f64,
    /// Effective number of well-determined parameters.
    pub gamma_eff: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl BrrFit {
    pub fn to_linear_model(&self) -> Result<LinearModel> {
        LinearModel::new(self.mu.clone())
    }
}

/// Eigendecomposition of `Z^T Z` plus the projected moment `V^T Z^T y`.
struct Spectrum {
    eigenvalues: Array1<f64>,
    vectors: Array2<f64>,
    projected_xty: Array1<f64>,
}

impl Spectrum {
    fn new(z: &Array2<f64>, y: ArrayView1<f64>) -> Self {
        let m = z.ncols();
        let gram = z.t().dot(z);
        let eig = SymmetricEigen::new(DMatrix::from_fn(m, m, |i, j| gram[[i, j]]));
        let eigenvalues = eig.eigenvalues.iter().map(|&s| s.max(0.0)).collect();
        let vectors = Array2::from_shape_fn((m, m), |(i, j)| eig.eigenvectors[(i, j)]);
        let projected_xty = vectors.t().dot(&z.t().dot(&y));
        Spectrum {
            eigenvalues,
            vectors,
            projected_xty,
        }
    }

    fn mean(&self, alpha: f64, lambda: f64) -> Array1<f64> {
        let scaled: Array1<f64> = self
            .eigenvalues
            .iter()
            .zip(&self.projected_xty)
            .map(|(&s, &b)| alpha * b / (lambda + alpha * s))
            .collect();
        self.vectors.dot(&scaled)
    }

    fn covariance(&self, alpha: f64, lambda: f64) -> Array2<f64> {
        let inv = self.eigenvalues.mapv(|s| 1.0 / (lambda + alpha * s));
        let scaled = &self.vectors * &inv;
        scaled.dot(&self.vectors.t())
    }

    fn gamma(&self, alpha: f64, lambda: f64) -> f64 {
        self.eigenvalues.iter().map(|&s| alpha * s / (lambda + alpha * s)).sum()
    }
}

/// Posterior mean and covariance for fixed precisions `alpha`, `lambda`
/// (one half-update of the evidence iteration). `x` excludes the ones column.
pub fn brr_posterior(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    alpha: f64,
    lambda: f64,
) -> Result<(Array1<f64>, Array2<f64>)> {
    if x.nrows() != y.len() {
        return Err(Error::invalid("X and y disagree on the sample count"));
    }
    if !(alpha > 0.0 && lambda > 0.0) {
        return Err(Error::invalid("precisions must be positive"));
    }
    check_finite(x, Some(y))?;
    let spectrum = Spectrum::new(&with_ones(x), y);
    Ok((spectrum.mean(alpha, lambda), spectrum.covariance(alpha, lambda)))
}

fn population_variance(y: ArrayView1<f64>) -> f64 {
    let n = y.len() as f64;
    let mean = y.sum() / n;
    y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

pub fn brr_fit(x: ArrayView2<f64>, y: ArrayView1<f64>, config: &BrrConfig) -> Result<BrrFit> {
    config.validate()?;
    let n = x.nrows();
    if n != y.len() {
        return Err(Error::invalid("X and y disagree on the sample count"));
    }
    if n < 2 {
        return Err(Error::invalid("BRR needs at least two samples"));
    }
    check_finite(x, Some(y))?;
    let var_y = population_variance(y);
    if var_y <= 0.0 {
        return Err(Error::DegenerateTarget);
    }

    let z = with_ones(x);
    let spectrum = Spectrum::new(&z, y);
    let nf = n as f64;

    let mut alpha = 1.0 / var_y;
    let mut lambda = 1.0;
    let mut previous: Option<Array1<f64>> = None;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        iterations += 1;
        let mu = spectrum.mean(alpha, lambda);
        let gamma = spectrum.gamma(alpha, lambda);
        let residual = &y - &z.dot(&mu);
        let rss = residual.dot(&residual);
        lambda = (gamma + 2.0 * config.lambda1) / (mu.dot(&mu) + 2.0 * config.lambda2);
        alpha = (nf - gamma + 2.0 * config.alpha1) / (rss + 2.0 * config.alpha2);
        if let Some(prev) = &previous {
            let change: f64 = (&mu - prev).iter().map(|d| d.abs()).sum();
            if change < config.tol {
                converged = true;
                break;
            }
        }
        previous = Some(mu);
    }

    let mu = spectrum.mean(alpha, lambda);
    if mu.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("BRR diverged to non-finite weights"));
    }
    Ok(BrrFit {
        sigma: spectrum.covariance(alpha, lambda),
        gamma_eff: spectrum.gamma(alpha, lambda),
        mu,
        alpha,
        lambda,
        iterations,
        converged,
    })
}

pub fn brr_predict(fit: &BrrFit, x: ArrayView2<f64>) -> Result<Array1<f64>> {
    check_columns(x, fit.mu.len() - 1)?;
    let d = x.ncols();
    Ok(x.dot(&fit.mu.slice(ndarray::s![..d])) + fit.mu[d])
}

/// [`brr_fit`] as a pluggable regressor.
#[derive(Debug, Clone, Default)]
pub struct BayesianRidge {
    pub config: BrrConfig,
}

impl Estimator for BayesianRidge {
    fn name(&self) -> String {
        "brr".into()
    }

    fn task(&self) -> Task {
        Task::Regression
    }

    fn fit(&self, x: ArrayView2<f64>, y: &Target) -> Result<Fitted> {
        let fit = brr_fit(x, y.as_continuous()?.view(), &self.config)?;
        Ok(Fitted::Regressor(fit.to_linear_model()?))
    }
}

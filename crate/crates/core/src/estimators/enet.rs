//! Elastic net by cyclic coordinate descent.
//!
//! Minimizes `1/2 |y - Xw|^2 + l1 |w|_1 + 1/2 l2 |w|^2` on centered data; the
//! intercept is recovered from the column and target means afterwards.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_finite, Estimator, Fitted, LinearModel};
use crate::dataset::{Target, Task};
use crate::error::{Error, Result};
use crate::evaluation::{cross_val_score, FoldScheme, Score};

/// Multiples of `|X^T y|_inf` tried for the l1 penalty.
pub const ENET_L1_RATIOS: [f64; 4] = [0.2, 0.1, 0.05, 0.01];
pub const ENET_L2_GRID: [f64; 5] = [0.1, 0.5, 1.0, 10.0, 100.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnetConfig {
    /// Converged once no coordinate moves more than this in a sweep.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for EnetConfig {
    fn default() -> Self {
        EnetConfig {
            tol: 1e-6,
            max_sweeps: 10_000,
        }
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

struct Centered {
    x: Array2<f64>,
    y: Array1<f64>,
    x_mean: Array1<f64>,
    y_mean: f64,
}

fn center(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Centered {
    let x_mean = x.mean_axis(Axis(0)).expect("non-empty design");
    let y_mean = y.mean().expect("non-empty target");
    Centered {
        x: &x - &x_mean,
        y: &y - y_mean,
        x_mean,
        y_mean,
    }
}

/// `|X^T y|_inf` on centered data.
pub fn lambda_max(x: ArrayView2<f64>, y: ArrayView1<f64>) -> f64 {
    let c = center(x, y);
    c.x.t().dot(&c.y).iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn coordinate_descent(c: &Centered, l1: f64, l2: f64, config: &EnetConfig) -> Array1<f64> {
    let d = c.x.ncols();
    let norms: Vec<f64> = c.x.axis_iter(Axis(1)).map(|col| col.dot(&col)).collect();
    let mut w = Array1::<f64>::zeros(d);
    let mut residual = c.y.clone();
    for _ in 0..config.max_sweeps {
        let mut max_change = 0.0f64;
        for j in 0..d {
            if norms[j] == 0.0 {
                continue;
            }
            let col = c.x.column(j);
            let old = w[j];
            let rho = col.dot(&residual) + norms[j] * old;
            let new = soft_threshold(rho, l1) / (norms[j] + l2);
            if new != old {
                residual.scaled_add(old - new, &col);
                w[j] = new;
                max_change = max_change.max((new - old).abs());
            }
        }
        if max_change < config.tol {
            break;
        }
    }
    w
}

pub fn enet_fit(x: ArrayView2<f64>, y: ArrayView1<f64>, l1: f64, l2: f64) -> Result<LinearModel> {
    enet_fit_with(x, y, l1, l2, &EnetConfig::default())
}

pub fn enet_fit_with(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    l1: f64,
    l2: f64,
    config: &EnetConfig,
) -> Result<LinearModel> {
    if x.nrows() != y.len() {
        return Err(Error::invalid("X and y disagree on the sample count"));
    }
    if x.nrows() < 2 {
        return Err(Error::invalid("elastic net needs at least two samples"));
    }
    if !(l1 >= 0.0 && l2 >= 0.0) {
        return Err(Error::invalid("penalties must be non-negative"));
    }
    check_finite(x, Some(y))?;
    let c = center(x, y);
    let w = coordinate_descent(&c, l1, l2, config);
    let intercept = c.y_mean - c.x_mean.dot(&w);
    LinearModel::from_parts(w.view(), intercept)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticNet {
    pub l1: f64,
    pub l2: f64,
    pub config: EnetConfig,
}

impl Estimator for ElasticNet {
    fn name(&self) -> String {
        format!("enet(l1={},l2={})", self.l1, self.l2)
    }

    fn task(&self) -> Task {
        Task::Regression
    }

    fn fit(&self, x: ArrayView2<f64>, y: &Target) -> Result<Fitted> {
        let y = y.as_continuous()?;
        enet_fit_with(x, y.view(), self.l1, self.l2, &self.config).map(Fitted::Regressor)
    }
}

/// One evaluated grid point of an internal search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub params: Vec<(String, f64)>,
    pub score: f64,
}

/// Elastic net whose penalties are chosen by internal cross-validation over
/// `l1 = ratio * |X^T y|_inf` and `l2` grids.
#[derive(Debug, Clone)]
pub struct ElasticNetCv {
    pub l1_ratios: Vec<f64>,
    pub l2_grid: Vec<f64>,
    pub folds: FoldScheme,
    pub config: EnetConfig,
}

impl ElasticNetCv {
    pub fn new(folds: FoldScheme) -> Self {
        ElasticNetCv {
            l1_ratios: ENET_L1_RATIOS.to_vec(),
            l2_grid: ENET_L2_GRID.to_vec(),
            folds,
            config: EnetConfig::default(),
        }
    }

    /// Scores every grid point; returns them with the index of the best
    /// (first in grid order on ties).
    pub fn search(&self, x: ArrayView2<f64>, y: &Target) -> Result<(Vec<GridPoint>, usize)> {
        let yc = y.as_continuous()?;
        let scale = lambda_max(x, yc.view());
        let grid: Vec<(f64, f64)> = self
            .l1_ratios
            .iter()
            .flat_map(|&r| self.l2_grid.iter().map(move |&l2| (r, l2)))
            .collect();
        let points: Vec<GridPoint> = grid
            .par_iter()
            .map(|&(ratio, l2)| {
                let est = ElasticNet {
                    l1: ratio * scale,
                    l2,
                    config: self.config,
                };
                let score = cross_val_score(&est, x, y, None, &self.folds, Score::ExplainedVariance)
                    .map(|cv| cv.mean)
                    .unwrap_or(f64::NEG_INFINITY);
                GridPoint {
                    params: vec![
                        ("l1_ratio".into(), ratio),
                        ("l1".into(), ratio * scale),
                        ("l2".into(), l2),
                    ],
                    score,
                }
            })
            .collect();
        let best = argmax(points.iter().map(|p| p.score));
        Ok((points, best))
    }
}

pub(crate) fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

impl Estimator for ElasticNetCv {
    fn name(&self) -> String {
        "enet-cv".into()
    }

    fn task(&self) -> Task {
        Task::Regression
    }

    fn fit(&self, x: ArrayView2<f64>, y: &Target) -> Result<Fitted> {
        let (points, best) = self.search(x, y)?;
        let l1 = points[best].params[1].1;
        let l2 = points[best].params[2].1;
        ElasticNet {
            l1,
            l2,
            config: self.config,
        }
        .fit(x, y)
    }
}

//! Linear support vector classification by dual coordinate descent.
//!
//! Solves `min 1/2 |w|^2 + C/n * sum_i max(0, 1 - y_i w.z_i)` where `z_i` is
//! sample `i` with a trailing 1, so the bias is penalized like any other
//! coefficient. Scaling the hinge term by `1/n` makes the solution
//! independent of how often the whole training set is repeated.
//! Multiclass problems are split one-vs-rest.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::enet::{argmax, GridPoint};
use super::{check_finite, with_ones, Estimator, Fitted, LinearClassifier, LinearModel};
use crate::dataset::{Target, Task};
use crate::error::{Error, Result};
use crate::evaluation::{cross_val_score, FoldScheme, Score};

pub const SVC_C_GRID: [f64; 5] = [1e-3, 1e-2, 1e-1, 1.0, 10.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvcConfig {
    pub c: f64,
    /// Stop when the projected-gradient spread falls below this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl SvcConfig {
    pub fn with_c(c: f64) -> Self {
        SvcConfig {
            c,
            tol: 1e-9,
            max_sweeps: 20_000,
        }
    }
}

impl Default for SvcConfig {
    fn default() -> Self {
        Self::with_c(0.01)
    }
}

/// Binary problem with signs `s_i in {-1, +1}` on the augmented design.
/// Returns the dual variables and the primal weights.
fn dual_cd(z: ArrayView2<f64>, signs: &[f64], upper: f64, config: &SvcConfig) -> (Array1<f64>, Array1<f64>) {
    let (n, m) = z.dim();
    let diag: Vec<f64> = z.outer_iter().map(|r| r.dot(&r)).collect();
    let mut alpha = Array1::<f64>::zeros(n);
    let mut w = Array1::<f64>::zeros(m);
    for _ in 0..config.max_sweeps {
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;
        for i in 0..n {
            if diag[i] == 0.0 {
                continue;
            }
            let row = z.row(i);
            let g = signs[i] * w.dot(&row) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == upper {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg != 0.0 {
                let old = alpha[i];
                let new = (old - g / diag[i]).clamp(0.0, upper);
                if new != old {
                    alpha[i] = new;
                    w.scaled_add((new - old) * signs[i], &row);
                }
            }
        }
        if pg_max - pg_min < config.tol || pg_max == f64::NEG_INFINITY {
            break;
        }
    }
    (alpha, w)
}

/// Dual objective `1/2 a^T Q a - sum(a)` with `Q_ij = s_i s_j z_i.z_j`, for
/// labels in `{-1, +1}` and the design without the ones column.
pub fn svc_dual_objective(x: ArrayView2<f64>, signs: &[f64], alpha: ArrayView1<f64>) -> f64 {
    let z = with_ones(x);
    let mut v = Array1::<f64>::zeros(z.ncols());
    for (i, row) in z.outer_iter().enumerate() {
        v.scaled_add(alpha[i] * signs[i], &row);
    }
    0.5 * v.dot(&v) - alpha.sum()
}

fn binary_model(z: ArrayView2<f64>, signs: &[f64], config: &SvcConfig) -> Result<(LinearModel, Array1<f64>)> {
    let upper = config.c / z.nrows() as f64;
    let (alpha, w) = dual_cd(z, signs, upper, config);
    Ok((LinearModel::new(w)?, alpha))
}

/// Fits a linear SVC on integer class labels.
pub fn svc_fit(x: ArrayView2<f64>, labels: &[i64], config: &SvcConfig) -> Result<LinearClassifier> {
    if x.nrows() != labels.len() {
        return Err(Error::invalid("X and labels disagree on the sample count"));
    }
    if !(config.c > 0.0) {
        return Err(Error::invalid("C must be positive"));
    }
    check_finite(x, None)?;
    let mut classes: Vec<i64> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::DegenerateLabels(format!(
            "need at least two classes, found {}",
            classes.len()
        )));
    }
    let z = with_ones(x);
    let positives: Vec<i64> = if classes.len() == 2 {
        vec![classes[1]]
    } else {
        classes.clone()
    };
    let models = positives
        .iter()
        .map(|&c| {
            let signs: Vec<f64> = labels.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
            binary_model(z.view(), &signs, config).map(|(m, _)| m)
        })
        .collect::<Result<Vec<_>>>()?;
    LinearClassifier::new(classes, models)
}

/// Dual variables of the binary problem, exposed for solver checks.
pub fn svc_dual(x: ArrayView2<f64>, signs: &[f64], config: &SvcConfig) -> Array1<f64> {
    let z = with_ones(x);
    dual_cd(z.view(), signs, config.c / z.nrows() as f64, config).0
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LinearSvc {
    pub config: SvcConfig,
}

impl Estimator for LinearSvc {
    fn name(&self) -> String {
        format!("svc(C={})", self.config.c)
    }

    fn task(&self) -> Task {
        Task::Classification
    }

    fn fit(&self, x: ArrayView2<f64>, y: &Target) -> Result<Fitted> {
        svc_fit(x, y.as_labels()?, &self.config).map(Fitted::Classifier)
    }
}

/// Linear SVC with `C` chosen by internal cross-validation.
#[derive(Debug, Clone)]
pub struct LinearSvcCv {
    pub c_grid: Vec<f64>,
    pub folds: FoldScheme,
}

impl LinearSvcCv {
    pub fn new(folds: FoldScheme) -> Self {
        LinearSvcCv {
            c_grid: SVC_C_GRID.to_vec(),
            folds,
        }
    }

    pub fn search(&self, x: ArrayView2<f64>, y: &Target) -> Result<(Vec<GridPoint>, usize)> {
        let points: Vec<GridPoint> = self
            .c_grid
            .par_iter()
            .map(|&c| {
                let est = LinearSvc {
                    config: SvcConfig::with_c(c),
                };
                let score = cross_val_score(&est, x, y, None, &self.folds, Score::Accuracy)
                    .map(|cv| cv.mean)
                    .unwrap_or(f64::NEG_INFINITY);
                GridPoint {
                    params: vec![("C".into(), c)],
                    score,
                }
            })
            .collect();
        let best = argmax(points.iter().map(|p| p.score));
        Ok((points, best))
    }
}

impl Estimator for LinearSvcCv {
    fn name(&self) -> String {
        "svc-cv".into()
    }

    fn task(&self) -> Task {
        Task::Classification
    }

    fn fit(&self, x: ArrayView2<f64>, y: &Target) -> Result<Fitted> {
        let (points, best) = self.search(x, y)?;
        LinearSvc {
            config: SvcConfig::with_c(points[best].params[0].1),
        }
        .fit(x, y)
    }
}

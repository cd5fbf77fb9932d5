use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::dataset::{Target, Task};
use crate::error::{Error, Result};

/// Ratio of explained variance, `(var(y) - var(y - y_hat)) / var(y)`, with
/// population variances. Equals 1 for a perfect and 0 for a constant prediction.
pub fn explained_variance(y_true: ArrayView1<f64>, y_pred: ArrayView1<f64>) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::invalid("y_true and y_pred differ in length"));
    }
    if y_true.len() < 2 {
        return Err(Error::invalid("explained variance needs at least two samples"));
    }
    let n = y_true.len() as f64;
    let mean_t = y_true.sum() / n;
    let var_t = y_true.iter().map(|v| (v - mean_t).powi(2)).sum::<f64>() / n;
    if var_t <= 0.0 {
        return Err(Error::DegenerateTarget);
    }
    let mean_r = y_true.iter().zip(&y_pred).map(|(a, b)| a - b).sum::<f64>() / n;
    let var_r = y_true
        .iter()
        .zip(&y_pred)
        .map(|(a, b)| (a - b - mean_r).powi(2))
        .sum::<f64>()
        / n;
    Ok((var_t - var_r) / var_t)
}

/// Fraction of exact label matches.
pub fn accuracy(y_true: &[i64], y_pred: &[i64]) -> Result<f64> {
    if y_true.len() != y_pred.len() || y_true.is_empty() {
        return Err(Error::invalid("accuracy needs equal, non-zero lengths"));
    }
    let hits = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y_true.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Score {
    /// Explained variance (regression).
    #[serde(alias = "zeta")]
    ExplainedVariance,
    /// Classification accuracy.
    #[serde(alias = "kappa")]
    Accuracy,
}

impl Score {
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Regression => Score::ExplainedVariance,
            Task::Classification => Score::Accuracy,
        }
    }

    pub fn evaluate(&self, y_true: &Target, y_pred: &Target) -> Result<f64> {
        match (self, y_true, y_pred) {
            (Score::ExplainedVariance, Target::Continuous(t), Target::Continuous(p)) => {
                explained_variance(t.view(), p.view())
            }
            (Score::Accuracy, Target::Labels(t), Target::Labels(p)) => accuracy(t, p),
            _ => Err(Error::invalid("score does not match the target type")),
        }
    }

    /// Upper bound of the score's range.
    pub fn best_possible(&self) -> f64 {
        1.0
    }
}

use ndarray::{ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FoldScheme, Score};
use crate::dataset::Target;
use crate::error::{Error, Result};
use crate::estimators::Estimator;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub mean: f64,
    pub per_fold: Vec<f64>,
}

/// Fits on each training fold and scores on the matching test fold. Folds
/// run in parallel; the first failing fold (in fold order) is reported.
pub fn cross_val_score<E: Estimator + ?Sized>(
    estimator: &E,
    x: ArrayView2<f64>,
    y: &Target,
    groups: Option<&[i64]>,
    scheme: &FoldScheme,
    score: Score,
) -> Result<CvScore> {
    if x.nrows() != y.len() {
        return Err(Error::invalid("X and y disagree on the sample count"));
    }
    let folds = scheme.folds(x.nrows(), groups)?;
    let per_fold: Vec<Result<f64>> = folds
        .par_iter()
        .map(|fold| {
            let x_train = x.select(Axis(0), &fold.train);
            let x_test = x.select(Axis(0), &fold.test);
            let train_groups: Option<Vec<i64>> = groups.map(|g| fold.train.iter().map(|&i| g[i]).collect());
            let fitted = estimator.fit_grouped(x_train.view(), &y.select(&fold.train), train_groups.as_deref())?;
            let pred = fitted.predict(x_test.view())?;
            score.evaluate(&y.select(&fold.test), &pred)
        })
        .collect();
    let mut scores = Vec::with_capacity(per_fold.len());
    for (fold, s) in per_fold.into_iter().enumerate() {
        match s {
            Ok(v) => scores.push(v),
            Err(e) => {
                return Err(Error::FoldFailed {
                    fold,
                    source: Box::new(e),
                })
            }
        }
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok(CvScore { mean, per_fold: scores })
}

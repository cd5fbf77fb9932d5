//! Linear prediction functions.
//!
//! Every estimator here produces a linear model over its input columns, with
//! the intercept stored as the last coefficient. Classifiers keep one such
//! model per class (one-vs-rest) or a single model for two classes.

mod anova;
mod brr;
mod enet;
mod svc;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::{Target, Task};
use crate::error::{Error, Result};

pub use anova::{anova_f_scores, anova_select, AnovaPipeline, ANOVA_K_GRID};
pub use brr::{brr_fit, brr_posterior, brr_predict, BayesianRidge, BrrConfig, BrrFit};
pub use enet::{
    enet_fit, enet_fit_with, lambda_max, ElasticNet, ElasticNetCv, EnetConfig, GridPoint, ENET_L1_RATIOS, ENET_L2_GRID,
};
pub use svc::{svc_dual, svc_dual_objective, svc_fit, LinearSvc, LinearSvcCv, SvcConfig, SVC_C_GRID};

/// A fitted linear function `x . w[..d] + w[d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    weights: Array1<f64>,
}

impl LinearModel {
    /// `weights` holds the `d` coefficients followed by the intercept.
    pub fn new(weights: Array1<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("a linear model needs at least the intercept"));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("non-finite model weights"));
        }
        Ok(LinearModel { weights })
    }

    pub fn from_parts(coef: ArrayView1<f64>, intercept: f64) -> Result<Self> {
        let mut w = Array1::zeros(coef.len() + 1);
        w.slice_mut(s![..coef.len()]).assign(&coef);
        w[coef.len()] = intercept;
        Self::new(w)
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }

    pub fn n_features(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn coef(&self) -> ArrayView1<'_, f64> {
        self.weights.slice(s![..self.n_features()])
    }

    pub fn intercept(&self) -> f64 {
        self.weights[self.n_features()]
    }

    pub fn decision(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        check_columns(x, self.n_features())?;
        Ok(x.dot(&self.coef()) + self.intercept())
    }

    /// Model over `p` columns whose coefficients sit at `selected`, zero elsewhere.
    fn embed(&self, selected: &[usize], p: usize) -> LinearModel {
        let mut w = Array1::zeros(p + 1);
        for (k, &j) in selected.iter().enumerate() {
            w[j] = self.weights[k];
        }
        w[p] = self.intercept();
        LinearModel { weights: w }
    }
}

/// A linear classifier. With two classes a single model decides
/// `classes[1]` when its decision value is positive; otherwise one model per
/// class is kept and the largest decision value wins, ties going to the
/// smaller class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    classes: Vec<i64>,
    models: Vec<LinearModel>,
}

impl LinearClassifier {
    pub fn new(classes: Vec<i64>, models: Vec<LinearModel>) -> Result<Self> {
        let expected = if classes.len() == 2 { 1 } else { classes.len() };
        if classes.len() < 2 || models.len() != expected {
            return Err(Error::invalid("classifier needs >= 2 classes and matching models"));
        }
        Ok(LinearClassifier { classes, models })
    }

    pub fn classes(&self) -> &[i64] {
        &self.classes
    }

    pub fn models(&self) -> &[LinearModel] {
        &self.models
    }

    /// Decision values, one column per model.
    pub fn decision(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((x.nrows(), self.models.len()));
        for (k, m) in self.models.iter().enumerate() {
            out.column_mut(k).assign(&m.decision(x)?);
        }
        Ok(out)
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<i64>> {
        let d = self.decision(x)?;
        if self.classes.len() == 2 {
            return Ok(d
                .column(0)
                .iter()
                .map(|&v| if v > 0.0 { self.classes[1] } else { self.classes[0] })
                .collect());
        }
        Ok(d.axis_iter(Axis(0))
            .map(|row| {
                let mut best = 0;
                for k in 1..row.len() {
                    if row[k] > row[best] {
                        best = k;
                    }
                }
                self.classes[best]
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fitted {
    Regressor(LinearModel),
    Classifier(LinearClassifier),
}

impl Fitted {
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Target> {
        match self {
            Fitted::Regressor(m) => Ok(Target::Continuous(m.decision(x)?)),
            Fitted::Classifier(c) => Ok(Target::Labels(c.predict(x)?)),
        }
    }

    /// Per-feature coefficients without the intercept. Multiclass models
    /// report the root-mean-square coefficient across classes.
    pub fn coefficients(&self) -> Array1<f64> {
        match self {
            Fitted::Regressor(m) => m.coef().to_owned(),
            Fitted::Classifier(c) if c.models.len() == 1 => c.models[0].coef().to_owned(),
            Fitted::Classifier(c) => {
                let k = c.models.len() as f64;
                let mut acc = Array1::<f64>::zeros(c.models[0].n_features());
                for m in &c.models {
                    acc += &m.coef().mapv(|v| v * v);
                }
                acc.mapv(|v| (v / k).sqrt())
            }
        }
    }

    fn embed(&self, selected: &[usize], p: usize) -> Fitted {
        match self {
            Fitted::Regressor(m) => Fitted::Regressor(m.embed(selected, p)),
            Fitted::Classifier(c) => Fitted::Classifier(LinearClassifier {
                classes: c.classes.clone(),
                models: c.models.iter().map(|m| m.embed(selected, p)).collect(),
            }),
        }
    }
}

/// A prediction function that can be refit on any design.
pub trait Estimator: Send + Sync {
    fn name(&self) -> String;

    fn task(&self) -> Task;

    fn fit(&self, x: ArrayView2<f64>, y: &Target) -> Result<Fitted>;

    /// Like [`Estimator::fit`], for estimators whose internal model selection
    /// needs the sample groups.
    fn fit_grouped(&self, x: ArrayView2<f64>, y: &Target, groups: Option<&[i64]>) -> Result<Fitted> {
        let _ = groups;
        self.fit(x, y)
    }
}

impl<E: Estimator + ?Sized> Estimator for Box<E> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn task(&self) -> Task {
        (**self).task()
    }

    fn fit(&self, x: ArrayView2<f64>, y: &Target) -> Result<Fitted> {
        (**self).fit(x, y)
    }

    fn fit_grouped(&self, x: ArrayView2<f64>, y: &Target, groups: Option<&[i64]>) -> Result<Fitted> {
        (**self).fit_grouped(x, y, groups)
    }
}

impl<E: Estimator + ?Sized> Estimator for &E {
    fn name(&self) -> String {
        (**self).name()
    }

    fn task(&self) -> Task {
        (**self).task()
    }

    fn fit(&self, x: ArrayView2<f64>, y: &Target) -> Result<Fitted> {
        (**self).fit(x, y)
    }

    fn fit_grouped(&self, x: ArrayView2<f64>, y: &Target, groups: Option<&[i64]>) -> Result<Fitted> {
        (**self).fit_grouped(x, y, groups)
    }
}

fn check_columns(x: ArrayView2<f64>, expected: usize) -> Result<()> {
    if x.ncols() != expected {
        return Err(Error::invalid(format!(
            "design has {} columns, model expects {expected}",
            x.ncols()
        )));
    }
    Ok(())
}

fn check_finite(x: ArrayView2<f64>, y: Option<ArrayView1<f64>>) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("design contains non-finite values"));
    }
    if let Some(y) = y {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("target contains non-finite values"));
        }
    }
    Ok(())
}

/// `x` with a trailing column of ones.
fn with_ones(x: ArrayView2<f64>) -> Array2<f64> {
    let (n, d) = x.dim();
    let mut z = Array2::ones((n, d + 1));
    z.slice_mut(s![.., ..d]).assign(&x);
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_weights_predict_intercept() {
        let m = LinearModel::from_parts(array![0.0, 0.0].view(), 2.5).unwrap();
        let y = m.decision(array![[1.0, -3.0], [7.0, 0.5]].view()).unwrap();
        assert_eq!(y.to_vec(), vec![2.5, 2.5]);
    }

    #[test]
    fn multiclass_tie_goes_to_smaller_class() {
        let zero = LinearModel::from_parts(array![0.0].view(), 0.0).unwrap();
        let c = LinearClassifier::new(vec![3, 5, 9], vec![zero.clone(), zero.clone(), zero]).unwrap();
        assert_eq!(c.predict(array![[1.0]].view()).unwrap(), vec![3]);
    }

    #[test]
    fn embed_places_coefficients() {
        let m = LinearModel::from_parts(array![2.0, 3.0].view(), 1.0).unwrap();
        let e = m.embed(&[1, 4], 5);
        assert_eq!(e.weights().to_vec(), vec![0.0, 2.0, 0.0, 0.0, 3.0, 1.0]);
    }
}

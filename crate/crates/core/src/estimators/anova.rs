//! Univariate F-test screening and the screening + estimator pipeline.

use ndarray::{ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use super::enet::{argmax, GridPoint};
use super::{Estimator, Fitted};
use crate::dataset::{Target, Task};
use crate::error::{Error, Result};
use crate::evaluation::{cross_val_score, FoldScheme, Score};

/// Numbers of retained features tried by the screening pipeline.
pub const ANOVA_K_GRID: [usize; 4] = [50, 100, 250, 500];

fn regression_f(col: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    let n = col.len() as f64;
    let mx = col.sum() / n;
    let my = y.sum() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in col.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    let r2 = (sxy * sxy / (sxx * syy)).min(1.0);
    if r2 >= 1.0 {
        return f64::INFINITY;
    }
    r2 / (1.0 - r2) * (n - 2.0)
}

fn classification_f(col: ArrayView1<f64>, labels: &[i64], classes: &[i64]) -> f64 {
    let n = col.len();
    let grand = col.sum() / n as f64;
    let mut between = 0.0;
    let mut within = 0.0;
    for &c in classes {
        let members: Vec<f64> = col
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == c)
            .map(|(&v, _)| v)
            .collect();
        let m = members.iter().sum::<f64>() / members.len() as f64;
        between += members.len() as f64 * (m - grand) * (m - grand);
        within += members.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
    }
    let k = classes.len() as f64;
    let df_between = k - 1.0;
    let df_within = n as f64 - k;
    if between == 0.0 {
        return 0.0;
    }
    if within == 0.0 {
        return f64::INFINITY;
    }
    (between / df_between) / (within / df_within)
}

/// F statistic of every column against the target: univariate linear
/// regression for continuous targets, one-way ANOVA for class labels.
pub fn anova_f_scores(x: ArrayView2<f64>, y: &Target) -> Result<Vec<f64>> {
    if x.nrows() != y.len() {
        return Err(Error::invalid("X and y disagree on the sample count"));
    }
    match y {
        Target::Continuous(y) => {
            if x.nrows() < 3 {
                return Err(Error::invalid("F-test needs at least three samples"));
            }
            Ok(x.axis_iter(Axis(1)).map(|c| regression_f(c, y.view())).collect())
        }
        Target::Labels(labels) => {
            let mut classes = labels.clone();
            classes.sort_unstable();
            classes.dedup();
            if classes.len() < 2 || classes.len() >= labels.len() {
                return Err(Error::DegenerateLabels("ANOVA needs 2 <= classes < samples".into()));
            }
            Ok(x.axis_iter(Axis(1))
                .map(|c| classification_f(c, labels, &classes))
                .collect())
        }
    }
}

/// Indices of the `k` largest F statistics, ascending; ties keep the smaller index.
pub fn anova_select(x: ArrayView2<f64>, y: &Target, k: usize) -> Result<Vec<usize>> {
    if k > x.ncols() {
        return Err(Error::invalid(format!("k = {k} exceeds {} features", x.ncols())));
    }
    let f = anova_f_scores(x, y)?;
    let mut order: Vec<usize> = (0..f.len()).collect();
    order.sort_by(|&a, &b| f[b].total_cmp(&f[a]).then(a.cmp(&b)));
    let mut chosen = order[..k].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

/// ANOVA screening followed by an inner estimator, the number of kept
/// features chosen by internal cross-validation. Grid values above the
/// feature count are clipped to it.
pub struct AnovaPipeline<E> {
    pub k_grid: Vec<usize>,
    pub inner: E,
    pub folds: FoldScheme,
}

impl<E: Estimator> AnovaPipeline<E> {
    pub fn new(inner: E, folds: FoldScheme) -> Self {
        AnovaPipeline {
            k_grid: ANOVA_K_GRID.to_vec(),
            inner,
            folds,
        }
    }

    fn effective_grid(&self, p: usize) -> Vec<usize> {
        let mut ks: Vec<usize> = self.k_grid.iter().map(|&k| k.min(p)).filter(|&k| k > 0).collect();
        ks.dedup();
        ks
    }

    pub fn search(&self, x: ArrayView2<f64>, y: &Target) -> Result<(Vec<GridPoint>, usize)> {
        let ks = self.effective_grid(x.ncols());
        if ks.is_empty() {
            return Err(Error::invalid("empty ANOVA grid"));
        }
        let points: Vec<GridPoint> = ks
            .par_iter()
            .map(|&k| {
                let est = Screened { k, inner: &self.inner };
                let score = cross_val_score(&est, x, y, None, &self.folds, Score::for_task(y.task()))
                    .map(|cv| cv.mean)
                    .unwrap_or(f64::NEG_INFINITY);
                GridPoint {
                    params: vec![("k".into(), k as f64)],
                    score,
                }
            })
            .collect();
        let best = argmax(points.iter().map(|p| p.score));
        Ok((points, best))
    }
}

/// Fixed-`k` screening in front of an estimator.
struct Screened<'a, E> {
    k: usize,
    inner: &'a E,
}

impl<E: Estimator> Estimator for Screened<'_, E> {
    fn name(&self) -> String {
        format!("anova({})+{}", self.k, self.inner.name())
    }

    fn task(&self) -> Task {
        self.inner.task()
    }

    fn fit(&self, x: ArrayView2<f64>, y: &Target) -> Result<Fitted> {
        let selected = anova_select(x, y, self.k.min(x.ncols()))?;
        let reduced = x.select(Axis(1), &selected);
        let fitted = self.inner.fit(reduced.view(), y)?;
        Ok(fitted.embed(&selected, x.ncols()))
    }
}

impl<E: Estimator> Estimator for AnovaPipeline<E> {
    fn name(&self) -> String {
        format!("anova+{}", self.inner.name())
    }

    fn task(&self) -> Task {
        self.inner.task()
    }

    fn fit(&self, x: ArrayView2<f64>, y: &Target) -> Result<Fitted> {
        let (points, best) = self.search(x, y)?;
        let k = points[best].params[0].1 as usize;
        Screened { k, inner: &self.inner }.fit(x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use ndarray::{array, Array1, Array2};
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn perfect_correlate_is_selected() {
        let mut rng = stream_rng(0, "anova-test", 0);
        let x = Array2::from_shape_fn((30, 6), |_| StandardNormal.sample(&mut rng));
        let y: Array1<f64> = x.column(3).mapv(|v| v + 1e-6);
        let y = Target::Continuous(&y + &Array1::from_shape_fn(30, |i| 1e-6 * (i as f64).sin()));
        assert_eq!(anova_select(x.view(), &y, 1).unwrap(), vec![3]);
        assert_eq!(anova_select(x.view(), &y, 6).unwrap(), (0..6).collect::<Vec<_>>());
        assert!(anova_select(x.view(), &y, 7).is_err());
    }

    #[test]
    fn hand_computed_two_class_f() {
        // feature 0: class a = {1, 3}, class b = {5, 7}; grand mean 4
        // between = 2*(2-4)^2 + 2*(6-4)^2 = 16, within = 2 + 2 = 4
        // F = (16/1) / (4/2) = 8
        let x = array![[1.0, 0.0], [3.0, 1.0], [5.0, 0.0], [7.0, 1.0]];
        let y = Target::Labels(vec![0, 0, 1, 1]);
        let f = anova_f_scores(x.view(), &y).unwrap();
        assert!((f[0] - 8.0).abs() < 1e-12);
        assert_eq!(f[1], 0.0);
        assert_eq!(anova_select(x.view(), &y, 1).unwrap(), vec![0]);
    }

    #[test]
    fn ties_prefer_smaller_index() {
        let x = array![[1.0, 1.0, 0.0], [2.0, 2.0, 5.0], [3.0, 3.0, 1.0]];
        let y = Target::Continuous(array![1.0, 2.0, 3.0]);
        assert_eq!(anova_select(x.view(), &y, 1).unwrap(), vec![0]);
    }
}

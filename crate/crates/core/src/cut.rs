//! Top-down pruning of the Ward tree.
//!
//! The supervised cut starts from the root parcel and, at each step, splits
//! the parcel whose split gives the best cross-validated score under the
//! exploration scheme. The unsupervised cut undoes the most recent merges
//! instead. Both then pick, under a separate selection scheme, the
//! parcellation size with the best score.

use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Target};
use crate::error::{Error, Result};
use crate::estimators::{Estimator, Fitted, LinearModel};
use crate::evaluation::{Fold, FoldScheme, Score};
use crate::grid::{ConnectivityGraph, VoxelGrid, WeightMap};
use crate::parcellation::{backproject_weights, main_branches_cut, parcel_averages, NodeSignals, Parcellation};
use crate::ward::{ward_build, Dendrogram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutMethod {
    Supervised,
    Unsupervised,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutConfig {
    /// Number of exploration steps (supervised) or largest parcel count
    /// (unsupervised).
    pub max_steps: usize,
    pub explore: FoldScheme,
    pub select: FoldScheme,
    pub score: Score,
}

impl CutConfig {
    /// 50 steps with 4-fold exploration and selection.
    pub fn simulation_default(seed: u64, score: Score) -> Self {
        CutConfig {
            max_steps: 50,
            explore: FoldScheme::kfold(4, seed),
            select: FoldScheme::kfold(4, seed.wrapping_add(1)),
            score,
        }
    }

    /// 75 steps with leave-one-group-out exploration and selection.
    pub fn grouped_default(score: Score) -> Self {
        CutConfig {
            max_steps: 75,
            explore: FoldScheme::leave_one_group_out(),
            select: FoldScheme::leave_one_group_out(),
            score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub parcel: usize,
    pub node: usize,
    /// Mean exploration score; `None` when the estimator failed on a fold.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub step: usize,
    pub candidates: Vec<Candidate>,
    pub chosen_parcel: usize,
    pub chosen_node: usize,
    pub children: (usize, usize),
}

/// The nested parcellations explored by a cut and their scores.
#[derive(Debug, Clone, PartialEq)]
pub struct CutTrace {
    pub method: CutMethod,
    /// Entry `d - 1` holds the parcellation for `d` in `1..=steps`.
    pub parcellations: Vec<Parcellation>,
    pub exploration_scores: Vec<f64>,
    pub selection_scores: Vec<f64>,
    pub steps: Vec<Step>,
    pub chosen_delta: usize,
    /// Estimator fits performed, failed fits included.
    pub fit_count: usize,
    /// Singleton parcels passed over during exploration.
    pub skipped_singletons: usize,
}

impl CutTrace {
    pub fn chosen_parcellation(&self) -> &Parcellation {
        &self.parcellations[self.chosen_delta - 1]
    }

    pub fn n_steps(&self) -> usize {
        self.parcellations.len()
    }

    pub fn report(&self) -> TraceReport {
        TraceReport {
            method: self.method,
            steps: self.steps.clone(),
            exploration_scores: self.exploration_scores.iter().map(|&v| finite(v)).collect(),
            selection_scores: self.selection_scores.iter().map(|&v| finite(v)).collect(),
            parcel_counts: self.parcellations.iter().map(Parcellation::n_parcels).collect(),
            chosen_delta: self.chosen_delta,
            chosen_parcel_count: self.chosen_parcellation().n_parcels(),
            fit_count: self.fit_count,
            skipped_singletons: self.skipped_singletons,
        }
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// JSON form of a [`CutTrace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub method: CutMethod,
    pub steps: Vec<Step>,
    pub exploration_scores: Vec<Option<f64>>,
    pub selection_scores: Vec<Option<f64>>,
    pub parcel_counts: Vec<usize>,
    pub chosen_delta: usize,
    pub chosen_parcel_count: usize,
    pub fit_count: usize,
    pub skipped_singletons: usize,
}

/// Closed-form number of estimator fits of a supervised cut with no
/// singleton parcels: `sum_{d=1..steps} explore_folds * d + steps * select_folds`.
pub fn expected_fit_count(steps: usize, explore_folds: usize, select_folds: usize) -> usize {
    explore_folds * steps * (steps + 1) / 2 + steps * select_folds
}

struct Evaluator<'a, E: ?Sized> {
    signals: &'a NodeSignals,
    y: &'a Target,
    estimator: &'a E,
    score: Score,
    fits: AtomicUsize,
}

impl<E: Estimator + ?Sized> Evaluator<'_, E> {
    /// Mean fold score of the parcellation given by `nodes`; `-inf` if any
    /// fold fails.
    fn score(&self, nodes: &[usize], folds: &[Fold], groups: Option<&[i64]>) -> f64 {
        let design = self.signals.gather(nodes, None);
        let mut total = 0.0;
        for fold in folds {
            match self.fold_score(&design, fold, groups) {
                Ok(s) if s.is_finite() => total += s,
                _ => return f64::NEG_INFINITY,
            }
        }
        total / folds.len() as f64
    }

    fn fold_score(&self, design: &Array2<f64>, fold: &Fold, groups: Option<&[i64]>) -> Result<f64> {
        let x_train = design.select(Axis(0), &fold.train);
        let x_test = design.select(Axis(0), &fold.test);
        let g: Option<Vec<i64>> = groups.map(|g| fold.train.iter().map(|&i| g[i]).collect());
        self.fits.fetch_add(1, Ordering::Relaxed);
        let fitted = self
            .estimator
            .fit_grouped(x_train.view(), &self.y.select(&fold.train), g.as_deref())?;
        let pred = fitted.predict(x_test.view())?;
        self.score.evaluate(&self.y.select(&fold.test), &pred)
    }
}

fn check_inputs(train: &Dataset, tree: &Dendrogram, max_steps: usize) -> Result<()> {
    if max_steps == 0 {
        return Err(Error::invalid("the number of steps must be at least 1"));
    }
    if train.n_features() != tree.n_leaves() {
        return Err(Error::invalid(format!(
            "dataset has {} features, tree has {} leaves",
            train.n_features(),
            tree.n_leaves()
        )));
    }
    if tree.n_leaves() < 2 {
        return Err(Error::invalid("a cut needs at least two features"));
    }
    Ok(())
}

/// First index of the maximum; `-inf` everywhere selects index 0.
fn first_argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Greedy supervised cut followed by model selection.
pub fn supervised_cut<E: Estimator + ?Sized>(
    train: &Dataset,
    tree: &Dendrogram,
    estimator: &E,
    config: &CutConfig,
) -> Result<CutTrace> {
    check_inputs(train, tree, config.max_steps)?;
    let p = tree.n_leaves();
    let steps = if config.max_steps > p - 1 {
        log::warn!(
            "{} steps requested for {p} features; clipped to {}",
            config.max_steps,
            p - 1
        );
        p - 1
    } else {
        config.max_steps
    };
    let n = train.n_samples();
    let groups = train.groups();
    let explore = config.explore.folds(n, groups)?;
    let select = config.select.folds(n, groups)?;
    let signals = NodeSignals::new(train.x().view(), tree)?;
    let eval = Evaluator {
        signals: &signals,
        y: train.y(),
        estimator,
        score: config.score,
        fits: AtomicUsize::new(0),
    };

    let mut current = Parcellation::root(tree);
    let mut parcellations = Vec::with_capacity(steps);
    let mut exploration_scores = Vec::with_capacity(steps);
    let mut records = Vec::with_capacity(steps);
    let mut skipped = 0;
    for step in 1..=steps {
        let splittable: Vec<(usize, usize, (usize, usize))> = current
            .parcel_nodes()
            .iter()
            .enumerate()
            .filter_map(|(k, &node)| tree.children(node).ok().map(|c| (k, node, c)))
            .collect();
        skipped += current.n_parcels() - splittable.len();

        let scores: Vec<f64> = splittable
            .par_iter()
            .map(|&(k, _, (a, b))| {
                let mut nodes = current.parcel_nodes().to_vec();
                nodes[k] = a;
                nodes.push(b);
                eval.score(&nodes, &explore, groups)
            })
            .collect();
        let best = first_argmax(&scores);
        let (parcel, node, children) = splittable[best];
        records.push(Step {
            step,
            candidates: splittable
                .iter()
                .zip(&scores)
                .map(|(&(k, node, _), &s)| Candidate {
                    parcel: k,
                    node,
                    score: finite(s),
                })
                .collect(),
            chosen_parcel: parcel,
            chosen_node: node,
            children,
        });
        exploration_scores.push(scores[best]);
        current = current.refine(parcel, tree)?;
        parcellations.push(current.clone());
    }

    let selection_scores: Vec<f64> = parcellations
        .par_iter()
        .map(|parc| eval.score(parc.parcel_nodes(), &select, groups))
        .collect();
    let chosen_delta = first_argmax(&selection_scores) + 1;
    Ok(CutTrace {
        method: CutMethod::Supervised,
        parcellations,
        exploration_scores,
        selection_scores,
        steps: records,
        chosen_delta,
        fit_count: eval.fits.load(Ordering::Relaxed),
        skipped_singletons: skipped,
    })
}

/// Scores the main-branch cuts with 1..=max_steps parcels and keeps the best.
pub fn unsupervised_cut_select<E: Estimator + ?Sized>(
    train: &Dataset,
    tree: &Dendrogram,
    estimator: &E,
    config: &CutConfig,
) -> Result<CutTrace> {
    check_inputs(train, tree, config.max_steps)?;
    let p = tree.n_leaves();
    let steps = if config.max_steps > p {
        log::warn!(
            "{} parcels requested for {p} features; clipped to {p}",
            config.max_steps
        );
        p
    } else {
        config.max_steps
    };
    let groups = train.groups();
    let select = config.select.folds(train.n_samples(), groups)?;
    let signals = NodeSignals::new(train.x().view(), tree)?;
    let eval = Evaluator {
        signals: &signals,
        y: train.y(),
        estimator,
        score: config.score,
        fits: AtomicUsize::new(0),
    };
    let parcellations = (1..=steps)
        .map(|d| main_branches_cut(tree, d))
        .collect::<Result<Vec<_>>>()?;
    let selection_scores: Vec<f64> = parcellations
        .par_iter()
        .map(|parc| eval.score(parc.parcel_nodes(), &select, groups))
        .collect();
    let chosen_delta = first_argmax(&selection_scores) + 1;
    Ok(CutTrace {
        method: CutMethod::Unsupervised,
        parcellations,
        exploration_scores: selection_scores.clone(),
        selection_scores,
        steps: Vec::new(),
        chosen_delta,
        fit_count: eval.fits.load(Ordering::Relaxed),
        skipped_singletons: 0,
    })
}

/// Model fitted on the chosen parcellation.
#[derive(Debug, Clone)]
pub struct CutModel {
    pub parcellation: Parcellation,
    /// Model over parcel averages.
    pub parcel_model: Fitted,
}

impl CutModel {
    pub fn fit<E: Estimator + ?Sized>(parcellation: Parcellation, train: &Dataset, estimator: &E) -> Result<Self> {
        let reduced = parcel_averages(train.x().view(), &parcellation)?;
        let parcel_model = estimator.fit_grouped(reduced.view(), train.y(), train.groups())?;
        Ok(CutModel {
            parcellation,
            parcel_model,
        })
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Target> {
        let reduced = parcel_averages(x, &self.parcellation)?;
        self.parcel_model.predict(reduced.view())
    }

    /// Parcel coefficients spread over features (divided by parcel size).
    pub fn weight_map(&self, grid: &VoxelGrid) -> Result<WeightMap> {
        backproject_weights(self.parcel_model.coefficients().view(), &self.parcellation, grid)
    }

    /// The equivalent model over the original features: a parcel average
    /// is linear in `x`, so parcel weights divided by parcel size act
    /// directly on the features.
    pub fn feature_space_model(&self) -> Result<Fitted> {
        let expand = |m: &LinearModel| -> Result<LinearModel> {
            let coef: Array1<f64> = self
                .parcellation
                .labels()
                .iter()
                .map(|&l| m.coef()[l] / self.parcellation.sizes()[l] as f64)
                .collect();
            LinearModel::from_parts(coef.view(), m.intercept())
        };
        match &self.parcel_model {
            Fitted::Regressor(m) => Ok(Fitted::Regressor(expand(m)?)),
            Fitted::Classifier(c) => {
                let models = c.models().iter().map(expand).collect::<Result<Vec<_>>>()?;
                Ok(Fitted::Classifier(crate::estimators::LinearClassifier::new(
                    c.classes().to_vec(),
                    models,
                )?))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct CutPrediction {
    pub predictions: Target,
    pub score: f64,
    pub model: CutModel,
}

/// Fits on the chosen parcellation of `train` and scores on `test`.
pub fn predict_with_cut<E: Estimator + ?Sized>(
    trace: &CutTrace,
    train: &Dataset,
    test: &Dataset,
    estimator: &E,
    score: Score,
) -> Result<CutPrediction> {
    if train.n_features() != test.n_features() {
        return Err(Error::invalid(format!(
            "train has {} features, test has {}",
            train.n_features(),
            test.n_features()
        )));
    }
    let model = CutModel::fit(trace.chosen_parcellation().clone(), train, estimator)?;
    let predictions = model.predict(test.x().view())?;
    let score = score.evaluate(test.y(), &predictions)?;
    Ok(CutPrediction {
        predictions,
        score,
        model,
    })
}

/// Whole pipeline as an estimator: Ward tree on the training features, cut,
/// model selection and a final fit on the chosen parcellation. The fitted
/// model is expressed over the original features.
pub struct SupervisedClustering<E> {
    pub graph: ConnectivityGraph,
    pub method: CutMethod,
    pub config: CutConfig,
    pub estimator: E,
}

/// Everything produced by one [`SupervisedClustering`] fit.
pub struct ClusteringFit {
    pub tree: Dendrogram,
    pub trace: CutTrace,
    pub model: CutModel,
}

impl<E: Estimator> SupervisedClustering<E> {
    pub fn fit_full(&self, train: &Dataset) -> Result<ClusteringFit> {
        let tree = ward_build(train.x().view(), &self.graph)?;
        let trace = match self.method {
            CutMethod::Supervised => supervised_cut(train, &tree, &self.estimator, &self.config)?,
            CutMethod::Unsupervised => unsupervised_cut_select(train, &tree, &self.estimator, &self.config)?,
        };
        let model = CutModel::fit(trace.chosen_parcellation().clone(), train, &self.estimator)?;
        Ok(ClusteringFit { tree, trace, model })
    }
}

impl<E: Estimator> Estimator for SupervisedClustering<E> {
    fn name(&self) -> String {
        let tag = match self.method {
            CutMethod::Supervised => "sc",
            CutMethod::Unsupervised => "uc",
        };
        format!("{tag}+{}", self.estimator.name())
    }

    fn task(&self) -> crate::dataset::Task {
        self.estimator.task()
    }

    fn fit(&self, x: ArrayView2<f64>, y: &Target) -> Result<Fitted> {
        self.fit_grouped(x, y, None)
    }

    fn fit_grouped(&self, x: ArrayView2<f64>, y: &Target, groups: Option<&[i64]>) -> Result<Fitted> {
        let mut train = Dataset::new(x.to_owned(), y.clone(), None)?;
        if let Some(g) = groups {
            train = train.with_groups(g.to_vec())?;
        }
        self.fit_full(&train)?.model.feature_space_model()
    }
}

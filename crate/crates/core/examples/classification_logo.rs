//! Classification with grouped samples: linear SVC, ANOVA screening in front
//! of it, and a supervised cut, all scored by leave-one-group-out accuracy.
//!
//! cargo run --release --example classification_logo

use agd::cut::{CutConfig, CutMethod, SupervisedClustering};
use agd::estimators::{AnovaPipeline, LinearSvc, LinearSvcCv};
use agd::evaluation::{cross_val_score, FoldScheme, Score};
use agd::rng::stream_rng;
use agd::{build_connectivity, Adjacency, Dataset, Target, VoxelGrid};
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> agd::Result<()> {
    // 6 groups of 12 images on a 10x10 plane; class 1 lights up a 3x3 patch
    let grid = VoxelGrid::full([10, 10, 1])?;
    let graph = build_connectivity(&grid, Adjacency::Face6)?;
    let (n, p) = (72, grid.n_features());
    let mut rng = stream_rng(11, "cls-example", 0);
    let labels: Vec<i64> = (0..n).map(|_| i64::from(rng.random_bool(0.5))).collect();
    let groups: Vec<i64> = (0..n as i64).map(|i| i / 12).collect();
    let x = Array2::from_shape_fn((n, p), |(i, v)| {
        let [cx, cy, _] = grid.coords(v);
        let active = (3..6).contains(&cx) && (3..6).contains(&cy) && labels[i] == 1;
        let noise: f64 = StandardNormal.sample(&mut rng);
        noise + if active { 0.8 } else { 0.0 }
    });
    let data = Dataset::new(x, Target::Labels(labels), Some(groups))?;
    let logo = FoldScheme::leave_one_group_out();

    let svc = LinearSvc::default();
    let svc_cv = LinearSvcCv::new(logo);
    let anova = AnovaPipeline::new(LinearSvc::default(), logo);
    let sc = SupervisedClustering {
        graph,
        method: CutMethod::Supervised,
        config: CutConfig {
            max_steps: 20,
            ..CutConfig::grouped_default(Score::Accuracy)
        },
        estimator: LinearSvc::default(),
    };

    let run = |name: &str, est: &dyn agd::estimators::Estimator| -> agd::Result<()> {
        let cv = cross_val_score(est, data.x().view(), data.y(), data.groups(), &logo, Score::Accuracy)?;
        let folds: Vec<String> = cv.per_fold.iter().map(|s| format!("{:.0}", 100.0 * s)).collect();
        println!("{name:12} {:5.1}%   per group: {}", 100.0 * cv.mean, folds.join(" "));
        Ok(())
    };
    run("svc", &svc)?;
    run("svc (cv C)", &svc_cv)?;
    run("anova+svc", &anova)?;
    run("sc+svc", &sc)?;
    Ok(())
}

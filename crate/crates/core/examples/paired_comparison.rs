//! Two estimators on identical folds, summarised and compared with a paired
//! t-test, the way `agd compare` tabulates run reports.
//!
//! cargo run --release --example paired_comparison

use agd::estimators::{BayesianRidge, ElasticNetCv};
use agd::evaluation::{cross_val_score, paired_t_test, summarize, FoldScheme, Score};
use agd::simulation::{simulate_1d, Sim1dSpec};

fn main() -> agd::Result<()> {
    let sim = simulate_1d(&Sim1dSpec::with_seed(2))?;
    let data = &sim.dataset;
    let folds = FoldScheme::kfold(10, 2);
    let brr = cross_val_score(
        &BayesianRidge::default(),
        data.x().view(),
        data.y(),
        None,
        &folds,
        Score::ExplainedVariance,
    )?;
    let enet = ElasticNetCv::new(FoldScheme::kfold(4, 3));
    let enet = cross_val_score(&enet, data.x().view(), data.y(), None, &folds, Score::ExplainedVariance)?;

    println!("method  mean    std     max     min");
    for (name, cv) in [("brr", &brr), ("enet", &enet)] {
        let s = summarize(&cv.per_fold)?;
        println!("{name:6} {:.4}  {:.4}  {:.4}  {:.4}", s.mean, s.std, s.max, s.min);
    }
    let test = paired_t_test(&enet.per_fold, &brr.per_fold)?;
    println!(
        "\nenet vs brr: t = {:.3}, df = {}, p = {:.4}",
        test.t, test.df, test.p_value
    );
    Ok(())
}

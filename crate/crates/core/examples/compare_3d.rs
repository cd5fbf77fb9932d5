//! Supervised against unsupervised cut on the smoothed 3D simulation
//! (100 training and 100 test images, 5 dB). Prints test explained variance
//! and the share of absolute weight that falls on the true ROIs.
//!
//! cargo run --release --example compare_3d -- [first_seed] [n_seeds]

use agd::cut::{predict_with_cut, supervised_cut, unsupervised_cut_select, CutConfig, CutTrace};
use agd::estimators::BayesianRidge;
use agd::evaluation::Score;
use agd::simulation::{simulate_3d, Sim3dSpec};
use agd::{build_connectivity, ward_build, Adjacency, Dataset, Dendrogram, VoxelGrid};

fn evaluate(
    trace: &CutTrace,
    train: &Dataset,
    test: &Dataset,
    grid: &VoxelGrid,
    roi: &[usize],
) -> agd::Result<(f64, f64)> {
    let brr = BayesianRidge::default();
    let result = predict_with_cut(trace, train, test, &brr, Score::ExplainedVariance)?;
    let w = result.model.weight_map(grid)?;
    let total: f64 = w.values().iter().map(|v| v.abs()).sum();
    let on_roi: f64 = roi.iter().map(|&v| w.values()[v].abs()).sum();
    Ok((result.score, if total > 0.0 { on_roi / total } else { 0.0 }))
}

fn main() -> agd::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let first = args.first().copied().unwrap_or(0);
    let count = args.get(1).copied().unwrap_or(1);
    println!("seed  sc_zeta  uc_zeta  sc_overlap  uc_overlap  sc_parcels  uc_parcels");
    for seed in first..first + count {
        let spec = Sim3dSpec::with_seed(seed);
        let sim = simulate_3d(&spec)?;
        let grid = spec.grid()?;
        let graph = build_connectivity(&grid, Adjacency::Face6)?;
        let tree: Dendrogram = ward_build(sim.train.x().view(), &graph)?;
        let config = CutConfig::simulation_default(seed, Score::ExplainedVariance);
        let brr = BayesianRidge::default();
        let sc = supervised_cut(&sim.train, &tree, &brr, &config)?;
        let uc = unsupervised_cut_select(&sim.train, &tree, &brr, &config)?;
        let roi = spec.roi_features();
        let (sz, so) = evaluate(&sc, &sim.train, &sim.test, &grid, &roi)?;
        let (uz, uo) = evaluate(&uc, &sim.train, &sim.test, &grid, &roi)?;
        println!(
            "{seed:4}  {sz:7.3}  {uz:7.3}  {so:10.3}  {uo:10.3}  {:10}  {:10}",
            sc.chosen_parcellation().n_parcels(),
            uc.chosen_parcellation().n_parcels()
        );
    }
    Ok(())
}

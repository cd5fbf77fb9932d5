//! Searchlight score map on the smoothed 3D simulation: each voxel gets the
//! cross-validated explained variance of a ridge model on its sphere.
//! Writes the map as CSV next to the printout when given a path.
//!
//! cargo run --release --example searchlight_map -- [seed] [out.csv]

use agd::estimators::BayesianRidge;
use agd::evaluation::{FoldScheme, Score};
use agd::searchlight::{searchlight_map, SearchlightSpec};
use agd::simulation::{simulate_3d, Sim3dSpec};

fn main() -> agd::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let spec = Sim3dSpec::with_seed(seed);
    let sim = simulate_3d(&spec)?;
    let grid = spec.grid()?;
    let roi = spec.roi_features();

    let sl_spec = SearchlightSpec {
        radius: 2.0,
        cv: FoldScheme::kfold(4, seed),
        score: Score::ExplainedVariance,
    };
    let result = searchlight_map(&sim.train, &grid, &sl_spec, &BayesianRidge::default())?;
    let values = result.map.values();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    println!("{} voxels, {} missing", values.len(), result.missing.len());
    println!("top 10 voxels:");
    for &v in order.iter().take(10) {
        let tag = if roi.contains(&v) { "roi" } else { "" };
        println!("  {:?} {:.3} {tag}", grid.coords(v), values[v]);
    }
    let k = values.len() / 20;
    let hits = order[..k].iter().filter(|v| roi.contains(v)).count();
    println!("top 5% ({k} voxels): {hits} inside the ROIs");

    if let Some(path) = args.next() {
        let file = std::fs::File::create(&path)?;
        result.map.write_csv(std::io::BufWriter::new(file))?;
        println!("map written to {path}");
    }
    Ok(())
}

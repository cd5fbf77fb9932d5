//! Connectivity-constrained Ward tree on a small 2D grid with two smooth
//! blobs, cut into its main branches, then reduced to parcel averages.
//!
//! cargo run --example ward_tree

use agd::rng::stream_rng;
use agd::{
    backproject_weights, build_connectivity, main_branches_cut, parcel_averages, ward_build, Adjacency, VoxelGrid,
};
use ndarray::{Array1, Array2};
use rand_distr::{Distribution, StandardNormal};

fn main() -> agd::Result<()> {
    let (w, h, n) = (8, 6, 40);
    let grid = VoxelGrid::full([w, h, 1])?;
    let graph = build_connectivity(&grid, Adjacency::Face6)?;
    let mut rng = stream_rng(1, "ward-example", 0);

    // two latent sources, left and right halves, plus pixel noise
    let mut x = Array2::zeros((n, grid.n_features()));
    for i in 0..n {
        let left: f64 = StandardNormal.sample(&mut rng);
        let right: f64 = StandardNormal.sample(&mut rng);
        for v in 0..grid.n_features() {
            let [cx, _, _] = grid.coords(v);
            let noise: f64 = StandardNormal.sample(&mut rng);
            x[[i, v]] = if cx < w / 2 { left } else { right } + 0.3 * noise;
        }
    }

    let tree = ward_build(x.view(), &graph)?;
    let last = tree.merges().last().expect("at least one merge");
    println!(
        "{} merges, root joins {:?} at cost {:.2}",
        tree.merges().len(),
        last.children,
        last.cost
    );

    for k in [2, 4] {
        let parc = main_branches_cut(&tree, k)?;
        println!("\n{k} main branches:");
        for row in 0..h {
            let line: String = (0..w)
                .map(|col| {
                    let v = grid.feature_at(col, row, 0).unwrap();
                    char::from(b'a' + parc.labels()[v] as u8)
                })
                .collect();
            println!("  {line}");
        }
    }

    let parc = main_branches_cut(&tree, 2)?;
    let reduced = parcel_averages(x.view(), &parc)?;
    println!("\nreduced design: {} x {}", reduced.nrows(), reduced.ncols());
    let map = backproject_weights(Array1::from(vec![1.0, -1.0]).view(), &parc, &grid)?;
    println!(
        "back-projected weight of feature 0: {:.4} (parcel size {})",
        map.values()[0],
        parc.sizes()[parc.labels()[0]]
    );
    Ok(())
}

//! Elastic net with both penalties picked by internal 4-fold cross-validation.
//! Prints the best grid points and the sparsity of the final model.
//!
//! cargo run --example elastic_net_grid

use agd::estimators::{enet_fit, ElasticNetCv};
use agd::evaluation::FoldScheme;
use agd::rng::stream_rng;
use agd::Target;
use ndarray::{Array1, Array2};
use rand_distr::{Distribution, StandardNormal};

fn main() -> agd::Result<()> {
    let (n, p) = (100, 60);
    let mut rng = stream_rng(5, "enet-example", 0);
    let x: Array2<f64> = Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng));
    let truth = Array1::from_shape_fn(p, |j| if j % 15 == 0 { 1.5 } else { 0.0 });
    let y = x.dot(&truth) + Array1::from_shape_fn(n, |_| Distribution::<f64>::sample(&StandardNormal, &mut rng));

    let cv = ElasticNetCv::new(FoldScheme::kfold(4, 5));
    let (points, best) = cv.search(x.view(), &Target::Continuous(y.clone()))?;
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[b].score.total_cmp(&points[a].score));
    println!("{} grid points; best five:", points.len());
    for &i in order.iter().take(5) {
        let params: Vec<String> = points[i].params.iter().map(|(k, v)| format!("{k}={v:.3}")).collect();
        println!("  {:.4}  {}", points[i].score, params.join(" "));
    }

    let get = |name: &str| {
        points[best]
            .params
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| *v)
            .unwrap()
    };
    let model = enet_fit(x.view(), y.view(), get("l1"), get("l2"))?;
    let nonzero: Vec<usize> = (0..p).filter(|&j| model.coef()[j] != 0.0).collect();
    println!("\nchosen model keeps {} of {p} features: {nonzero:?}", nonzero.len());
    Ok(())
}

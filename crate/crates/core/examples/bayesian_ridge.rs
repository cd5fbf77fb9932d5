//! Bayesian ridge regression with evidence-maximised precisions on a sparse
//! linear problem. Prints the learned noise and weight precisions, the
//! effective number of parameters, and the recovered coefficients.
//!
//! cargo run --example bayesian_ridge

use agd::estimators::{brr_fit, BrrConfig};
use agd::rng::stream_rng;
use ndarray::{Array1, Array2};
use rand_distr::{Distribution, StandardNormal};

fn main() -> agd::Result<()> {
    let (n, d) = (80, 10);
    let mut rng = stream_rng(3, "brr-example", 0);
    let x: Array2<f64> = Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng));
    let truth = Array1::from_shape_fn(d, |j| if j < 3 { 2.0 - j as f64 } else { 0.0 });
    let noise = Array1::from_shape_fn(n, |_| 0.5 * Distribution::<f64>::sample(&StandardNormal, &mut rng));
    let y = x.dot(&truth) + 4.0 + noise;

    let fit = brr_fit(x.view(), y.view(), &BrrConfig::default())?;
    println!("noise precision alpha  = {:.3} (true {:.3})", fit.alpha, 1.0 / 0.25);
    println!("weight precision lambda = {:.3}", fit.lambda);
    println!("effective parameters    = {:.2} of {}", fit.gamma_eff, d + 1);
    println!("iterations {} converged {}", fit.iterations, fit.converged);
    println!("\n feature   true  posterior mean  posterior sd");
    for j in 0..d {
        println!(
            "{j:8} {:6.2} {:15.3} {:13.3}",
            truth[j],
            fit.mu[j],
            fit.sigma[[j, j]].sqrt()
        );
    }
    println!("intercept        {:15.3}", fit.mu[d]);
    Ok(())
}

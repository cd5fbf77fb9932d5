//! Generates the 1D block and the smoothed 3D simulations, reports the
//! realised signal-to-noise ratio, and round-trips the data through CSV and
//! raw files in a scratch directory.
//!
//! cargo run --release --example simulate_and_export -- [seed]

use agd::simulation::{realized_snr_db, simulate_1d, simulate_images, Sim1dSpec, Sim3dSpec};
use agd::{DataFormat, Dataset};

fn main() -> agd::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);

    let one = simulate_1d(&Sim1dSpec::with_seed(seed))?;
    let active = one.weights.iter().filter(|w| **w != 0.0).count();
    println!(
        "1d: {} x {}, {active} informative features",
        one.dataset.n_samples(),
        one.dataset.n_features()
    );

    let spec = Sim3dSpec::with_seed(seed);
    let images = simulate_images(&spec, "train")?;
    let y = images.dataset.y().as_continuous()?.clone();
    println!(
        "3d: {} x {}, noise sd {:.4}, realised snr {:.2} dB, {} active ROI voxels per image",
        images.dataset.n_samples(),
        images.dataset.n_features(),
        images.noise_std,
        realized_snr_db(&images.noiseless, &y),
        images.supports[0].len()
    );

    let dir = std::env::temp_dir().join(format!("agd-export-{seed}"));
    std::fs::create_dir_all(&dir)?;
    for (name, format) in [("train.csv", DataFormat::Csv), ("train.bin", DataFormat::RawF64)] {
        let path = dir.join(name);
        images.dataset.save(&path, format)?;
        let back = Dataset::load(&path, format)?;
        let bytes = std::fs::metadata(&path)?.len();
        println!(
            "{}: {bytes} bytes, round trip exact: {}",
            path.display(),
            back == images.dataset
        );
    }
    Ok(())
}

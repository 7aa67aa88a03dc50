//! Fit the unweighted posterior by adaptive random-walk Metropolis and
//! inspect diagnostics, posterior means, and the in-sample mode.
//!
//! ```bash
//! cargo run --release --example fit_posterior
//! ```

use dpsynth::data::ConfidentialDataset;
use dpsynth::mechanisms::WeightVector;
use dpsynth::model::{predictive_sample, BetaParams};
use dpsynth::sampler::{fit, map_point, McmcConfig};
use dpsynth::seed::rng_from;

fn main() -> dpsynth::Result<()> {
    let generator = BetaParams::from_shapes(0.5, 3.0)?;
    let values = predictive_sample(&generator, 2000, &mut rng_from(7))?.into_values();
    let data = ConfidentialDataset::from_values(values)?;

    let config = McmcConfig::with_seed(1);
    let draws = fit(&data, &WeightVector::unit(data.len()), None, &config)?;

    let s = draws.n_draws();
    let mean = |j: usize| (0..s).map(|i| draws.draw(i)[j]).sum::<f64>() / s as f64;
    println!(
        "retained {s} draws over {} chains",
        draws.diagnostics.n_chains
    );
    println!(
        "acceptance rate {:.3}, split R-hat {:?}",
        draws.diagnostics.accept_rate, draws.diagnostics.rhat
    );
    println!(
        "posterior means: phi = {:.4} (truth {:.4}), lambda = {:.3} (truth 3.5)",
        mean(0),
        generator.phi,
        mean(1)
    );

    let mode = map_point(&draws)?;
    println!(
        "highest-density retained draw: phi = {:.4}, lambda = {:.3}",
        mode[0], mode[1]
    );
    Ok(())
}

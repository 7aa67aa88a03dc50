//! The risk-based weight pipeline: compute per-record weights from an
//! unweighted fit, scale them, and apply the epsilon truncation rule.
//!
//! ```bash
//! cargo run --release --example weight_pipeline
//! ```

use dpsynth::data::ConfidentialDataset;
use dpsynth::mechanisms::{
    compute_weights, scale_weights, truncate_weights_e, PrivacySpec, WeightVector,
};
use dpsynth::model::{predictive_sample, BetaParams};
use dpsynth::sampler::{fit, McmcConfig};
use dpsynth::seed::rng_from;

fn main() -> dpsynth::Result<()> {
    let generator = BetaParams::from_shapes(0.5, 3.0)?;
    let values = predictive_sample(&generator, 1000, &mut rng_from(3))?.into_values();
    let data = ConfidentialDataset::from_values(values)?;

    // Step 1: unweighted fit provides per-record risks.
    let uw = fit(
        &data,
        &WeightVector::unit(data.len()),
        None,
        &McmcConfig::with_seed(5),
    )?;

    // Step 2: weights inversely proportional to risk, bulk kept at one.
    let weights = compute_weights(&uw)?;
    let summary = weights.summary();
    println!(
        "risk-based weights: min {:.3}, median {:.3}, mean {:.3}, max {:.0}",
        summary.min, summary.median, summary.mean, summary.max
    );
    let full = weights.alphas().iter().filter(|a| **a == 1.0).count();
    println!("records keeping full weight: {full}/{}", weights.len());

    // Step 3: optional scaling toward a tighter target.
    let spec = PrivacySpec::new(4.0, 0.8, 0.0)?;
    let (scaled, clipped) = scale_weights(&weights, &spec);
    println!(
        "after c1 = 0.8 scaling: mean weight {:.3} ({clipped} clipped)",
        scaled.summary().mean
    );

    // Step 4: the weighted-e rule zeroes records whose weighted
    // contribution under the pseudo fit exceeds eps/2.
    let pseudo = fit(&data, &scaled, None, &McmcConfig::with_seed(6))?;
    for eps in [5.0, 4.0, 3.0] {
        let spec = PrivacySpec::new(eps, 0.8, 0.0)?;
        let (_, truncated) = truncate_weights_e(&scaled, &pseudo, &spec)?;
        println!("epsilon {eps}: {truncated} records truncated to zero weight");
    }
    Ok(())
}

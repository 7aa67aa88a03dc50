//! The Laplace-perturbed histogram synthesizer: bin, noise, clip,
//! normalize, resample.
//!
//! ```bash
//! cargo run --release --example perturbed_histogram
//! ```

use dpsynth::data::ConfidentialDataset;
use dpsynth::mechanisms::{default_bins, perturbed_histogram};
use dpsynth::model::{predictive_sample, BetaParams};
use dpsynth::seed::rng_from;
use dpsynth::utility::UtilityReport;

fn main() -> dpsynth::Result<()> {
    let generator = BetaParams::from_shapes(0.5, 3.0)?;
    let values = predictive_sample(&generator, 2000, &mut rng_from(8))?.into_values();
    let data = ConfidentialDataset::from_values(values)?;

    let bins = default_bins(data.len());
    println!(
        "n = {}, default bin rule gives {bins} bins of width {:.4}",
        data.len(),
        1.0 / bins as f64
    );

    for eps in [5.0, 3.0, 1.0, f64::INFINITY] {
        let release = perturbed_histogram(&data, 1.0, bins, eps, &mut rng_from(31))?;
        let report = UtilityReport::compute(data.values(), release.synthetic.values())?;
        println!(
            "epsilon {:>8}: noise scale {:.3}, ecdf_max = {:.4}, ecdf_avg_sq = {:.6}{}",
            if eps.is_finite() {
                format!("{eps}")
            } else {
                "infinite".into()
            },
            if eps.is_finite() { 2.0 / eps } else { 0.0 },
            report.ecdf_max,
            report.ecdf_avg_sq,
            if release.fallback_uniform {
                " (uniform fallback)"
            } else {
                ""
            },
        );
    }
    Ok(())
}

//! ECDF distances and point statistics between a confidential dataset and
//! synthetic candidates.
//!
//! ```bash
//! cargo run --release --example utility_metrics
//! ```

use dpsynth::model::{predictive_sample, BetaParams};
use dpsynth::seed::rng_from;
use dpsynth::utility::{ecdf_distances, point_statistics, UtilityReport};

fn main() -> dpsynth::Result<()> {
    let confidential =
        predictive_sample(&BetaParams::from_shapes(0.5, 3.0)?, 2000, &mut rng_from(1))?
            .into_values();

    // Candidates: a fresh sample from the truth, a mildly wrong model, and
    // a uniform release.
    let candidates = [
        ("same distribution", BetaParams::from_shapes(0.5, 3.0)?),
        ("wrong precision", BetaParams::from_shapes(1.0, 6.0)?),
        ("uniform", BetaParams::from_shapes(1.0, 1.0)?),
    ];
    for (label, params) in candidates {
        let synthetic = predictive_sample(&params, 2000, &mut rng_from(2))?.into_values();
        let (max, avg_sq) = ecdf_distances(&confidential, &synthetic)?;
        println!("{label:<18} ecdf_max = {max:.4}, ecdf_avg_sq = {avg_sq:.6}");
    }

    // The full report bundles distances with mean/quantile comparisons.
    let synthetic = predictive_sample(&BetaParams::from_shapes(0.5, 3.0)?, 2000, &mut rng_from(3))?
        .into_values();
    let report = UtilityReport::compute(&confidential, &synthetic)?;
    println!(
        "\nsynthetic    mean {:.4} median {:.4} q15 {:.4} q90 {:.4}",
        report.synthetic.mean, report.synthetic.median, report.synthetic.q15, report.synthetic.q90
    );
    println!(
        "confidential mean {:.4} median {:.4} q15 {:.4} q90 {:.4}",
        report.confidential.mean,
        report.confidential.median,
        report.confidential.q15,
        report.confidential.q90
    );

    let stats = point_statistics(&confidential, &[0.0, 0.25, 0.75, 1.0])?;
    println!(
        "\ncustom quantiles of the confidential data: {:?}",
        stats.quantiles
    );
    Ok(())
}

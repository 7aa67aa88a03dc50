//! A small Monte Carlo comparison of all six mechanisms across privacy
//! targets, with the per-group summary table the harness exports.
//!
//! The full desk-scale study is `SimulationPlan::desk_scale(seed)`; this
//! example shrinks it so it finishes in seconds.
//!
//! ```bash
//! cargo run --release --example monte_carlo_study
//! ```

use dpsynth::harness::{run_plan, summarize, SimulationPlan};
use dpsynth::sampler::McmcConfig;

fn main() -> dpsynth::Result<()> {
    let plan = SimulationPlan {
        replicates: 8,
        n: 300,
        mcmc: McmcConfig {
            n_warmup: 2000,
            n_retain: 2000,
            ..McmcConfig::default()
        },
        ..SimulationPlan::desk_scale(2024)
    };
    let outcome = run_plan(&plan)?;
    println!(
        "{} mechanism runs, {} posterior fits\n",
        outcome.table.rows().len(),
        outcome.fit_count
    );

    let summary = summarize(&outcome.table, &["mechanism", "epsilon"])?;
    println!(
        "{:<12} {:>4} {:>10} {:>10} {:>10} {:>10}",
        "mechanism", "eps", "delta", "eps_impl", "ecdf_max", "censored"
    );
    for eps in &[5.0, 4.0, 3.0] {
        for mech in [
            "unweighted",
            "weighted",
            "weighted-e",
            "censor-w",
            "censor-uw",
            "ph",
        ] {
            let find = |col: &str| {
                summary
                    .iter()
                    .find(|r| {
                        r.column == col && r.group[0].1 == mech && r.group[1].1 == format!("{eps}")
                    })
                    .map(|r| r.mean)
            };
            println!(
                "{mech:<12} {eps:>4} {:>10} {:>10} {:>10} {:>10}",
                find("delta_local").map_or("-".into(), |v| format!("{v:.3}")),
                find("epsilon_implied").map_or("-".into(), |v| format!("{v:.3}")),
                find("ecdf_max").map_or("-".into(), |v| format!("{v:.4}")),
                find("censoring_count").map_or("-".into(), |v| format!("{v:.1}")),
            );
        }
        println!();
    }
    println!("(means over {} replicates per cell)", plan.replicates);
    Ok(())
}

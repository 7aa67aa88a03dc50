//! Weight downscaling: shrinking every weight by c1 < 1 lowers and
//! concentrates the Lipschitz bounds, and reduces how often the censoring
//! and truncation rules fire at a fixed target.
//!
//! ```bash
//! cargo run --release --example downscaling
//! ```

use dpsynth::harness::{run_plan, SimulationPlan};
use dpsynth::mechanisms::MechanismKind;

fn main() -> dpsynth::Result<()> {
    let base = SimulationPlan {
        replicates: 10,
        n: 400,
        epsilons: vec![4.0],
        mechanisms: vec![
            MechanismKind::Weighted,
            MechanismKind::WeightedE,
            MechanismKind::CensorW,
        ],
        ..SimulationPlan::desk_scale(64)
    };
    let down = SimulationPlan {
        c1: 0.8,
        ..base.clone()
    };

    let rb = run_plan(&base)?.table.export_rows();
    let rd = run_plan(&down)?.table.export_rows();

    println!(
        "epsilon 4, {} replicates, c1 = 1.0 vs c1 = 0.8\n",
        base.replicates
    );
    println!(
        "{:<12} {:>16} {:>16} {:>20}",
        "mechanism", "mean delta", "mean ecdf_avg", "mean invocations"
    );
    for mech in [
        MechanismKind::Weighted,
        MechanismKind::WeightedE,
        MechanismKind::CensorW,
    ] {
        let pick = |rows: &[dpsynth::harness::ResultRow],
                    f: fn(&dpsynth::harness::ResultRow) -> Option<f64>| {
            let v: Vec<f64> = rows
                .iter()
                .filter(|r| r.mechanism == mech)
                .filter_map(f)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let invocations = |r: &dpsynth::harness::ResultRow| {
            r.censoring_count.or(r.truncation_count).map(|c| c as f64)
        };
        println!(
            "{:<12} {:>7.3} -> {:>5.3} {:>8.5} -> {:>6.5} {:>10.1} -> {:>7.1}",
            mech.to_string(),
            pick(&rb, |r| r.delta_local),
            pick(&rd, |r| r.delta_local),
            pick(&rb, |r| r.ecdf_avg_sq),
            pick(&rd, |r| r.ecdf_avg_sq),
            pick(&rb, invocations),
            pick(&rd, invocations),
        );
    }
    println!("\n(weighted rows have no invocation rule; its column shows NaN)");
    Ok(())
}

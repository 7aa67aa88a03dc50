//! Command-line front end: data simulation, single-mechanism synthesis,
//! utility evaluation, and full Monte Carlo plans. The binary in `main.rs`
//! only parses arguments and maps errors to exit codes; everything here is
//! ordinary library code.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::data;
use crate::error::{Error, Result};
use crate::harness::{self, SimulationPlan};
use crate::mechanisms::{run_mechanism, MechanismKind, PhConfig, PrivacySpec};
use crate::model::BetaParams;
use crate::sampler::McmcConfig;
use crate::seed;
use crate::utility::UtilityReport;

/// Worker-count override for `montecarlo`, e.g. `DPSYNTH_THREADS=4`.
pub const THREADS_ENV: &str = "DPSYNTH_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "dpsynth",
    version,
    about = "Differentially private Bayesian data synthesis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a confidential dataset from a beta distribution
    Simulate(SimulateArgs),
    /// Release synthetic data through one mechanism
    Synthesize(SynthesizeArgs),
    /// Compare a synthetic dataset against its confidential source
    Evaluate(EvaluateArgs),
    /// Run a Monte Carlo study over mechanisms and privacy targets
    Montecarlo(MontecarloArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// First beta shape parameter
    #[arg(long, default_value_t = 0.5)]
    pub a: f64,
    /// Second beta shape parameter
    #[arg(long, default_value_t = 3.0)]
    pub b: f64,
    /// Number of records
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path (single `value` column)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    /// Input CSV with a `value` column (extra columns become covariates)
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = parse_mechanism)]
    pub mechanism: MechanismKind,
    /// Privacy target
    #[arg(long)]
    pub epsilon: f64,
    /// Weight scale factor
    #[arg(long, default_value_t = 1.0)]
    pub c1: f64,
    /// Weight shift
    #[arg(long, default_value_t = 0.0)]
    pub c2: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Histogram bins for the ph mechanism (default: round(ln n))
    #[arg(long)]
    pub bins: Option<usize>,
    /// Declared data range bound for the ph mechanism
    #[arg(long, default_value_t = 1.0)]
    pub range: f64,
    #[command(flatten)]
    pub mcmc: McmcArgs,
    /// Output directory (synthetic.csv + audit.json)
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct McmcArgs {
    #[arg(long, default_value_t = 5000)]
    pub warmup: usize,
    #[arg(long, default_value_t = 5000)]
    pub retain: usize,
    #[arg(long, default_value_t = 2)]
    pub chains: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
}

impl McmcArgs {
    fn to_config(&self, seed: u64) -> McmcConfig {
        McmcConfig {
            n_warmup: self.warmup,
            n_retain: self.retain,
            n_chains: self.chains,
            thin: self.thin,
            seed,
            ..McmcConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub confidential: PathBuf,
    #[arg(long)]
    pub synthetic: PathBuf,
    /// Output report path
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct MontecarloArgs {
    /// Plan file (JSON); flags below override nothing when given
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Replicate count
    #[arg(long, default_value_t = 20)]
    pub replicates: usize,
    /// Records per replicate
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    /// Privacy targets (repeatable or comma separated)
    #[arg(long = "epsilon", value_delimiter = ',', default_values_t = vec![5.0, 4.0, 3.0])]
    pub epsilons: Vec<f64>,
    /// Mechanisms to run (default: all six)
    #[arg(long = "mechanism", value_parser = parse_mechanism, value_delimiter = ',')]
    pub mechanisms: Vec<MechanismKind>,
    #[arg(long, default_value_t = 1.0)]
    pub c1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub c2: f64,
    /// Generator shapes
    #[arg(long, default_value_t = 0.5)]
    pub a: f64,
    #[arg(long, default_value_t = 3.0)]
    pub b: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Expand to the full study scale (R=100, n=2000)
    #[arg(long, default_value_t = false)]
    pub paper_scale: bool,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub range: f64,
    #[command(flatten)]
    pub mcmc: McmcArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn parse_mechanism(s: &str) -> std::result::Result<MechanismKind, String> {
    s.parse::<MechanismKind>().map_err(|e| e.to_string())
}

/// Serialize as JSON with every float written at 17 significant digits.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    struct SigDigits;
    impl serde_json::ser::Formatter for SigDigits {
        fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
        where
            W: ?Sized + std::io::Write,
        {
            write!(writer, "{value:.16e}")
        }
    }
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigits);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits utf8"))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|source| Error::WriteFile {
                path: parent.to_path_buf(),
                source,
            })?;
        }
    }
    std::fs::write(path, text).map_err(|source| Error::WriteFile {
        path: path.to_path_buf(),
        source,
    })
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Synthesize(args) => cmd_synthesize(&args),
        Command::Evaluate(args) => cmd_evaluate(&args),
        Command::Montecarlo(args) => cmd_montecarlo(&args),
    }
}

/// Write `n` seeded beta draws as a single-column CSV.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    if args.n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    let params = BetaParams::from_shapes(args.a, args.b)?;
    let sample = crate::model::predictive_sample(&params, args.n, &mut seed::rng_from(args.seed))?;
    data::write_values_csv(&args.out, sample.values())?;
    println!(
        "wrote {} Beta({}, {}) draws to {}",
        args.n,
        args.a,
        args.b,
        args.out.display()
    );
    Ok(())
}

/// Run one mechanism on an input dataset; writes `synthetic.csv` and
/// `audit.json` into the output directory.
pub fn cmd_synthesize(args: &SynthesizeArgs) -> Result<()> {
    let dataset = data::read_csv(&args.input)?;
    let spec = PrivacySpec::new(args.epsilon, args.c1, args.c2)?;
    let mcmc = args.mcmc.to_config(args.seed);
    let ph = PhConfig {
        range: args.range,
        bins: args.bins,
    };
    let run = run_mechanism(args.mechanism, &dataset, &spec, &mcmc, &ph, args.seed)?;

    std::fs::create_dir_all(&args.out_dir).map_err(|source| Error::WriteFile {
        path: args.out_dir.clone(),
        source,
    })?;
    data::write_values_csv(&args.out_dir.join("synthetic.csv"), run.synthetic.values())?;
    write_text(
        &args.out_dir.join("audit.json"),
        &to_json_string(&run.audit)?,
    )?;

    match &run.lipschitz {
        Some(lip) => println!(
            "{}: delta_local = {:.6}, epsilon_implied = {:.6} (target epsilon = {})",
            args.mechanism, lip.delta_local, lip.epsilon_implied, args.epsilon
        ),
        None => println!("{}: released (no Lipschitz accounting)", args.mechanism),
    }
    println!("wrote {}", args.out_dir.join("synthetic.csv").display());
    Ok(())
}

/// Compute the utility report for a synthetic dataset.
pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let confidential = data::read_csv(&args.confidential)?;
    let synthetic = data::read_csv(&args.synthetic)?;
    let report = UtilityReport::compute(confidential.values(), synthetic.values())?;
    let text = match args.format {
        OutputFormat::Json => to_json_string(&report)?,
        OutputFormat::Csv => format!("{}\n{}\n", UtilityReport::csv_header(), report.csv_row()),
    };
    write_text(&args.out, &text)?;
    println!(
        "ecdf_max = {:.6}, ecdf_avg_sq = {:.8}; wrote {}",
        report.ecdf_max,
        report.ecdf_avg_sq,
        args.out.display()
    );
    Ok(())
}

fn plan_from_args(args: &MontecarloArgs) -> Result<SimulationPlan> {
    if let Some(path) = &args.plan {
        let text = std::fs::read_to_string(path).map_err(|source| Error::ReadFile {
            path: path.clone(),
            source,
        })?;
        let plan: SimulationPlan = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.clone(),
            message: e.to_string(),
        })?;
        return Ok(plan);
    }
    let mechanisms = if args.mechanisms.is_empty() {
        MechanismKind::ALL.to_vec()
    } else {
        args.mechanisms.clone()
    };
    let (replicates, n) = if args.paper_scale {
        (100, 2000)
    } else {
        (args.replicates, args.n)
    };
    Ok(SimulationPlan {
        replicates,
        n,
        generator: (args.a, args.b),
        epsilons: args.epsilons.clone(),
        mechanisms,
        c1: args.c1,
        c2: args.c2,
        master_seed: args.seed,
        mcmc: args.mcmc.to_config(args.seed),
        ph: PhConfig {
            range: args.range,
            bins: args.bins,
        },
        threads: None,
    })
}

fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(raw) => {
            let parsed = raw.trim().parse::<usize>().ok().filter(|t| *t > 0);
            parsed.map(Some).ok_or_else(|| {
                Error::InvalidConfig(format!("{THREADS_ENV}={raw} is not a positive integer"))
            })
        }
        Err(_) => Ok(None),
    }
}

/// Run a full plan and export `results.csv`, `summary.csv`, the resolved
/// `plan.json`, and one audit JSON per mechanism run.
pub fn cmd_montecarlo(args: &MontecarloArgs) -> Result<()> {
    let mut plan = plan_from_args(args)?;
    plan.threads = threads_from_env()?;
    let outcome = harness::run_plan(&plan)?;

    let out_dir = &args.out_dir;
    std::fs::create_dir_all(out_dir.join("audit")).map_err(|source| Error::WriteFile {
        path: out_dir.join("audit"),
        source,
    })?;

    write_text(&out_dir.join("results.csv"), &outcome.table.to_csv_string())?;
    let group_by = ["mechanism", "epsilon"];
    let summary = harness::summarize(&outcome.table, &group_by)?;
    write_text(
        &out_dir.join("summary.csv"),
        &harness::summary_csv(&summary, &group_by),
    )?;
    write_text(&out_dir.join("plan.json"), &to_json_string(&plan)?)?;
    for (label, audit) in &outcome.audits {
        write_text(
            &out_dir.join("audit").join(format!("{label}.json")),
            &to_json_string(audit)?,
        )?;
    }

    let failed = outcome
        .table
        .rows()
        .iter()
        .filter(|r| r.fit_status == harness::FitStatus::Failed)
        .count();
    println!(
        "{} mechanism runs ({} fits, {} failed); wrote {}",
        outcome.table.rows().len(),
        outcome.fit_count,
        failed,
        out_dir.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn montecarlo_args() -> MontecarloArgs {
        MontecarloArgs {
            plan: None,
            replicates: 20,
            n: 500,
            epsilons: vec![5.0, 4.0, 3.0],
            mechanisms: vec![],
            c1: 1.0,
            c2: 0.0,
            a: 0.5,
            b: 3.0,
            seed: 42,
            paper_scale: false,
            bins: None,
            range: 1.0,
            mcmc: McmcArgs {
                warmup: 5000,
                retain: 5000,
                chains: 2,
                thin: 1,
            },
            out_dir: PathBuf::from("unused"),
        }
    }

    #[test]
    fn paper_scale_flag_expands_the_plan() {
        let desk = plan_from_args(&montecarlo_args()).unwrap();
        assert_eq!((desk.replicates, desk.n), (20, 500));
        assert_eq!(desk.mechanisms.len(), 6);

        let full = plan_from_args(&MontecarloArgs {
            paper_scale: true,
            ..montecarlo_args()
        })
        .unwrap();
        assert_eq!((full.replicates, full.n), (100, 2000));
        assert_eq!(full.epsilons, vec![5.0, 4.0, 3.0]);
    }

    #[test]
    fn json_floats_carry_17_significant_digits() {
        #[derive(Serialize)]
        struct S {
            x: f64,
        }
        let text = to_json_string(&S { x: 2.5 }).unwrap();
        assert_eq!(text, r#"{"x":2.5000000000000000e0}"#);
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["x"].as_f64().unwrap(), 2.5);
    }

    #[test]
    fn json_round_trips_awkward_floats() {
        #[derive(Serialize)]
        struct S {
            x: f64,
        }
        for x in [0.1 + 0.2, 1.0 / 3.0, 1e-300, 123456.789012345678] {
            let text = to_json_string(&S { x }).unwrap();
            let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert_eq!(parsed["x"].as_f64().unwrap(), x, "{text}");
        }
    }

    #[test]
    fn mechanism_flag_parses_spec_tokens() {
        for (token, kind) in [
            ("unweighted", MechanismKind::Unweighted),
            ("weighted", MechanismKind::Weighted),
            ("weighted-e", MechanismKind::WeightedE),
            ("censor-w", MechanismKind::CensorW),
            ("censor-uw", MechanismKind::CensorUw),
            ("ph", MechanismKind::PerturbedHistogram),
        ] {
            assert_eq!(parse_mechanism(token).unwrap(), kind);
        }
        assert!(parse_mechanism("laplace").is_err());
    }
}

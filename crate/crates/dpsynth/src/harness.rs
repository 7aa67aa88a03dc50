//! Seeded Monte Carlo replication engine: simulate confidential datasets,
//! run each requested mechanism at each privacy target, and collect
//! Lipschitz bounds, invocation counts, and utility metrics into a long-
//! format results table.
//!
//! Replicates are independent jobs with seeds derived from the master seed,
//! so the table is byte-identical however many worker threads run it. The
//! unweighted and weighted fits are computed once per replicate and shared:
//! both mechanisms ignore the privacy target, and the weight pipeline feeds
//! Weighted-e and Censor_w at every epsilon.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{fmt_f64, ConfidentialDataset};
use crate::error::{Error, Result};
use crate::mechanisms::{self, AuditRecord, MechanismKind, PhConfig, PrivacySpec, WeightVector};
use crate::model::BetaParams;
use crate::sampler::{self, McmcConfig, PosteriorDraws};
use crate::seed::{self, tag};
use crate::utility::UtilityReport;

const STAGE_DATA: u64 = 0x10;
const STAGE_FIT_UW: u64 = 0x11;
const STAGE_FIT_W: u64 = 0x12;
const STAGE_FIT_FINAL: u64 = 0x13;

/// Full description of a Monte Carlo study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationPlan {
    /// Number of replicated confidential datasets.
    pub replicates: usize,
    /// Records per replicate.
    pub n: usize,
    /// Beta shape pair generating the confidential data.
    pub generator: (f64, f64),
    pub epsilons: Vec<f64>,
    pub mechanisms: Vec<MechanismKind>,
    pub c1: f64,
    pub c2: f64,
    pub master_seed: u64,
    pub mcmc: McmcConfig,
    #[serde(default)]
    pub ph: PhConfig,
    /// Worker threads; `None` uses the global pool. An execution detail,
    /// not part of the statistical configuration, so it never serializes.
    #[serde(skip_serializing, default)]
    pub threads: Option<usize>,
}

impl SimulationPlan {
    /// Desk-scale default: every directional claim of the full study at a
    /// fraction of the runtime.
    pub fn desk_scale(master_seed: u64) -> Self {
        Self {
            replicates: 20,
            n: 500,
            generator: (0.5, 3.0),
            epsilons: vec![5.0, 4.0, 3.0],
            mechanisms: MechanismKind::ALL.to_vec(),
            c1: 1.0,
            c2: 0.0,
            master_seed,
            mcmc: McmcConfig::default(),
            ph: PhConfig::default(),
            threads: None,
        }
    }

    /// Full simulation-design scale.
    pub fn paper_scale(master_seed: u64) -> Self {
        Self {
            replicates: 100,
            n: 2000,
            ..Self::desk_scale(master_seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be at least 1".into()));
        }
        if self.n < 10 {
            return Err(Error::InvalidConfig("n must be at least 10".into()));
        }
        if !(self.generator.0 > 0.0 && self.generator.1 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "generator shapes {:?} must be positive",
                self.generator
            )));
        }
        if self.epsilons.is_empty() {
            return Err(Error::InvalidConfig("at least one epsilon target".into()));
        }
        if self.mechanisms.is_empty() {
            return Err(Error::InvalidConfig("at least one mechanism".into()));
        }
        for &eps in &self.epsilons {
            PrivacySpec::new(eps, self.c1, self.c2)?;
        }
        self.mcmc.validate()?;
        Ok(())
    }

    fn spec(&self, epsilon: f64) -> PrivacySpec {
        PrivacySpec::new(epsilon, self.c1, self.c2).expect("validated plan")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitStatus {
    Ok,
    RetriedOk,
    Failed,
}

impl FitStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            FitStatus::Ok => "ok",
            FitStatus::RetriedOk => "retried-ok",
            FitStatus::Failed => "failed",
        }
    }
}

/// One attempted (replicate, mechanism, epsilon) combination. Epsilon is
/// `None` in storage for the mechanisms that ignore it; export expands
/// those rows across the plan's targets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub replicate: usize,
    pub mechanism: MechanismKind,
    pub epsilon: Option<f64>,
    pub delta_local: Option<f64>,
    pub epsilon_implied: Option<f64>,
    pub truncation_count: Option<usize>,
    pub censoring_count: Option<usize>,
    pub ecdf_max: Option<f64>,
    pub ecdf_avg_sq: Option<f64>,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub q15: Option<f64>,
    pub q90: Option<f64>,
    pub fit_status: FitStatus,
}

impl ResultRow {
    fn failed(replicate: usize, mechanism: MechanismKind, epsilon: Option<f64>) -> Self {
        Self {
            replicate,
            mechanism,
            epsilon,
            delta_local: None,
            epsilon_implied: None,
            truncation_count: None,
            censoring_count: None,
            ecdf_max: None,
            ecdf_avg_sq: None,
            mean: None,
            median: None,
            q15: None,
            q90: None,
            fit_status: FitStatus::Failed,
        }
    }
}

pub const RESULTS_HEADER: &str = "replicate,mechanism,epsilon,delta_local,epsilon_implied,\
truncation_count,censoring_count,ecdf_max,ecdf_avg_sq,mean,median,q15,q90,fit_status";

/// Long-format results with the plan's epsilon list kept for export
/// expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    rows: Vec<ResultRow>,
    epsilons: Vec<f64>,
}

impl ResultsTable {
    pub fn rows(&self) -> &[ResultRow] {
        &self.rows
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    /// One row per (replicate, mechanism, epsilon), with epsilon-independent
    /// mechanisms duplicated across targets, sorted by keys.
    pub fn export_rows(&self) -> Vec<ResultRow> {
        let mut out = Vec::new();
        for row in &self.rows {
            match row.epsilon {
                Some(_) => out.push(row.clone()),
                None => {
                    for &eps in &self.epsilons {
                        let mut expanded = row.clone();
                        expanded.epsilon = Some(eps);
                        out.push(expanded);
                    }
                }
            }
        }
        out.sort_by(|a, b| {
            (a.replicate, a.mechanism.id())
                .cmp(&(b.replicate, b.mechanism.id()))
                .then(
                    a.epsilon
                        .unwrap_or(f64::NAN)
                        .partial_cmp(&b.epsilon.unwrap_or(f64::NAN))
                        .unwrap_or(std::cmp::Ordering::Equal),
                )
        });
        out
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(RESULTS_HEADER);
        out.push('\n');
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let opt_count = |v: Option<usize>| v.map(|c| c.to_string()).unwrap_or_default();
        for row in self.export_rows() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                row.replicate,
                row.mechanism,
                opt(row.epsilon),
                opt(row.delta_local),
                opt(row.epsilon_implied),
                opt_count(row.truncation_count),
                opt_count(row.censoring_count),
                opt(row.ecdf_max),
                opt(row.ecdf_avg_sq),
                opt(row.mean),
                opt(row.median),
                opt(row.q15),
                opt(row.q90),
                row.fit_status.as_str(),
            ));
        }
        out
    }
}

/// Everything a plan run produces: the table, one audit per mechanism run,
/// and the number of posterior fits performed (for the reuse accounting).
#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub table: ResultsTable,
    /// (file stem, audit) pairs, e.g. `r003_censor-w_e4`.
    pub audits: Vec<(String, AuditRecord)>,
    pub fit_count: usize,
}

/// Run the full Monte Carlo plan. Per-run fit failures are recorded in
/// their rows, never dropped; only plan validation errors abort.
pub fn run_plan(plan: &SimulationPlan) -> Result<PlanOutcome> {
    plan.validate()?;
    let run_all = || -> Vec<Result<ReplicateOutput>> {
        (0..plan.replicates)
            .into_par_iter()
            .map(|r| run_replicate(plan, r))
            .collect()
    };
    let outputs = match plan.threads {
        None => run_all(),
        Some(k) => {
            if k == 0 {
                return Err(Error::InvalidConfig("threads must be at least 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            pool.install(run_all)
        }
    };

    let mut rows = Vec::new();
    let mut audits = Vec::new();
    let mut fit_count = 0usize;
    for output in outputs {
        let output = output?;
        rows.extend(output.rows);
        audits.extend(output.audits);
        fit_count += output.fit_count;
    }
    Ok(PlanOutcome {
        table: ResultsTable {
            rows,
            epsilons: plan.epsilons.clone(),
        },
        audits,
        fit_count,
    })
}

struct ReplicateOutput {
    rows: Vec<ResultRow>,
    audits: Vec<(String, AuditRecord)>,
    fit_count: usize,
}

/// Fit with the harness retry policy: one more attempt with doubled warmup
/// and a fresh seed offset before the run is recorded as failed.
fn fit_with_retry(
    data: &ConfidentialDataset,
    weights: &WeightVector,
    clamp: Option<f64>,
    config: &McmcConfig,
    fit_count: &mut usize,
) -> Result<(PosteriorDraws, FitStatus)> {
    *fit_count += 1;
    match sampler::fit(data, weights, clamp, config) {
        Ok(draws) => Ok((draws, FitStatus::Ok)),
        Err(Error::FitFailed(_)) => {
            let retry = McmcConfig {
                n_warmup: config.n_warmup * 2,
                seed: seed::derive(config.seed, &[tag::RETRY]),
                ..*config
            };
            let draws = sampler::fit(data, weights, clamp, &retry)?;
            Ok((draws, FitStatus::RetriedOk))
        }
        Err(other) => Err(other),
    }
}

fn eps_file_label(epsilon: f64) -> String {
    // 5.0 -> "5", 4.5 -> "4.5"
    let s = format!("{epsilon}");
    s.replace('.', "p")
}

fn run_replicate(plan: &SimulationPlan, r: usize) -> Result<ReplicateOutput> {
    let master = plan.master_seed;
    let rid = r as u64;
    let mut fit_count = 0usize;

    let gen_params = BetaParams::from_shapes(plan.generator.0, plan.generator.1)?;
    let data_seed = seed::derive(master, &[STAGE_DATA, rid]);
    let values =
        crate::model::predictive_sample(&gen_params, plan.n, &mut seed::rng_from(data_seed))?
            .into_values();
    let data = ConfidentialDataset::from_values(values)?;

    let mcmc_for = |stage_seed: u64| McmcConfig {
        seed: stage_seed,
        ..plan.mcmc
    };

    let wants = |k: MechanismKind| plan.mechanisms.contains(&k);
    let needs_uw_fit = wants(MechanismKind::Unweighted)
        || wants(MechanismKind::Weighted)
        || wants(MechanismKind::WeightedE)
        || wants(MechanismKind::CensorW);
    let needs_weight_pipeline = wants(MechanismKind::Weighted)
        || wants(MechanismKind::WeightedE)
        || wants(MechanismKind::CensorW);

    // Shared stage: the unweighted fit, computed exactly once per replicate.
    let unit = WeightVector::unit(data.len());
    let uw_fit: Option<(PosteriorDraws, FitStatus)> = if needs_uw_fit {
        match fit_with_retry(
            &data,
            &unit,
            None,
            &mcmc_for(seed::derive(master, &[STAGE_FIT_UW, rid])),
            &mut fit_count,
        ) {
            Ok(ok) => Some(ok),
            Err(Error::FitFailed(_)) => None,
            Err(other) => return Err(other),
        }
    } else {
        None
    };

    // Shared stage: risk-based weights and the weighted pseudo fit; neither
    // depends on the privacy target.
    let scale_spec = plan.spec(plan.epsilons[0]);
    let scaled_weights: Option<(WeightVector, usize)> = match (&uw_fit, needs_weight_pipeline) {
        (Some((draws, _)), true) => {
            let base = mechanisms::compute_weights(draws)?;
            Some(mechanisms::scale_weights(&base, &scale_spec))
        }
        _ => None,
    };
    let needs_w_fit = wants(MechanismKind::Weighted) || wants(MechanismKind::WeightedE);
    let w_fit: Option<(PosteriorDraws, FitStatus)> = match (&scaled_weights, needs_w_fit) {
        (Some((weights, _)), true) => match fit_with_retry(
            &data,
            weights,
            None,
            &mcmc_for(seed::derive(master, &[STAGE_FIT_W, rid])),
            &mut fit_count,
        ) {
            Ok(ok) => Some(ok),
            Err(Error::FitFailed(_)) => None,
            Err(other) => return Err(other),
        },
        _ => None,
    };

    let mut rows = Vec::new();
    let mut audits = Vec::new();

    let mut push_run = |row: ResultRow, audit: Option<AuditRecord>, label: String| {
        if let Some(a) = audit {
            audits.push((label, a));
        }
        rows.push(row);
    };

    for &kind in &plan.mechanisms {
        if kind.epsilon_dependent() {
            continue;
        }
        // Epsilon-independent mechanisms: one run stored, expanded on export.
        let synth_seed = seed::derive(master, &[rid, kind.id(), tag::SYNTH]);
        let label = format!("r{r:03}_{kind}");
        let spec = scale_spec;
        let outcome: Result<(ResultRow, AuditRecord)> = (|| {
            let (weights, draws, status, clipped) = match kind {
                MechanismKind::Unweighted => {
                    let (draws, status) = uw_fit
                        .as_ref()
                        .ok_or_else(|| Error::FitFailed("unweighted fit failed".into()))?;
                    (&unit, draws, *status, 0)
                }
                MechanismKind::Weighted => {
                    let (weights, clipped) = scaled_weights
                        .as_ref()
                        .ok_or_else(|| Error::FitFailed("weight pipeline unavailable".into()))?;
                    let (draws, status) = w_fit
                        .as_ref()
                        .ok_or_else(|| Error::FitFailed("weighted fit failed".into()))?;
                    (weights, draws, *status, *clipped)
                }
                _ => unreachable!(),
            };
            let lip = mechanisms::lipschitz_summary(draws, weights)?;
            let synthetic = mechanisms::synthesize_from(draws, &data, synth_seed)?;
            let report = UtilityReport::compute(data.values(), synthetic.values())?;
            let row = ResultRow {
                replicate: r,
                mechanism: kind,
                epsilon: None,
                delta_local: Some(lip.delta_local),
                epsilon_implied: Some(lip.epsilon_implied),
                truncation_count: None,
                censoring_count: None,
                ecdf_max: Some(report.ecdf_max),
                ecdf_avg_sq: Some(report.ecdf_avg_sq),
                mean: Some(report.synthetic.mean),
                median: Some(report.synthetic.median),
                q15: Some(report.synthetic.q15),
                q90: Some(report.synthetic.q90),
                fit_status: status,
            };
            let audit = AuditRecord {
                mechanism: kind,
                epsilon: None,
                c1: spec.c1,
                c2: spec.c2,
                seed: synth_seed,
                n_records: data.len(),
                boundary_clamped_records: data.clamped_records(),
                weight_summary: Some(weights.summary()),
                scale_clipped: clipped,
                truncation_count: None,
                censoring_count: None,
                censoring_draw_events: None,
                delta_local: Some(lip.delta_local),
                epsilon_implied: Some(lip.epsilon_implied),
                fit: Some(draws.diagnostics.clone()),
                mcmc: Some(plan.mcmc),
                ph: None,
                ph_fallback_uniform: None,
            };
            Ok((row, audit))
        })();
        match outcome {
            Ok((row, audit)) => push_run(row, Some(audit), label),
            Err(Error::FitFailed(_)) => push_run(ResultRow::failed(r, kind, None), None, label),
            Err(other) => return Err(other),
        }
    }

    for &eps in &plan.epsilons {
        let spec = plan.spec(eps);
        let eps_label = seed::epsilon_label(eps);
        for &kind in &plan.mechanisms {
            if !kind.epsilon_dependent() {
                continue;
            }
            let label = format!("r{r:03}_{kind}_e{}", eps_file_label(eps));
            let synth_seed = seed::derive(master, &[rid, kind.id(), eps_label, tag::SYNTH]);
            let fit_seed = seed::derive(master, &[STAGE_FIT_FINAL, rid, kind.id(), eps_label]);

            if kind == MechanismKind::PerturbedHistogram {
                let bins = plan
                    .ph
                    .bins
                    .unwrap_or_else(|| mechanisms::default_bins(data.len()));
                let release = mechanisms::perturbed_histogram(
                    &data,
                    plan.ph.range,
                    bins,
                    eps,
                    &mut seed::rng_from(synth_seed),
                )?;
                let report = UtilityReport::compute(data.values(), release.synthetic.values())?;
                let row = ResultRow {
                    replicate: r,
                    mechanism: kind,
                    epsilon: Some(eps),
                    delta_local: None,
                    epsilon_implied: None,
                    truncation_count: None,
                    censoring_count: None,
                    ecdf_max: Some(report.ecdf_max),
                    ecdf_avg_sq: Some(report.ecdf_avg_sq),
                    mean: Some(report.synthetic.mean),
                    median: Some(report.synthetic.median),
                    q15: Some(report.synthetic.q15),
                    q90: Some(report.synthetic.q90),
                    fit_status: FitStatus::Ok,
                };
                let audit = AuditRecord {
                    mechanism: kind,
                    epsilon: Some(eps),
                    c1: spec.c1,
                    c2: spec.c2,
                    seed: synth_seed,
                    n_records: data.len(),
                    boundary_clamped_records: data.clamped_records(),
                    weight_summary: None,
                    scale_clipped: 0,
                    truncation_count: None,
                    censoring_count: None,
                    censoring_draw_events: None,
                    delta_local: None,
                    epsilon_implied: None,
                    fit: None,
                    mcmc: None,
                    ph: Some(PhConfig {
                        range: release.range,
                        bins: Some(release.bins),
                    }),
                    ph_fallback_uniform: Some(release.fallback_uniform),
                };
                push_run(row, Some(audit), label);
                continue;
            }

            let outcome: Result<(ResultRow, AuditRecord)> = (|| {
                let (weights, clamp, base_status, clipped, truncation): (
                    WeightVector,
                    Option<f64>,
                    FitStatus,
                    usize,
                    Option<usize>,
                ) = match kind {
                    MechanismKind::CensorUw => (unit.clone(), Some(spec.m), FitStatus::Ok, 0, None),
                    MechanismKind::CensorW => {
                        let (weights, clipped) = scaled_weights.as_ref().ok_or_else(|| {
                            Error::FitFailed("weight pipeline unavailable".into())
                        })?;
                        (weights.clone(), Some(spec.m), FitStatus::Ok, *clipped, None)
                    }
                    MechanismKind::WeightedE => {
                        let (weights, clipped) = scaled_weights.as_ref().ok_or_else(|| {
                            Error::FitFailed("weight pipeline unavailable".into())
                        })?;
                        let (draws, status) = w_fit
                            .as_ref()
                            .ok_or_else(|| Error::FitFailed("weighted fit failed".into()))?;
                        let (truncated, count) =
                            mechanisms::truncate_weights_e(weights, draws, &spec)?;
                        (truncated, None, *status, *clipped, Some(count))
                    }
                    _ => unreachable!(),
                };
                let (draws, fit_status) =
                    fit_with_retry(&data, &weights, clamp, &mcmc_for(fit_seed), &mut fit_count)?;
                let status = if base_status == FitStatus::RetriedOk {
                    FitStatus::RetriedOk
                } else {
                    fit_status
                };
                let lip = mechanisms::lipschitz_summary(&draws, &weights)?;
                let synthetic = mechanisms::synthesize_from(&draws, &data, synth_seed)?;
                let report = UtilityReport::compute(data.values(), synthetic.values())?;
                let censoring_count = clamp.map(|_| lip.n_censored);
                let censoring_draw_events = if clamp.is_some() {
                    Some(mechanisms::censoring_draw_events(&draws, &weights)?)
                } else {
                    None
                };
                let row = ResultRow {
                    replicate: r,
                    mechanism: kind,
                    epsilon: Some(eps),
                    delta_local: Some(lip.delta_local),
                    epsilon_implied: Some(lip.epsilon_implied),
                    truncation_count: truncation,
                    censoring_count,
                    ecdf_max: Some(report.ecdf_max),
                    ecdf_avg_sq: Some(report.ecdf_avg_sq),
                    mean: Some(report.synthetic.mean),
                    median: Some(report.synthetic.median),
                    q15: Some(report.synthetic.q15),
                    q90: Some(report.synthetic.q90),
                    fit_status: status,
                };
                let audit = AuditRecord {
                    mechanism: kind,
                    epsilon: Some(eps),
                    c1: spec.c1,
                    c2: spec.c2,
                    seed: synth_seed,
                    n_records: data.len(),
                    boundary_clamped_records: data.clamped_records(),
                    weight_summary: Some(weights.summary()),
                    scale_clipped: clipped,
                    truncation_count: truncation,
                    censoring_count,
                    censoring_draw_events,
                    delta_local: Some(lip.delta_local),
                    epsilon_implied: Some(lip.epsilon_implied),
                    fit: Some(draws.diagnostics.clone()),
                    mcmc: Some(plan.mcmc),
                    ph: None,
                    ph_fallback_uniform: None,
                };
                Ok((row, audit))
            })();
            match outcome {
                Ok((row, audit)) => push_run(row, Some(audit), label),
                Err(Error::FitFailed(_)) => {
                    push_run(ResultRow::failed(r, kind, Some(eps)), None, label)
                }
                Err(other) => return Err(other),
            }
        }
    }

    Ok(ReplicateOutput {
        rows,
        audits,
        fit_count,
    })
}

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

/// Seven-number summary of one numeric column within one group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    /// (group column, value) pairs in `group_by` order.
    pub group: Vec<(String, String)>,
    pub column: String,
    /// Non-missing observations.
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub max: f64,
    /// Sample standard deviation; 0 with the degenerate flag when n = 1.
    pub sd: f64,
    pub sd_degenerate: bool,
}

pub const SUMMARY_COLUMNS: [&str; 10] = [
    "delta_local",
    "epsilon_implied",
    "truncation_count",
    "censoring_count",
    "ecdf_max",
    "ecdf_avg_sq",
    "mean",
    "median",
    "q15",
    "q90",
];

fn numeric_value(row: &ResultRow, column: &str) -> Option<f64> {
    match column {
        "delta_local" => row.delta_local,
        "epsilon_implied" => row.epsilon_implied,
        "truncation_count" => row.truncation_count.map(|c| c as f64),
        "censoring_count" => row.censoring_count.map(|c| c as f64),
        "ecdf_max" => row.ecdf_max,
        "ecdf_avg_sq" => row.ecdf_avg_sq,
        "mean" => row.mean,
        "median" => row.median,
        "q15" => row.q15,
        "q90" => row.q90,
        _ => None,
    }
}

fn group_value(row: &ResultRow, column: &str) -> Option<String> {
    match column {
        "mechanism" => Some(row.mechanism.to_string()),
        "epsilon" => Some(row.epsilon.map(|e| format!("{e}")).unwrap_or_default()),
        "replicate" => Some(row.replicate.to_string()),
        "fit_status" => Some(row.fit_status.as_str().to_string()),
        _ => None,
    }
}

/// Per-group seven-number summaries of every numeric column, over the
/// expanded rows. Groups appear in first-encounter order, which is
/// deterministic because the export rows are sorted.
pub fn summarize(table: &ResultsTable, group_by: &[&str]) -> Result<Vec<SummaryRow>> {
    let rows = table.export_rows();
    if rows.is_empty() {
        return Err(Error::EmptyData);
    }
    for col in group_by {
        if group_value(&rows[0], col).is_none() {
            return Err(Error::UnknownColumn((*col).to_string()));
        }
    }

    let mut groups: Vec<(Vec<(String, String)>, Vec<usize>)> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let key: Vec<(String, String)> = group_by
            .iter()
            .map(|c| ((*c).to_string(), group_value(row, c).unwrap()))
            .collect();
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, idx)) => idx.push(i),
            None => groups.push((key, vec![i])),
        }
    }

    let mut out = Vec::new();
    for (key, idx) in groups {
        for column in SUMMARY_COLUMNS {
            let mut values: Vec<f64> = idx
                .iter()
                .filter_map(|&i| numeric_value(&rows[i], column))
                .collect();
            if values.is_empty() {
                continue;
            }
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let (sd, degenerate) = if n > 1 {
                (
                    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0))
                        .sqrt(),
                    false,
                )
            } else {
                (0.0, true)
            };
            out.push(SummaryRow {
                group: key.clone(),
                column: column.to_string(),
                n,
                min: values[0],
                q1: crate::utility::quantile_type7(&values, 0.25),
                median: crate::utility::quantile_type7(&values, 0.5),
                mean,
                q3: crate::utility::quantile_type7(&values, 0.75),
                max: values[n - 1],
                sd,
                sd_degenerate: degenerate,
            });
        }
    }
    Ok(out)
}

/// Render summary rows as CSV with one group column per `group_by` entry.
pub fn summary_csv(rows: &[SummaryRow], group_by: &[&str]) -> String {
    let mut out = String::new();
    for col in group_by {
        out.push_str(col);
        out.push(',');
    }
    out.push_str("column,n,min,q1,median,mean,q3,max,sd,sd_degenerate\n");
    for row in rows {
        for (_, value) in &row.group {
            out.push_str(value);
            out.push(',');
        }
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            row.column,
            row.n,
            fmt_f64(row.min),
            fmt_f64(row.q1),
            fmt_f64(row.median),
            fmt_f64(row.mean),
            fmt_f64(row.q3),
            fmt_f64(row.max),
            fmt_f64(row.sd),
            row.sd_degenerate,
        ));
    }
    out
}

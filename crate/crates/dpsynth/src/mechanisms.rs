//! The six release mechanisms (Unweighted, Weighted, Weighted-e, Censor_w,
//! Censor_uw, Perturbed Histogram), the risk-based weight pipeline, and the
//! Lipschitz / epsilon accounting that turns a fitted synthesizer into a
//! privacy statement.
//!
//! The accounting contract: the local Lipschitz bound is the largest
//! (weighted, possibly clamped) absolute per-record log-likelihood over the
//! retained draws, and the implied privacy level is exactly twice that
//! bound. Censored fits clamp every contribution into `[-M, M]` with
//! `M = epsilon / 2`, so their bound can never exceed the target.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{ConfidentialDataset, SyntheticDataset};
use crate::error::{Error, Result};
use crate::model::{self, BetaParams, BetaRegressionParams};
use crate::sampler::{self, FitDiagnostics, McmcConfig, PosteriorDraws, TargetKind};
use crate::seed::{self, tag};
use crate::utility::quantile_type7;

/// How a weight vector was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightProvenance {
    Unit,
    RiskBased,
    Scaled,
    TruncatedE,
}

/// Per-record likelihood exponents in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    alphas: Vec<f64>,
    provenance: WeightProvenance,
}

impl WeightVector {
    /// All-ones weights (the posterior mechanism).
    pub fn unit(n: usize) -> Self {
        Self {
            alphas: vec![1.0; n],
            provenance: WeightProvenance::Unit,
        }
    }

    pub fn new(alphas: Vec<f64>, provenance: WeightProvenance) -> Result<Self> {
        if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::Domain(format!("weight {a} outside [0, 1]")));
        }
        if provenance == WeightProvenance::Unit && alphas.iter().any(|a| *a != 1.0) {
            return Err(Error::Domain(
                "unit provenance requires all weights 1".into(),
            ));
        }
        Ok(Self { alphas, provenance })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn provenance(&self) -> WeightProvenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn is_unit(&self) -> bool {
        self.provenance == WeightProvenance::Unit
    }

    pub fn summary(&self) -> WeightSummary {
        WeightSummary::of(&self.alphas)
    }
}

/// Distribution summary of a weight vector, for audit records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub mean: f64,
    pub max: f64,
    pub sd: f64,
}

impl WeightSummary {
    pub fn of(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sorted.len() as f64;
        let mean = sorted.iter().sum::<f64>() / n;
        let sd = if sorted.len() > 1 {
            (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            min: sorted[0],
            q1: quantile_type7(&sorted, 0.25),
            median: quantile_type7(&sorted, 0.5),
            q3: quantile_type7(&sorted, 0.75),
            mean,
            max: sorted[sorted.len() - 1],
            sd,
        }
    }
}

/// Privacy target: budget epsilon, the censoring bound `M = epsilon / 2`,
/// and the weight scaling constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrivacySpec {
    pub epsilon: f64,
    /// Censoring bound, always exactly `epsilon / 2`.
    pub m: f64,
    pub c1: f64,
    pub c2: f64,
}

impl PrivacySpec {
    pub fn new(epsilon: f64, c1: f64, c2: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Domain(format!("epsilon {epsilon} must be positive")));
        }
        if !(c1 > 0.0 && c1 <= 1.0) {
            return Err(Error::Domain(format!("c1 {c1} must lie in (0, 1]")));
        }
        if !(0.0..=1.0).contains(&c2) {
            return Err(Error::Domain(format!("c2 {c2} must lie in [0, 1]")));
        }
        Ok(Self {
            epsilon,
            m: epsilon / 2.0,
            c1,
            c2,
        })
    }
}

/// Lipschitz accounting of a fitted release.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzSummary {
    /// Max over draws of the absolute (weighted, possibly clamped)
    /// contribution per record.
    pub per_record_max: Vec<f64>,
    /// Largest per-record bound: the local Lipschitz bound.
    pub delta_local: f64,
    /// Exactly `2 * delta_local`.
    pub epsilon_implied: f64,
    /// Records whose clamp fired at any retained draw (zero for
    /// non-censored fits).
    pub n_censored: usize,
}

/// The release mechanisms compared by the simulation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MechanismKind {
    Unweighted,
    Weighted,
    WeightedE,
    CensorW,
    CensorUw,
    #[serde(rename = "ph")]
    PerturbedHistogram,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 6] = [
        MechanismKind::Unweighted,
        MechanismKind::Weighted,
        MechanismKind::WeightedE,
        MechanismKind::CensorW,
        MechanismKind::CensorUw,
        MechanismKind::PerturbedHistogram,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MechanismKind::Unweighted => "unweighted",
            MechanismKind::Weighted => "weighted",
            MechanismKind::WeightedE => "weighted-e",
            MechanismKind::CensorW => "censor-w",
            MechanismKind::CensorUw => "censor-uw",
            MechanismKind::PerturbedHistogram => "ph",
        }
    }

    /// Stable id used in seed derivation.
    pub fn id(&self) -> u64 {
        match self {
            MechanismKind::Unweighted => 0,
            MechanismKind::Weighted => 1,
            MechanismKind::WeightedE => 2,
            MechanismKind::CensorW => 3,
            MechanismKind::CensorUw => 4,
            MechanismKind::PerturbedHistogram => 5,
        }
    }

    /// Whether the release depends on the target epsilon. Unweighted and
    /// Weighted do not, so one run serves every target.
    pub fn epsilon_dependent(&self) -> bool {
        !matches!(self, MechanismKind::Unweighted | MechanismKind::Weighted)
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MechanismKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unweighted" => Ok(MechanismKind::Unweighted),
            "weighted" => Ok(MechanismKind::Weighted),
            "weighted-e" => Ok(MechanismKind::WeightedE),
            "censor-w" => Ok(MechanismKind::CensorW),
            "censor-uw" => Ok(MechanismKind::CensorUw),
            "ph" => Ok(MechanismKind::PerturbedHistogram),
            other => Err(Error::InvalidConfig(format!(
                "unknown mechanism `{other}` (expected unweighted, weighted, weighted-e, censor-w, censor-uw, ph)"
            ))),
        }
    }
}

/// Reference quantile of the record-risk distribution used to anchor the
/// weight normalization: records up to this risk level keep full weight,
/// riskier records are downweighted in inverse proportion. Calibrated so
/// the Weighted mechanism's Lipschitz bounds on the simulation design
/// straddle 2.5 nats, the regime the comparison study operates in.
pub const RISK_REFERENCE_QUANTILE: f64 = 0.77;

/// Risk-based weights from an unweighted fit, at the default reference
/// quantile. See [`compute_weights_with_reference`].
pub fn compute_weights(draws: &PosteriorDraws) -> Result<WeightVector> {
    compute_weights_with_reference(draws, RISK_REFERENCE_QUANTILE)
}

/// Risk-based weights from an unweighted fit: record risk is the empirical
/// sup of the absolute log-likelihood over the retained draws, and
/// `alpha_i = min(1, c / risk_i)` with the reference level `c` set at the
/// given quantile of the risks. The bulk of the records keeps full weight
/// while tail records shrink inversely with risk, pinning their weighted
/// contributions at `c`. Records with any non-finite contribution are
/// removed from the likelihood entirely.
pub fn compute_weights_with_reference(
    draws: &PosteriorDraws,
    reference_quantile: f64,
) -> Result<WeightVector> {
    if draws.target_kind != TargetKind::Unweighted {
        return Err(Error::Domain(
            "weights must be computed from an unweighted fit".into(),
        ));
    }
    if draws.n_draws() == 0 || draws.n_records() == 0 {
        return Err(Error::EmptyDraws);
    }
    if !(0.0..=1.0).contains(&reference_quantile) {
        return Err(Error::Domain(format!(
            "reference quantile {reference_quantile} outside [0, 1]"
        )));
    }
    let risks = record_risks(draws);
    weights_from_risks(&risks, reference_quantile)
}

/// Per-record disclosure risk: the empirical sup (max over retained draws)
/// of the absolute log-likelihood.
pub fn record_risks(draws: &PosteriorDraws) -> Vec<f64> {
    draws.per_record_abs_max()
}

fn weights_from_risks(risks: &[f64], reference_quantile: f64) -> Result<WeightVector> {
    let mut finite: Vec<f64> = risks.iter().copied().filter(|r| r.is_finite()).collect();
    if finite.is_empty() {
        return WeightVector::new(vec![0.0; risks.len()], WeightProvenance::RiskBased);
    }
    finite.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let reference = quantile_type7(&finite, reference_quantile);
    let alphas = risks
        .iter()
        .map(|&risk| {
            if !risk.is_finite() {
                0.0
            } else if risk == 0.0 {
                1.0
            } else {
                (reference / risk).min(1.0)
            }
        })
        .collect();
    WeightVector::new(alphas, WeightProvenance::RiskBased)
}

/// Scale and shift weights by `(c1, c2)`, clamping back into `[0, 1]`.
/// Returns the scaled vector and how many weights needed clamping.
pub fn scale_weights(weights: &WeightVector, spec: &PrivacySpec) -> (WeightVector, usize) {
    let mut clipped = 0usize;
    let alphas = weights
        .alphas()
        .iter()
        .map(|a| {
            let scaled = spec.c1 * a + spec.c2;
            if !(0.0..=1.0).contains(&scaled) {
                clipped += 1;
            }
            scaled.clamp(0.0, 1.0)
        })
        .collect();
    (
        WeightVector {
            alphas,
            provenance: WeightProvenance::Scaled,
        },
        clipped,
    )
}

/// Weighted-e truncation: zero the weight of every record whose weighted
/// contribution under the pseudo-posterior fit ever exceeds `epsilon / 2`
/// in magnitude. Returns the truncated vector and the truncation count.
pub fn truncate_weights_e(
    weights: &WeightVector,
    draws: &PosteriorDraws,
    spec: &PrivacySpec,
) -> Result<(WeightVector, usize)> {
    if weights.len() != draws.n_records() {
        return Err(Error::DimensionMismatch {
            expected: draws.n_records(),
            actual: weights.len(),
        });
    }
    let risks = draws.per_record_abs_max();
    let mut truncated = 0usize;
    let alphas = weights
        .alphas()
        .iter()
        .zip(&risks)
        .map(|(&a, &risk)| {
            let weighted_sup = if a == 0.0 { 0.0 } else { a * risk };
            if weighted_sup > spec.m {
                truncated += 1;
                0.0
            } else {
                a
            }
        })
        .collect();
    Ok((
        WeightVector {
            alphas,
            provenance: WeightProvenance::TruncatedE,
        },
        truncated,
    ))
}

/// Empirical Lipschitz accounting of a fit under its final weights. For
/// censored fits the clamped contribution is what gets released, so the
/// per-record bound is `min(alpha_i * sup|loglik_i|, M)` and the clamp
/// count is taken over the same draws.
pub fn lipschitz_summary(
    draws: &PosteriorDraws,
    weights: &WeightVector,
) -> Result<LipschitzSummary> {
    if weights.len() != draws.n_records() {
        return Err(Error::DimensionMismatch {
            expected: draws.n_records(),
            actual: weights.len(),
        });
    }
    let risks = draws.per_record_abs_max();
    let mut n_censored = 0usize;
    let per_record_max: Vec<f64> = weights
        .alphas()
        .iter()
        .zip(&risks)
        .map(|(&a, &risk)| {
            let weighted = if a == 0.0 { 0.0 } else { a * risk };
            match draws.clamp {
                Some(m) => {
                    if weighted > m {
                        n_censored += 1;
                        m
                    } else {
                        weighted
                    }
                }
                None => weighted,
            }
        })
        .collect();
    let delta_local = per_record_max.iter().copied().fold(0.0, f64::max);
    Ok(LipschitzSummary {
        per_record_max,
        delta_local,
        epsilon_implied: 2.0 * delta_local,
        n_censored,
    })
}

/// Total clamp firings over all (draw, record) pairs; an audit diagnostic
/// alongside the per-record censoring count.
pub fn censoring_draw_events(draws: &PosteriorDraws, weights: &WeightVector) -> Result<usize> {
    if weights.len() != draws.n_records() {
        return Err(Error::DimensionMismatch {
            expected: draws.n_records(),
            actual: weights.len(),
        });
    }
    let Some(m) = draws.clamp else {
        return Ok(0);
    };
    let mut events = 0usize;
    for s in 0..draws.n_draws() {
        for (a, v) in weights.alphas().iter().zip(draws.loglik_row(s)) {
            if model::weighted_loglik(*v, *a).abs() > m {
                events += 1;
            }
        }
    }
    Ok(events)
}

// ---------------------------------------------------------------------------
// Perturbed histogram
// ---------------------------------------------------------------------------

/// Default bin rule: the natural log of the record count, rounded.
pub fn default_bins(n: usize) -> usize {
    ((n as f64).ln().round() as usize).max(1)
}

/// Inverse-CDF Laplace draw from a single uniform variate:
/// `x = -scale * sign(u - 1/2) * ln(1 - 2|u - 1/2|)`. Written out so any
/// implementation fed the same uniform stream produces the same noise.
pub fn laplace_from_uniform(u: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    let d = u - 0.5;
    if d == 0.0 {
        return 0.0;
    }
    -scale * d.signum() * (-2.0 * d.abs()).ln_1p()
}

/// Outcome of a perturbed-histogram release.
#[derive(Debug, Clone)]
pub struct PhRelease {
    pub synthetic: SyntheticDataset,
    pub bins: usize,
    pub range: f64,
    /// Set when every noisy count clipped to zero and the bin probabilities
    /// fell back to uniform.
    pub fallback_uniform: bool,
}

/// Laplace-perturbed histogram synthesizer on `[0, range]`: noise the bin
/// counts at scale `2 / epsilon`, clip at zero, normalize, then draw one
/// bin-plus-uniform value per input record.
pub fn perturbed_histogram<R: Rng>(
    data: &ConfidentialDataset,
    range: f64,
    bins: usize,
    epsilon: f64,
    rng: &mut R,
) -> Result<PhRelease> {
    if bins == 0 {
        return Err(Error::Domain("bin count must be at least 1".into()));
    }
    if !(range > 0.0) || !range.is_finite() {
        return Err(Error::Domain(format!("range {range} must be positive")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("epsilon {epsilon} must be positive")));
    }
    if let Some(bad) = data.values().iter().find(|x| **x < 0.0 || **x > range) {
        return Err(Error::Domain(format!(
            "record {bad} outside the declared range [0, {range}]"
        )));
    }

    let width = range / bins as f64;
    let mut counts = vec![0u64; bins];
    for &x in data.values() {
        let j = ((x / width) as usize).min(bins - 1);
        counts[j] += 1;
    }

    let scale = if epsilon.is_finite() {
        2.0 / epsilon
    } else {
        0.0
    };
    let mut clipped: Vec<f64> = counts
        .iter()
        .map(|&c| {
            let noise = laplace_from_uniform(rng.gen::<f64>(), scale);
            (c as f64 + noise).max(0.0)
        })
        .collect();

    let total: f64 = clipped.iter().sum();
    let fallback_uniform = total <= 0.0;
    if fallback_uniform {
        clipped = vec![1.0; bins];
    }
    let total: f64 = clipped.iter().sum();
    let cumulative: Vec<f64> = clipped
        .iter()
        .scan(0.0, |acc, q| {
            *acc += q / total;
            Some(*acc)
        })
        .collect();

    let values = (0..data.len())
        .map(|_| {
            let u: f64 = rng.gen();
            let j = cumulative.partition_point(|c| *c < u).min(bins - 1);
            (j as f64 + rng.gen::<f64>()) * width
        })
        .collect();

    Ok(PhRelease {
        synthetic: SyntheticDataset::new(values),
        bins,
        range,
        fallback_uniform,
    })
}

// ---------------------------------------------------------------------------
// Full mechanism pipelines
// ---------------------------------------------------------------------------

/// Perturbed-histogram settings; `bins = None` applies [`default_bins`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhConfig {
    pub range: f64,
    pub bins: Option<usize>,
}

impl Default for PhConfig {
    fn default() -> Self {
        Self {
            range: 1.0,
            bins: None,
        }
    }
}

/// Everything a mechanism run releases alongside its synthetic data.
#[derive(Debug, Clone)]
pub struct MechanismRun {
    pub synthetic: SyntheticDataset,
    pub lipschitz: Option<LipschitzSummary>,
    pub audit: AuditRecord,
}

/// JSON-serialized audit of a single mechanism run.
#[derive(Debug, Clone, Serialize)]
pub struct AuditRecord {
    pub mechanism: MechanismKind,
    pub epsilon: Option<f64>,
    pub c1: f64,
    pub c2: f64,
    pub seed: u64,
    pub n_records: usize,
    /// Records pulled off the unit-interval boundary during validation.
    pub boundary_clamped_records: usize,
    pub weight_summary: Option<WeightSummary>,
    /// Weights that had to be clipped back into [0, 1] after scaling.
    pub scale_clipped: usize,
    pub truncation_count: Option<usize>,
    pub censoring_count: Option<usize>,
    pub censoring_draw_events: Option<usize>,
    pub delta_local: Option<f64>,
    pub epsilon_implied: Option<f64>,
    pub fit: Option<FitDiagnostics>,
    pub mcmc: Option<McmcConfig>,
    pub ph: Option<PhConfig>,
    pub ph_fallback_uniform: Option<bool>,
}

/// Draw one retained parameter vector uniformly at random (seeded) and
/// sample the predictive distribution, one synthetic record per
/// confidential record.
pub fn synthesize_from(
    draws: &PosteriorDraws,
    data: &ConfidentialDataset,
    synth_seed: u64,
) -> Result<SyntheticDataset> {
    if draws.n_draws() == 0 {
        return Err(Error::EmptyDraws);
    }
    let mut rng = seed::rng_from(synth_seed);
    let pick = rng.gen_range(0..draws.n_draws());
    let theta = draws.draw(pick);
    match data.covariates() {
        None => {
            let params = BetaParams::new(theta[0], theta[1])?;
            model::predictive_sample(&params, data.len(), &mut rng)
        }
        Some(cov) => {
            let params = BetaRegressionParams::new(
                theta[..theta.len() - 1].to_vec(),
                theta[theta.len() - 1],
            )?;
            model::predictive_sample_regression(&params, cov, &mut rng)
        }
    }
}

/// Run one mechanism end to end: fit the required posteriors, synthesize,
/// and assemble the Lipschitz accounting and audit record. Stage seeds are
/// derived from `seed`; the seed inside `mcmc` is ignored.
pub fn run_mechanism(
    kind: MechanismKind,
    data: &ConfidentialDataset,
    spec: &PrivacySpec,
    mcmc: &McmcConfig,
    ph: &PhConfig,
    seed_base: u64,
) -> Result<MechanismRun> {
    let stage_config = |stage: u64| McmcConfig {
        seed: seed::derive(seed_base, &[tag::FIT, stage]),
        ..*mcmc
    };
    let synth_seed = seed::derive(seed_base, &[tag::SYNTH]);

    let mut audit = AuditRecord {
        mechanism: kind,
        epsilon: Some(spec.epsilon),
        c1: spec.c1,
        c2: spec.c2,
        seed: seed_base,
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
        ph: None,
        ph_fallback_uniform: None,
    };

    if kind == MechanismKind::PerturbedHistogram {
        let bins = ph.bins.unwrap_or_else(|| default_bins(data.len()));
        let mut rng = seed::rng_from(synth_seed);
        let release = perturbed_histogram(data, ph.range, bins, spec.epsilon, &mut rng)?;
        audit.ph = Some(PhConfig {
            range: release.range,
            bins: Some(release.bins),
        });
        audit.ph_fallback_uniform = Some(release.fallback_uniform);
        return Ok(MechanismRun {
            synthetic: release.synthetic,
            lipschitz: None,
            audit,
        });
    }

    audit.mcmc = Some(McmcConfig {
        seed: seed_base,
        ..*mcmc
    });

    // Stage 0: every Bayesian pipeline except Censor_uw starts from the
    // unweighted posterior.
    let (final_weights, final_draws) = match kind {
        MechanismKind::Unweighted => {
            let weights = WeightVector::unit(data.len());
            let draws = sampler::fit(data, &weights, None, &stage_config(0))?;
            (weights, draws)
        }
        MechanismKind::CensorUw => {
            let weights = WeightVector::unit(data.len());
            let draws = sampler::fit(data, &weights, Some(spec.m), &stage_config(0))?;
            (weights, draws)
        }
        MechanismKind::Weighted | MechanismKind::WeightedE | MechanismKind::CensorW => {
            let unit = WeightVector::unit(data.len());
            let uw_draws = sampler::fit(data, &unit, None, &stage_config(0))?;
            let base = compute_weights(&uw_draws)?;
            let (scaled, clipped) = scale_weights(&base, spec);
            audit.scale_clipped = clipped;
            match kind {
                MechanismKind::Weighted => {
                    let draws = sampler::fit(data, &scaled, None, &stage_config(1))?;
                    (scaled, draws)
                }
                MechanismKind::CensorW => {
                    let draws = sampler::fit(data, &scaled, Some(spec.m), &stage_config(1))?;
                    (scaled, draws)
                }
                MechanismKind::WeightedE => {
                    let w_draws = sampler::fit(data, &scaled, None, &stage_config(1))?;
                    let (truncated, count) = truncate_weights_e(&scaled, &w_draws, spec)?;
                    audit.truncation_count = Some(count);
                    let draws = sampler::fit(data, &truncated, None, &stage_config(2))?;
                    (truncated, draws)
                }
                _ => unreachable!(),
            }
        }
        MechanismKind::PerturbedHistogram => unreachable!(),
    };

    let lipschitz = lipschitz_summary(&final_draws, &final_weights)?;
    audit.weight_summary = Some(final_weights.summary());
    audit.delta_local = Some(lipschitz.delta_local);
    audit.epsilon_implied = Some(lipschitz.epsilon_implied);
    audit.fit = Some(final_draws.diagnostics.clone());
    if final_draws.clamp.is_some() {
        audit.censoring_count = Some(lipschitz.n_censored);
        audit.censoring_draw_events = Some(censoring_draw_events(&final_draws, &final_weights)?);
    }

    let synthetic = synthesize_from(&final_draws, data, synth_seed)?;
    Ok(MechanismRun {
        synthetic,
        lipschitz: Some(lipschitz),
        audit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::predictive_sample;
    use crate::seed::rng_from;
    use proptest::prelude::*;
    use rand::Rng;

    fn draws_from_logliks(
        rows: Vec<Vec<f64>>,
        kind: TargetKind,
        clamp: Option<f64>,
    ) -> PosteriorDraws {
        let params = vec![vec![0.5, 2.0]; rows.len()];
        PosteriorDraws::for_tests(params, rows, kind, clamp)
    }

    #[test]
    fn homogeneous_risk_gives_unit_weights() {
        let draws = draws_from_logliks(
            vec![vec![-1.0, -1.0, -1.0], vec![-0.5, -0.5, -0.5]],
            TargetKind::Unweighted,
            None,
        );
        let w = compute_weights(&draws).unwrap();
        assert_eq!(w.alphas(), [1.0, 1.0, 1.0]);
        assert_eq!(w.provenance(), WeightProvenance::RiskBased);
    }

    #[test]
    fn risk_above_the_reference_is_downweighted_in_proportion() {
        // Risks {1, 1, 1, 1, 8}: the median-reference weights pin the risky
        // record's weighted contribution at the reference level.
        let draws = draws_from_logliks(
            vec![vec![-1.0, -1.0, -1.0, 1.0, -8.0]],
            TargetKind::Unweighted,
            None,
        );
        let w = compute_weights_with_reference(&draws, 0.5).unwrap();
        assert_eq!(w.alphas(), [1.0, 1.0, 1.0, 1.0, 1.0 / 8.0]);
        // Weighted sup of the risky record equals the reference exactly.
        assert_eq!(w.alphas()[4] * 8.0, 1.0);
    }

    #[test]
    fn reference_quantile_interpolates_between_risks() {
        // Risks {1, 3}: type-7 median reference is 2, so the riskier record
        // gets weight 2/3.
        let draws = draws_from_logliks(vec![vec![-1.0, -3.0]], TargetKind::Unweighted, None);
        let w = compute_weights_with_reference(&draws, 0.5).unwrap();
        assert_eq!(w.alphas()[0], 1.0);
        assert!((w.alphas()[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn non_finite_contribution_zeroes_the_weight() {
        let draws = draws_from_logliks(
            vec![vec![-1.0, f64::NEG_INFINITY, -4.0]],
            TargetKind::Unweighted,
            None,
        );
        // Finite risks {1, 4}: max-reference keeps both at full weight and
        // zeroes only the non-finite record.
        let w = compute_weights_with_reference(&draws, 1.0).unwrap();
        assert_eq!(w.alphas(), [1.0, 0.0, 1.0]);
        // At the min reference the risky record shrinks inversely.
        let w = compute_weights_with_reference(&draws, 0.0).unwrap();
        assert_eq!(w.alphas(), [1.0, 0.0, 0.25]);
    }

    #[test]
    fn all_non_finite_risks_zero_every_weight() {
        let draws = draws_from_logliks(
            vec![vec![f64::NEG_INFINITY, f64::INFINITY]],
            TargetKind::Unweighted,
            None,
        );
        let w = compute_weights(&draws).unwrap();
        assert_eq!(w.alphas(), [0.0, 0.0]);
    }

    #[test]
    fn weights_require_an_unweighted_fit() {
        let draws = draws_from_logliks(vec![vec![-1.0]], TargetKind::Pseudo, None);
        assert!(compute_weights(&draws).is_err());
    }

    #[test]
    fn scale_weights_examples() {
        let w = WeightVector::new(vec![1.0, 0.5, 0.9], WeightProvenance::RiskBased).unwrap();
        let (id, clipped) = scale_weights(&w, &PrivacySpec::new(4.0, 1.0, 0.0).unwrap());
        assert_eq!(id.alphas(), w.alphas());
        assert_eq!(clipped, 0);

        let (scaled, clipped) = scale_weights(&w, &PrivacySpec::new(4.0, 0.8, 0.0).unwrap());
        assert_eq!(scaled.alphas(), [0.8, 0.4, 0.9 * 0.8]);
        assert_eq!(scaled.provenance(), WeightProvenance::Scaled);
        assert_eq!(clipped, 0);

        let (clamped, clipped) = scale_weights(&w, &PrivacySpec::new(4.0, 0.5, 0.7).unwrap());
        assert_eq!(clamped.alphas()[0], 1.0); // 1.15 clipped
        assert_eq!(clamped.alphas()[1], 0.95);
        assert_eq!(clipped, 2); // 0.9 scales to 1.15 as well
    }

    #[test]
    fn truncation_zeroes_only_violating_records() {
        let spec = PrivacySpec::new(3.0, 1.0, 0.0).unwrap(); // m = 1.5
        let draws = draws_from_logliks(
            vec![vec![-1.0, -2.0, 0.4], vec![-1.4, -1.6, -3.9]],
            TargetKind::Pseudo,
            None,
        );
        let w = WeightVector::new(vec![1.0, 0.9, 0.3], WeightProvenance::Scaled).unwrap();
        let (t, count) = truncate_weights_e(&w, &draws, &spec).unwrap();
        // sups: 1.4, 1.8, 1.17 -> only the middle record exceeds 1.5.
        assert_eq!(t.alphas(), [1.0, 0.0, 0.3]);
        assert_eq!(count, 1);
        assert_eq!(t.provenance(), WeightProvenance::TruncatedE);

        // All contributions inside the clamp: nothing truncated.
        let (t, count) = truncate_weights_e(&t, &draws, &spec).unwrap();
        assert_eq!(count, 0);
        assert_eq!(t.alphas(), [1.0, 0.0, 0.3]);

        // Tiny epsilon: everything with positive weighted sup goes.
        let tight = PrivacySpec::new(1e-6, 1.0, 0.0).unwrap();
        let (t, count) = truncate_weights_e(&w, &draws, &tight).unwrap();
        assert_eq!(t.alphas(), [0.0, 0.0, 0.0]);
        assert_eq!(count, 3);
    }

    #[test]
    fn lipschitz_identity_and_examples() {
        // Single record, single draw, unit weight: Table-style 2 * delta.
        let draws = draws_from_logliks(vec![vec![-1.31]], TargetKind::Unweighted, None);
        let lip = lipschitz_summary(&draws, &WeightVector::unit(1)).unwrap();
        assert_eq!(lip.delta_local, 1.31);
        assert_eq!(lip.epsilon_implied, 2.62);
        assert_eq!(lip.n_censored, 0);

        // All-zero weights collapse the bound to zero.
        let w = WeightVector::new(vec![0.0], WeightProvenance::Scaled).unwrap();
        let lip = lipschitz_summary(&draws, &w).unwrap();
        assert_eq!(lip.delta_local, 0.0);
        assert_eq!(lip.epsilon_implied, 0.0);
    }

    #[test]
    fn censored_summary_caps_and_counts() {
        let draws = draws_from_logliks(
            vec![vec![-4.0, -1.0, 0.2], vec![-0.4, -2.0, 0.1]],
            TargetKind::Censored,
            Some(1.5),
        );
        let lip = lipschitz_summary(&draws, &WeightVector::unit(3)).unwrap();
        assert_eq!(lip.per_record_max, [1.5, 1.5, 0.2]);
        assert_eq!(lip.delta_local, 1.5);
        assert_eq!(lip.n_censored, 2);
        let events = censoring_draw_events(&draws, &WeightVector::unit(3)).unwrap();
        assert_eq!(events, 2); // (-4.0 at draw 0) and (-2.0 at draw 1)

        // Weighting the risky records down censors fewer of them.
        let w = WeightVector::new(vec![0.3, 0.5, 1.0], WeightProvenance::Scaled).unwrap();
        let lip_w = lipschitz_summary(&draws, &w).unwrap();
        assert_eq!(lip_w.n_censored, 0);
        assert!(lip_w.delta_local <= lip.delta_local);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let draws = draws_from_logliks(vec![vec![-1.0, -2.0]], TargetKind::Unweighted, None);
        assert!(lipschitz_summary(&draws, &WeightVector::unit(3)).is_err());
        let spec = PrivacySpec::new(5.0, 1.0, 0.0).unwrap();
        assert!(truncate_weights_e(&WeightVector::unit(3), &draws, &spec).is_err());
    }

    #[test]
    fn privacy_spec_invariants() {
        let spec = PrivacySpec::new(5.0, 0.8, 0.0).unwrap();
        assert_eq!(spec.m, 2.5);
        assert!(PrivacySpec::new(0.0, 1.0, 0.0).is_err());
        assert!(PrivacySpec::new(-1.0, 1.0, 0.0).is_err());
        assert!(PrivacySpec::new(5.0, 0.0, 0.0).is_err());
        assert!(PrivacySpec::new(5.0, 1.2, 0.0).is_err());
    }

    #[test]
    fn laplace_spot_values_match_inverse_cdf() {
        // Frozen from the documented formula evaluated externally.
        assert!((laplace_from_uniform(0.1, 1.0) - (-1.6094379124341005)).abs() < 1e-15);
        assert!((laplace_from_uniform(0.25, 1.0) - (-0.69314718055994529)).abs() < 1e-15);
        assert_eq!(laplace_from_uniform(0.5, 1.0), 0.0);
        assert!((laplace_from_uniform(0.75, 1.0) - 0.69314718055994529).abs() < 1e-15);
        assert!((laplace_from_uniform(0.999, 1.0) - 6.2146080984221905).abs() < 1e-14);
        assert_eq!(laplace_from_uniform(0.42, 0.0), 0.0);
    }

    #[test]
    fn laplace_moments_at_release_scale() {
        // 1e5 draws at scale 2/5: mean within 3 SE of 0, mean absolute
        // deviation within 3 SE of the scale.
        let scale = 2.0 / 5.0;
        let mut rng = rng_from(99);
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| laplace_from_uniform(rng.gen(), scale))
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let mad = draws.iter().map(|x| x.abs()).sum::<f64>() / n as f64;
        let se_mean = scale * std::f64::consts::SQRT_2 / (n as f64).sqrt();
        let se_mad = scale / (n as f64).sqrt();
        assert!(mean.abs() < 3.0 * se_mean, "mean {mean}");
        assert!((mad - scale).abs() < 3.0 * se_mad, "mad {mad}");
    }

    #[test]
    fn default_bin_rule() {
        assert_eq!(default_bins(2000), 8);
        assert_eq!(default_bins(500), 6);
        assert_eq!(default_bins(1), 1);
    }

    #[test]
    fn ph_zero_noise_limit_recovers_binned_distribution() {
        let params = BetaParams::from_shapes(0.5, 3.0).unwrap();
        let values = predictive_sample(&params, 20_000, &mut rng_from(5))
            .unwrap()
            .into_values();
        let data = ConfidentialDataset::from_values(values).unwrap();
        let release = perturbed_histogram(&data, 1.0, 8, f64::INFINITY, &mut rng_from(6)).unwrap();
        assert!(!release.fallback_uniform);
        assert!(release
            .synthetic
            .values()
            .iter()
            .all(|v| (0.0..=1.0).contains(v)));
        // With no noise the synthetic bin frequencies match the data's.
        let count_bin = |vals: &[f64]| {
            let mut c = vec![0usize; 8];
            for v in vals {
                c[((v / 0.125) as usize).min(7)] += 1;
            }
            c
        };
        let orig = count_bin(data.values());
        let synth = count_bin(release.synthetic.values());
        for (o, s) in orig.iter().zip(&synth) {
            let (o, s) = (*o as f64 / 20_000.0, *s as f64 / 20_000.0);
            assert!((o - s).abs() < 0.02, "bin frequency {o} vs {s}");
        }
    }

    #[test]
    fn ph_depends_on_data_only_through_the_histogram() {
        // Two datasets with identical bin counts release identical data.
        let a = ConfidentialDataset::from_values(vec![0.11, 0.12, 0.61, 0.62]).unwrap();
        let b = ConfidentialDataset::from_values(vec![0.19, 0.13, 0.69, 0.68]).unwrap();
        let ra = perturbed_histogram(&a, 1.0, 5, 5.0, &mut rng_from(9)).unwrap();
        let rb = perturbed_histogram(&b, 1.0, 5, 5.0, &mut rng_from(9)).unwrap();
        assert_eq!(ra.synthetic, rb.synthetic);
    }

    #[test]
    fn ph_out_of_range_is_rejected() {
        let d = ConfidentialDataset::from_values(vec![0.5, 0.9]).unwrap();
        assert!(perturbed_histogram(&d, 0.6, 4, 5.0, &mut rng_from(1)).is_err());
        assert!(perturbed_histogram(&d, 1.0, 0, 5.0, &mut rng_from(1)).is_err());
        assert!(perturbed_histogram(&d, 1.0, 4, 0.0, &mut rng_from(1)).is_err());
    }

    #[test]
    fn mechanism_names_round_trip() {
        for kind in MechanismKind::ALL {
            assert_eq!(kind.as_str().parse::<MechanismKind>().unwrap(), kind);
        }
        assert!("histogram".parse::<MechanismKind>().is_err());
    }

    proptest! {
        // The cap property on arbitrary inputs: a censored fit's bound never
        // exceeds the clamp, whatever the draws and weights.
        #[test]
        fn censored_bound_never_exceeds_clamp(
            rows in proptest::collection::vec(
                proptest::collection::vec(-30.0f64..30.0, 5),
                1..6,
            ),
            alphas in proptest::collection::vec(0.0f64..=1.0, 5),
            m in 0.05f64..4.0,
        ) {
            let draws = draws_from_logliks(rows, TargetKind::Censored, Some(m));
            let w = WeightVector::new(alphas, WeightProvenance::Scaled).unwrap();
            let lip = lipschitz_summary(&draws, &w).unwrap();
            prop_assert!(lip.delta_local <= m);
            prop_assert_eq!(lip.epsilon_implied, 2.0 * lip.delta_local);
        }

        // Pointwise-smaller weights never increase the bound, on identical
        // fitted draws.
        #[test]
        fn dominance_under_pointwise_smaller_weights(
            row in proptest::collection::vec(-30.0f64..30.0, 6),
            alphas in proptest::collection::vec(0.0f64..=1.0, 6),
            shrink in proptest::collection::vec(0.0f64..=1.0, 6),
        ) {
            let draws = draws_from_logliks(vec![row], TargetKind::Pseudo, None);
            let big = WeightVector::new(alphas.clone(), WeightProvenance::Scaled).unwrap();
            let small_alphas: Vec<f64> =
                alphas.iter().zip(&shrink).map(|(a, s)| a * s).collect();
            let small = WeightVector::new(small_alphas, WeightProvenance::Scaled).unwrap();
            let lip_big = lipschitz_summary(&draws, &big).unwrap();
            let lip_small = lipschitz_summary(&draws, &small).unwrap();
            prop_assert!(lip_small.delta_local <= lip_big.delta_local + 1e-12);
        }

        #[test]
        fn epsilon_accounting_identity(
            row in proptest::collection::vec(-50.0f64..50.0, 1..8),
        ) {
            let n = row.len();
            let draws = draws_from_logliks(vec![row], TargetKind::Unweighted, None);
            let lip = lipschitz_summary(&draws, &WeightVector::unit(n)).unwrap();
            prop_assert_eq!(lip.epsilon_implied, 2.0 * lip.delta_local);
            prop_assert!(lip.per_record_max.iter().all(|m| *m >= 0.0));
        }
    }
}

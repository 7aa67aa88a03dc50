//! Adaptive random-walk Metropolis fitting of the plain, pseudo-weighted,
//! and censored posteriors.
//!
//! Parameters are sampled on an unconstrained scale (`logit(phi)`,
//! `log(lambda - 0.1)`, raw coefficients) with the log-Jacobian added to the
//! target. The proposal is a diagonal Gaussian whose per-coordinate scales
//! track the warmup sample variance while a Robbins-Monro recursion steers
//! the global step size toward the acceptance target; both are frozen when
//! warmup ends. Chains run from independent seeded streams and are checked
//! with split-chain R-hat (computed on the unconstrained draws, where even
//! the heavy-tailed precision prior has finite variance) before a fit is
//! accepted.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::ConfidentialDataset;
use crate::error::{Error, Result};
use crate::mechanisms::WeightVector;
use crate::model::{self, BetaParams, BetaRegressionParams};
use crate::seed::{self, tag};

/// MCMC budget and adaptation settings.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct McmcConfig {
    /// Warmup (adaptation) iterations per chain.
    pub n_warmup: usize,
    /// Total retained draws, split across chains.
    pub n_retain: usize,
    /// Keep every `thin`-th post-warmup draw.
    pub thin: usize,
    /// Target acceptance rate for step-size adaptation.
    pub adapt_target: f64,
    pub seed: u64,
    pub n_chains: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            n_warmup: 5000,
            n_retain: 5000,
            thin: 1,
            adapt_target: 0.234,
            seed: 0,
            n_chains: 2,
        }
    }
}

impl McmcConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 {
            return Err(Error::InvalidConfig("n_chains must be at least 1".into()));
        }
        if self.n_warmup < 10 || self.n_retain < 10 * self.n_chains {
            return Err(Error::InvalidConfig(
                "warmup and retained-per-chain counts are too small to diagnose".into(),
            ));
        }
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thin must be at least 1".into()));
        }
        if !(self.adapt_target > 0.1 && self.adapt_target < 0.6) {
            return Err(Error::InvalidConfig(format!(
                "adapt_target {} outside (0.1, 0.6)",
                self.adapt_target
            )));
        }
        Ok(())
    }
}

/// Which posterior the draws came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Unweighted,
    Pseudo,
    Censored,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct FitDiagnostics {
    /// Post-warmup acceptance rate averaged over chains.
    pub accept_rate: f64,
    /// Split-chain R-hat per parameter, on the unconstrained scale.
    pub rhat: Vec<f64>,
    pub n_chains: usize,
    pub n_warmup: usize,
    pub n_retained: usize,
}

/// Retained draws plus the per-record raw log-likelihood matrix consumed by
/// the weight pipeline and the Lipschitz accounting.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    param_names: Vec<String>,
    /// S x p, row-major, natural scale.
    params: Vec<f64>,
    n_params: usize,
    /// S x n, row-major: raw `log p(x_i | theta_s)`.
    per_record_loglik: Vec<f64>,
    n_records: usize,
    n_draws: usize,
    /// Sampled target log-density per retained draw (unconstrained scale,
    /// prior and Jacobian included).
    target_logdens: Vec<f64>,
    pub target_kind: TargetKind,
    /// Censoring bound `M` for censored fits.
    pub clamp: Option<f64>,
    pub diagnostics: FitDiagnostics,
}

impl PosteriorDraws {
    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    pub fn n_records(&self) -> usize {
        self.n_records
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn param_names(&self) -> &[String] {
        &self.param_names
    }

    /// Natural-scale parameter vector of draw `s`.
    pub fn draw(&self, s: usize) -> &[f64] {
        &self.params[s * self.n_params..(s + 1) * self.n_params]
    }

    /// Raw per-record log-likelihood row of draw `s`.
    pub fn loglik_row(&self, s: usize) -> &[f64] {
        &self.per_record_loglik[s * self.n_records..(s + 1) * self.n_records]
    }

    pub fn target_logdens(&self) -> &[f64] {
        &self.target_logdens
    }

    /// Max over draws of `|log p(x_i | theta_s)|` per record; the empirical
    /// stand-in for the sup over the parameter space. Non-finite entries
    /// propagate as infinity.
    pub fn per_record_abs_max(&self) -> Vec<f64> {
        let mut out = vec![0.0f64; self.n_records];
        for s in 0..self.n_draws {
            for (m, &v) in out.iter_mut().zip(self.loglik_row(s)) {
                let a = if v.is_finite() {
                    v.abs()
                } else {
                    f64::INFINITY
                };
                if a > *m {
                    *m = a;
                }
            }
        }
        out
    }

    #[cfg(test)]
    pub(crate) fn for_tests(
        params: Vec<Vec<f64>>,
        per_record_loglik: Vec<Vec<f64>>,
        target_kind: TargetKind,
        clamp: Option<f64>,
    ) -> Self {
        let n_draws = per_record_loglik.len();
        let n_records = per_record_loglik.first().map_or(0, Vec::len);
        let n_params = params.first().map_or(0, Vec::len);
        let target_logdens = vec![0.0; n_draws];
        Self {
            param_names: (0..n_params).map(|i| format!("p{i}")).collect(),
            params: params.into_iter().flatten().collect(),
            n_params,
            per_record_loglik: per_record_loglik.into_iter().flatten().collect(),
            n_records,
            n_draws,
            target_logdens,
            target_kind,
            clamp,
            diagnostics: FitDiagnostics {
                accept_rate: 1.0,
                rhat: vec![1.0; n_params],
                n_chains: 1,
                n_warmup: 0,
                n_retained: n_draws,
            },
        }
    }
}

/// The retained draw with the highest sampled target log-density; ties go
/// to the lowest draw index. A diagnostic point estimate, not the synthesis
/// draw.
pub fn map_point(draws: &PosteriorDraws) -> Result<Vec<f64>> {
    if draws.n_draws == 0 {
        return Err(Error::EmptyDraws);
    }
    let mut best = 0usize;
    for s in 1..draws.n_draws {
        if draws.target_logdens[s] > draws.target_logdens[best] {
            best = s;
        }
    }
    Ok(draws.draw(best).to_vec())
}

/// A log-density on the unconstrained scale, with the mapping back to the
/// natural parameterization and the per-record raw log-likelihoods.
pub(crate) trait LogTarget {
    fn dim(&self) -> usize;
    fn param_names(&self) -> Vec<String>;
    fn initial_point(&self) -> Vec<f64>;
    fn log_density(&self, z: &[f64]) -> f64;
    fn natural_params(&self, z: &[f64]) -> Vec<f64>;
    fn raw_logliks(&self, z: &[f64], out: &mut [f64]);
    fn n_records(&self) -> usize;
}

const RHAT_LIMIT: f64 = 1.05;
const ACCEPT_FLOOR: f64 = 0.05;

/// Fit the posterior selected by `(weights, clamp)`: raw likelihood when all
/// weights are one and no clamp, the weighted pseudo posterior when weights
/// are given, and the censored posterior when a clamp bound `M` is set.
/// The model family follows the dataset: plain beta without covariates,
/// beta regression with them.
pub fn fit(
    data: &ConfidentialDataset,
    weights: &WeightVector,
    clamp: Option<f64>,
    config: &McmcConfig,
) -> Result<PosteriorDraws> {
    config.validate()?;
    if weights.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            actual: weights.len(),
        });
    }
    if let Some(m) = clamp {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::Domain(format!(
                "clamp bound M = {m} must be positive"
            )));
        }
    }
    let target_kind = if clamp.is_some() {
        TargetKind::Censored
    } else if weights.is_unit() {
        TargetKind::Unweighted
    } else {
        TargetKind::Pseudo
    };

    match data.covariates() {
        None => {
            let target = BetaTarget::new(data.values(), weights.alphas(), clamp);
            run_fit(target, target_kind, clamp, config)
        }
        Some(cov) => {
            let target = RegressionTarget::new(data.values(), cov, weights.alphas(), clamp);
            run_fit(target, target_kind, clamp, config)
        }
    }
}

fn run_fit<T: LogTarget>(
    target: T,
    target_kind: TargetKind,
    clamp: Option<f64>,
    config: &McmcConfig,
) -> Result<PosteriorDraws> {
    let dim = target.dim();
    let base = config.n_retain / config.n_chains;
    let rem = config.n_retain % config.n_chains;

    let mut chains = Vec::with_capacity(config.n_chains);
    for c in 0..config.n_chains {
        let keep = base + usize::from(c < rem);
        let mut rng = seed::rng_from(seed::derive(config.seed, &[tag::CHAIN, c as u64]));
        chains.push(run_chain(&target, config, keep, &mut rng));
    }

    let accept_rate = chains.iter().map(|c| c.accept_rate).sum::<f64>() / config.n_chains as f64;
    let rhat = split_rhat(&chains, dim);

    let diagnostics = FitDiagnostics {
        accept_rate,
        rhat: rhat.clone(),
        n_chains: config.n_chains,
        n_warmup: config.n_warmup,
        n_retained: chains.iter().map(|c| c.kept.len()).sum(),
    };

    if accept_rate < ACCEPT_FLOOR {
        return Err(Error::FitFailed(format!(
            "acceptance rate collapsed to {accept_rate:.4}"
        )));
    }
    if let Some(bad) = rhat.iter().find(|r| !r.is_finite() || **r > RHAT_LIMIT) {
        return Err(Error::FitFailed(format!(
            "split R-hat {bad:.4} above {RHAT_LIMIT} (all: {rhat:?})"
        )));
    }

    let n_records = target.n_records();
    let n_draws = diagnostics.n_retained;
    let mut params = Vec::with_capacity(n_draws * dim);
    let mut per_record = Vec::with_capacity(n_draws * n_records);
    let mut target_logdens = Vec::with_capacity(n_draws);
    let mut row = vec![0.0f64; n_records];
    for chain in &chains {
        for (z, lp) in chain.kept.iter().zip(&chain.kept_logp) {
            params.extend(target.natural_params(z));
            target.raw_logliks(z, &mut row);
            per_record.extend_from_slice(&row);
            target_logdens.push(*lp);
        }
    }

    Ok(PosteriorDraws {
        param_names: target.param_names(),
        params,
        n_params: dim,
        per_record_loglik: per_record,
        n_records,
        n_draws,
        target_logdens,
        target_kind,
        clamp,
        diagnostics,
    })
}

struct ChainRun {
    kept: Vec<Vec<f64>>,
    kept_logp: Vec<f64>,
    accept_rate: f64,
}

#[allow(clippy::too_many_arguments)]
fn step_once<T: LogTarget, R: Rng>(
    target: &T,
    z: &mut [f64],
    logp: &mut f64,
    proposal: &mut [f64],
    step: f64,
    scale: &[f64],
    rng: &mut R,
) -> f64 {
    for j in 0..z.len() {
        let noise: f64 = rng.sample(StandardNormal);
        proposal[j] = z[j] + step * scale[j] * noise;
    }
    let lp_new = target.log_density(proposal);
    let accept_prob = if lp_new.is_finite() {
        (lp_new - *logp).min(0.0).exp()
    } else {
        0.0
    };
    let u: f64 = rng.gen();
    if u < accept_prob {
        z.copy_from_slice(proposal);
        *logp = lp_new;
    }
    accept_prob
}

fn run_chain<T: LogTarget>(
    target: &T,
    config: &McmcConfig,
    n_keep: usize,
    rng: &mut impl Rng,
) -> ChainRun {
    let dim = target.dim();
    let mut z = target.initial_point();
    // Overdispersed chain starts so split R-hat can see disagreement.
    for zi in z.iter_mut() {
        let jitter: f64 = rng.sample(StandardNormal);
        *zi += 0.5 * jitter;
    }
    let mut logp = target.log_density(&z);

    let mut log_step = (2.38 / (dim as f64).sqrt()).ln();
    let mut scale = vec![1.0f64; dim];
    // Welford accumulators over the warmup trajectory.
    let mut mean = z.clone();
    let mut m2 = vec![0.0f64; dim];

    let mut proposal = vec![0.0f64; dim];

    for t in 0..config.n_warmup {
        let accept_prob = step_once(
            target,
            &mut z,
            &mut logp,
            &mut proposal,
            log_step.exp(),
            &scale,
            rng,
        );
        let gamma = ((t + 1) as f64).powf(-0.6);
        log_step += gamma * (accept_prob - config.adapt_target);

        let count = (t + 2) as f64; // the initial point seeds the accumulator
        for j in 0..dim {
            let delta = z[j] - mean[j];
            mean[j] += delta / count;
            m2[j] += delta * (z[j] - mean[j]);
        }
        if t >= 50 {
            for j in 0..dim {
                scale[j] = (m2[j] / (count - 1.0)).sqrt().max(1e-6);
            }
        }
    }

    let step = log_step.exp();
    let mut kept = Vec::with_capacity(n_keep);
    let mut kept_logp = Vec::with_capacity(n_keep);
    let mut accepted_mass = 0.0f64;
    let total = n_keep * config.thin;
    for t in 0..total {
        accepted_mass += step_once(target, &mut z, &mut logp, &mut proposal, step, &scale, rng);
        if (t + 1) % config.thin == 0 {
            kept.push(z.clone());
            kept_logp.push(logp);
        }
    }

    ChainRun {
        kept,
        kept_logp,
        accept_rate: if total == 0 {
            0.0
        } else {
            accepted_mass / total as f64
        },
    }
}

/// Split-chain R-hat per parameter. Each chain contributes its two halves,
/// so single-chain runs are still diagnosable.
fn split_rhat(chains: &[ChainRun], dim: usize) -> Vec<f64> {
    let min_len = chains.iter().map(|c| c.kept.len()).min().unwrap_or(0);
    let half = min_len / 2;
    if half < 2 {
        return vec![f64::INFINITY; dim];
    }
    (0..dim)
        .map(|j| {
            let mut seqs: Vec<Vec<f64>> = Vec::with_capacity(chains.len() * 2);
            for chain in chains {
                let vals: Vec<f64> = chain.kept.iter().map(|z| z[j]).collect();
                seqs.push(vals[..half].to_vec());
                seqs.push(vals[vals.len() - half..].to_vec());
            }
            rhat_from_sequences(&seqs)
        })
        .collect()
}

fn rhat_from_sequences(seqs: &[Vec<f64>]) -> f64 {
    let m = seqs.len() as f64;
    let n = seqs[0].len() as f64;
    let means: Vec<f64> = seqs.iter().map(|s| s.iter().sum::<f64>() / n).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = n / (m - 1.0) * means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>();
    let w = seqs
        .iter()
        .zip(&means)
        .map(|(s, mu)| s.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    if w <= 0.0 {
        return if b <= 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    (var_plus / w).sqrt()
}

// ---------------------------------------------------------------------------
// Model targets
// ---------------------------------------------------------------------------

/// Unconstrained-scale target for the plain beta synthesizer:
/// `z = (logit(phi), log(lambda - 0.1))`.
struct BetaTarget<'a> {
    log_x: Vec<f64>,
    log_1mx: Vec<f64>,
    weights: &'a [f64],
    clamp: Option<f64>,
    // Sufficient statistics for the unclamped pseudo likelihood.
    w_sum: f64,
    w_log_x: f64,
    w_log_1mx: f64,
    init: [f64; 2],
}

impl<'a> BetaTarget<'a> {
    fn new(values: &[f64], weights: &'a [f64], clamp: Option<f64>) -> Self {
        let log_x: Vec<f64> = values.iter().map(|x| x.ln()).collect();
        let log_1mx: Vec<f64> = values.iter().map(|x| (1.0 - x).ln()).collect();
        let w_sum = weights.iter().sum();
        let w_log_x = weights.iter().zip(&log_x).map(|(w, l)| w * l).sum();
        let w_log_1mx = weights.iter().zip(&log_1mx).map(|(w, l)| w * l).sum();

        let n = values.len() as f64;
        let mean = (values.iter().sum::<f64>() / n).clamp(0.01, 0.99);
        let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let lambda0 = if var > 1e-12 {
            (mean * (1.0 - mean) / var - 1.0).clamp(0.3, 500.0)
        } else {
            1.0
        };
        let init = [logit(mean), (lambda0 - model::LAMBDA_FLOOR).ln()];

        Self {
            log_x,
            log_1mx,
            weights,
            clamp,
            w_sum,
            w_log_x,
            w_log_1mx,
            init,
        }
    }

    fn transform(&self, z: &[f64]) -> (BetaParams, f64) {
        let phi = model::logistic(z[0]);
        let lambda = model::LAMBDA_FLOOR + z[1].exp();
        // d phi / d z0 = phi (1 - phi); d lambda / d z1 = exp(z1).
        let log_jac = phi.ln() + (1.0 - phi).ln() + z[1];
        (BetaParams { phi, lambda }, log_jac)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl LogTarget for BetaTarget<'_> {
    fn dim(&self) -> usize {
        2
    }

    fn param_names(&self) -> Vec<String> {
        vec!["phi".into(), "lambda".into()]
    }

    fn initial_point(&self) -> Vec<f64> {
        self.init.to_vec()
    }

    fn n_records(&self) -> usize {
        self.log_x.len()
    }

    fn log_density(&self, z: &[f64]) -> f64 {
        let (params, log_jac) = self.transform(z);
        let prior = model::log_prior(&params);
        if prior == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let (a, b) = (params.shape1(), params.shape2());
        let norm = -(statrs::function::gamma::ln_gamma(a) + statrs::function::gamma::ln_gamma(b)
            - statrs::function::gamma::ln_gamma(a + b));
        let lik = match self.clamp {
            None => norm * self.w_sum + (a - 1.0) * self.w_log_x + (b - 1.0) * self.w_log_1mx,
            Some(m) => {
                let mut sum = 0.0;
                for i in 0..self.log_x.len() {
                    let raw = norm + (a - 1.0) * self.log_x[i] + (b - 1.0) * self.log_1mx[i];
                    sum += model::weighted_loglik(raw, self.weights[i]).clamp(-m, m);
                }
                sum
            }
        };
        lik + prior + log_jac
    }

    fn natural_params(&self, z: &[f64]) -> Vec<f64> {
        let (params, _) = self.transform(z);
        vec![params.phi, params.lambda]
    }

    fn raw_logliks(&self, z: &[f64], out: &mut [f64]) {
        let (params, _) = self.transform(z);
        let (a, b) = (params.shape1(), params.shape2());
        let norm = -(statrs::function::gamma::ln_gamma(a) + statrs::function::gamma::ln_gamma(b)
            - statrs::function::gamma::ln_gamma(a + b));
        for i in 0..out.len() {
            out[i] = norm + (a - 1.0) * self.log_x[i] + (b - 1.0) * self.log_1mx[i];
        }
    }
}

/// Unconstrained-scale target for the beta-regression synthesizer:
/// `z = (coefficients..., log(lambda - 0.1))`.
struct RegressionTarget<'a> {
    log_x: Vec<f64>,
    log_1mx: Vec<f64>,
    cov: &'a crate::data::CovariateMatrix,
    weights: &'a [f64],
    clamp: Option<f64>,
    init: Vec<f64>,
}

impl<'a> RegressionTarget<'a> {
    fn new(
        values: &[f64],
        cov: &'a crate::data::CovariateMatrix,
        weights: &'a [f64],
        clamp: Option<f64>,
    ) -> Self {
        let n = values.len() as f64;
        let mean = (values.iter().sum::<f64>() / n).clamp(0.01, 0.99);
        let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let lambda0 = if var > 1e-12 {
            (mean * (1.0 - mean) / var - 1.0).clamp(0.3, 500.0)
        } else {
            1.0
        };
        let mut init = vec![0.0; cov.n_cols() + 2];
        init[0] = logit(mean);
        *init.last_mut().unwrap() = (lambda0 - model::LAMBDA_FLOOR).ln();
        Self {
            log_x: values.iter().map(|x| x.ln()).collect(),
            log_1mx: values.iter().map(|x| (1.0 - x).ln()).collect(),
            cov,
            weights,
            clamp,
            init,
        }
    }

    fn params_from(&self, z: &[f64]) -> BetaRegressionParams {
        let k = self.cov.n_cols() + 1;
        BetaRegressionParams {
            coefficients: z[..k].to_vec(),
            lambda: model::LAMBDA_FLOOR + z[k].exp(),
        }
    }

    fn record_loglik(&self, params: &BetaRegressionParams, i: usize) -> f64 {
        let eta = params.coefficients[0]
            + self
                .cov
                .row(i)
                .iter()
                .zip(&params.coefficients[1..])
                .map(|(x, c)| x * c)
                .sum::<f64>();
        let mu = model::logistic(eta).clamp(1e-12, 1.0 - 1e-12);
        let (a, b) = (params.lambda * mu, params.lambda * (1.0 - mu));
        -(statrs::function::gamma::ln_gamma(a) + statrs::function::gamma::ln_gamma(b)
            - statrs::function::gamma::ln_gamma(a + b))
            + (a - 1.0) * self.log_x[i]
            + (b - 1.0) * self.log_1mx[i]
    }
}

impl LogTarget for RegressionTarget<'_> {
    fn dim(&self) -> usize {
        self.cov.n_cols() + 2
    }

    fn param_names(&self) -> Vec<String> {
        let mut names = vec!["intercept".to_string()];
        names.extend(self.cov.names().iter().cloned());
        names.push("lambda".into());
        names
    }

    fn initial_point(&self) -> Vec<f64> {
        self.init.clone()
    }

    fn n_records(&self) -> usize {
        self.log_x.len()
    }

    fn log_density(&self, z: &[f64]) -> f64 {
        let params = self.params_from(z);
        let prior = model::log_prior_regression(&params);
        if prior == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let log_jac = z[z.len() - 1];
        let mut lik = 0.0;
        for i in 0..self.log_x.len() {
            let raw = self.record_loglik(&params, i);
            let contribution = model::weighted_loglik(raw, self.weights[i]);
            lik += match self.clamp {
                None => contribution,
                Some(m) => contribution.clamp(-m, m),
            };
        }
        lik + prior + log_jac
    }

    fn natural_params(&self, z: &[f64]) -> Vec<f64> {
        let params = self.params_from(z);
        let mut out = params.coefficients;
        out.push(params.lambda);
        out
    }

    fn raw_logliks(&self, z: &[f64], out: &mut [f64]) {
        let params = self.params_from(z);
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = self.record_loglik(&params, i);
        }
    }
}

//! Beta and beta-regression synthesizers: parameterizations, priors,
//! per-record log-likelihood contributions (plain, weighted, censored), and
//! predictive sampling.
//!
//! The beta synthesizer is parameterized by a mean `phi` and precision
//! `lambda`, with shape parameters `beta1 = lambda * phi` and
//! `beta2 = lambda * (1 - phi)`. The regression variant replaces `phi` with
//! a per-record logistic mean `mu_i = logistic(intercept + x_i . coefs)`
//! sharing the precision `lambda`.
//!
//! All likelihood arithmetic stays in log space; densities are only
//! exponentiated in reports.

use rand::Rng;
use rand_distr::{Beta as BetaDist, Distribution};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::data::{CovariateMatrix, SyntheticDataset};
use crate::error::{Error, Result};

/// Lower support point of the Pareto prior on the precision parameter.
pub const LAMBDA_FLOOR: f64 = 0.1;
/// Shape of the Pareto prior on the precision parameter.
pub const PARETO_SHAPE: f64 = 1.5;
/// Standard deviation of the independent normal priors on regression
/// coefficients.
pub const COEF_PRIOR_SD: f64 = 5.0;

/// Mean/precision parameters of the beta synthesizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    /// Mean, in (0, 1).
    pub phi: f64,
    /// Precision, above [`LAMBDA_FLOOR`].
    pub lambda: f64,
}

impl BetaParams {
    pub fn new(phi: f64, lambda: f64) -> Result<Self> {
        let p = Self { phi, lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi > 0.0 && self.phi < 1.0) || !self.phi.is_finite() {
            return Err(Error::Domain(format!("phi = {} not in (0, 1)", self.phi)));
        }
        if !(self.lambda > LAMBDA_FLOOR) || !self.lambda.is_finite() {
            return Err(Error::Domain(format!(
                "lambda = {} not above {LAMBDA_FLOOR}",
                self.lambda
            )));
        }
        Ok(())
    }

    /// First shape parameter, `lambda * phi`.
    pub fn shape1(&self) -> f64 {
        self.lambda * self.phi
    }

    /// Second shape parameter, `lambda * (1 - phi)`.
    pub fn shape2(&self) -> f64 {
        self.lambda * (1.0 - self.phi)
    }

    /// Mean/precision pair equivalent to classical shapes `(a, b)`.
    pub fn from_shapes(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) || !(b > 0.0) {
            return Err(Error::Domain(format!(
                "beta shapes ({a}, {b}) must be positive"
            )));
        }
        Self::new(a / (a + b), a + b)
    }
}

/// Coefficients (intercept first) and shared precision of the
/// beta-regression synthesizer.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaRegressionParams {
    pub coefficients: Vec<f64>,
    pub lambda: f64,
}

impl BetaRegressionParams {
    pub fn new(coefficients: Vec<f64>, lambda: f64) -> Result<Self> {
        let p = Self {
            coefficients,
            lambda,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.coefficients.is_empty() {
            return Err(Error::Domain(
                "regression needs at least an intercept".into(),
            ));
        }
        if self.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("non-finite regression coefficient".into()));
        }
        if !(self.lambda > LAMBDA_FLOOR) || !self.lambda.is_finite() {
            return Err(Error::Domain(format!(
                "lambda = {} not above {LAMBDA_FLOOR}",
                self.lambda
            )));
        }
        Ok(())
    }

    /// Per-record mean through the logit link. The linear predictor is
    /// `intercept + predictors . coefficients[1..]`.
    pub fn mean(&self, predictors: &[f64]) -> Result<f64> {
        if predictors.len() != self.coefficients.len() - 1 {
            return Err(Error::DimensionMismatch {
                expected: self.coefficients.len() - 1,
                actual: predictors.len(),
            });
        }
        let eta = self.coefficients[0]
            + predictors
                .iter()
                .zip(&self.coefficients[1..])
                .map(|(x, c)| x * c)
                .sum::<f64>();
        Ok(logistic(eta))
    }
}

/// Numerically stable logistic function.
pub fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn ln_beta_fn(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

fn check_unit_interval(x: f64) -> Result<()> {
    if !(x > 0.0 && x < 1.0) || !x.is_finite() {
        return Err(Error::Domain(format!("record value {x} not in (0, 1)")));
    }
    Ok(())
}

/// Log beta density at `x` under the mean/precision parameterization.
pub fn beta_loglik(x: f64, params: &BetaParams) -> Result<f64> {
    check_unit_interval(x)?;
    params.validate()?;
    let (a, b) = (params.shape1(), params.shape2());
    Ok((a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta_fn(a, b))
}

/// Gradient of [`beta_loglik`] with respect to `(phi, lambda)`.
pub fn beta_loglik_grad(x: f64, params: &BetaParams) -> Result<[f64; 2]> {
    check_unit_interval(x)?;
    params.validate()?;
    let (phi, lam) = (params.phi, params.lambda);
    let (a, b) = (params.shape1(), params.shape2());
    let d_phi = lam * (digamma(b) - digamma(a) + x.ln() - (1.0 - x).ln());
    let d_lam = digamma(lam) - phi * digamma(a) - (1.0 - phi) * digamma(b)
        + phi * x.ln()
        + (1.0 - phi) * (1.0 - x).ln();
    Ok([d_phi, d_lam])
}

/// Log beta-regression density at `x` given a covariate row.
pub fn beta_regression_loglik(
    x: f64,
    predictors: &[f64],
    params: &BetaRegressionParams,
) -> Result<f64> {
    check_unit_interval(x)?;
    params.validate()?;
    let mu = params.mean(predictors)?;
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::Domain(format!("record mean {mu} not in (0, 1)")));
    }
    let (a, b) = (params.lambda * mu, params.lambda * (1.0 - mu));
    Ok((a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta_fn(a, b))
}

/// One record's contribution to the (pseudo, censored) log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodContribution {
    pub record_index: usize,
    /// Raw log-likelihood `log p(x_i | theta)`, in nats.
    pub raw_loglik: f64,
    /// Downweighted contribution `alpha_i * raw_loglik`.
    pub weighted_loglik: f64,
    /// Weighted contribution clamped into `[-M, M]`.
    pub censored_loglik: f64,
    pub was_censored: bool,
}

/// Weight, then clamp, one record's log-likelihood. A zero weight always
/// yields a zero contribution, even for non-finite `raw_loglik`, so records
/// flagged out of the likelihood can never trip the clamp.
pub fn censored_contribution(
    record_index: usize,
    raw_loglik: f64,
    alpha: f64,
    clamp: f64,
) -> LikelihoodContribution {
    let weighted = weighted_loglik(raw_loglik, alpha);
    let censored = weighted.clamp(-clamp, clamp);
    LikelihoodContribution {
        record_index,
        raw_loglik,
        weighted_loglik: weighted,
        censored_loglik: censored,
        was_censored: weighted.abs() > clamp,
    }
}

/// `alpha * raw`, with the zero-weight convention `0 * anything = 0`.
pub fn weighted_loglik(raw: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        0.0
    } else {
        alpha * raw
    }
}

/// Log prior for the beta synthesizer: uniform on `phi`, Pareto
/// (scale [`LAMBDA_FLOOR`], shape [`PARETO_SHAPE`]) on `lambda`. Returns
/// negative infinity outside the support.
pub fn log_prior(params: &BetaParams) -> f64 {
    if !(params.phi > 0.0 && params.phi < 1.0) || !(params.lambda > LAMBDA_FLOOR) {
        return f64::NEG_INFINITY;
    }
    // Beta(1, 1) on phi contributes 0.
    PARETO_SHAPE.ln() + PARETO_SHAPE * LAMBDA_FLOOR.ln() - (PARETO_SHAPE + 1.0) * params.lambda.ln()
}

/// Log prior for the regression synthesizer: independent Normal(0, sd^2)
/// on each coefficient, the same Pareto prior on `lambda`.
pub fn log_prior_regression(params: &BetaRegressionParams) -> f64 {
    if !(params.lambda > LAMBDA_FLOOR) {
        return f64::NEG_INFINITY;
    }
    let norm_const = -0.5 * (2.0 * std::f64::consts::PI).ln() - COEF_PRIOR_SD.ln();
    let coef_term: f64 = params
        .coefficients
        .iter()
        .map(|c| norm_const - 0.5 * (c / COEF_PRIOR_SD).powi(2))
        .sum();
    coef_term + PARETO_SHAPE.ln() + PARETO_SHAPE * LAMBDA_FLOOR.ln()
        - (PARETO_SHAPE + 1.0) * params.lambda.ln()
}

/// Draw `n` records from the beta predictive distribution.
pub fn predictive_sample<R: Rng>(
    params: &BetaParams,
    n: usize,
    rng: &mut R,
) -> Result<SyntheticDataset> {
    params.validate()?;
    let dist = BetaDist::new(params.shape1(), params.shape2())
        .map_err(|e| Error::Domain(format!("invalid beta shapes: {e}")))?;
    Ok(SyntheticDataset::new(
        (0..n).map(|_| dist.sample(rng)).collect(),
    ))
}

/// Draw one record per covariate row from the regression predictive
/// distribution.
pub fn predictive_sample_regression<R: Rng>(
    params: &BetaRegressionParams,
    covariates: &CovariateMatrix,
    rng: &mut R,
) -> Result<SyntheticDataset> {
    params.validate()?;
    let mut values = Vec::with_capacity(covariates.n_rows());
    for i in 0..covariates.n_rows() {
        let mu = params.mean(covariates.row(i))?;
        let dist = BetaDist::new(params.lambda * mu, params.lambda * (1.0 - mu))
            .map_err(|e| Error::Domain(format!("invalid beta shapes: {e}")))?;
        values.push(dist.sample(rng));
    }
    Ok(SyntheticDataset::new(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn uniform_density_has_zero_loglik() {
        // Beta(1, 1) through the mean/precision parameterization.
        let p = BetaParams::new(0.5, 2.0).unwrap();
        assert!(beta_loglik(0.5, &p).unwrap().abs() < 1e-14);
        assert!(beta_loglik(0.123, &p).unwrap().abs() < 1e-14);
    }

    #[test]
    fn matches_gamma_function_oracle_at_frozen_point() {
        // Beta(0.5, 3) at x = 0.5, evaluated independently via mpmath.
        let p = BetaParams::new(0.5 / 3.5, 3.5).unwrap();
        assert_relative_eq!(
            beta_loglik(0.5, &p).unwrap(),
            -1.1042592919774891,
            epsilon = 1e-12
        );
    }

    #[test]
    fn boundary_is_a_domain_error() {
        let p = BetaParams::new(0.5, 2.0).unwrap();
        assert!(beta_loglik(0.0, &p).is_err());
        assert!(beta_loglik(1.0, &p).is_err());
        assert!(beta_loglik(-0.5, &p).is_err());
        assert!(BetaParams::new(0.5, 0.05).is_err());
        assert!(BetaParams::new(1.0, 2.0).is_err());
    }

    #[test]
    fn reparameterization_identity() {
        // Beta(0.5, 3) corresponds exactly to (phi, lambda) = (0.5/3.5, 3.5).
        let p = BetaParams::from_shapes(0.5, 3.0).unwrap();
        assert_relative_eq!(p.phi, 0.5 / 3.5, epsilon = 1e-15);
        assert_relative_eq!(p.lambda, 3.5, epsilon = 1e-15);
        let direct =
            |x: f64| (0.5 - 1.0) * x.ln() + (3.0 - 1.0) * (1.0 - x).ln() - ln_beta_fn(0.5, 3.0);
        for &x in &[0.01, 0.25, 0.5, 0.9, 0.999] {
            assert_relative_eq!(beta_loglik(x, &p).unwrap(), direct(x), epsilon = 1e-12);
        }
    }

    #[test]
    fn regression_with_zero_coefficients_reduces_to_uniform() {
        let p = BetaRegressionParams::new(vec![0.0, 0.0], 2.0).unwrap();
        assert_relative_eq!(
            beta_regression_loglik(0.5, &[3.7], &p).unwrap(),
            0.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn zero_coefficient_ignores_its_predictor() {
        let p = BetaRegressionParams::new(vec![0.3, 0.0], 4.0).unwrap();
        let a = beta_regression_loglik(0.4, &[-10.0], &p).unwrap();
        let b = beta_regression_loglik(0.4, &[55.0], &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn regression_matches_gamma_function_oracle() {
        // mu = logistic(0.4 + 0.5*1 - 0.25*2) = logistic(0.4); frozen via mpmath.
        let p = BetaRegressionParams::new(vec![0.4, 0.5, -0.25], 5.0).unwrap();
        assert_relative_eq!(
            beta_regression_loglik(0.3, &[1.0, 2.0], &p).unwrap(),
            -0.27089571369417068,
            epsilon = 1e-12
        );
    }

    #[test]
    fn regression_dimension_mismatch() {
        let p = BetaRegressionParams::new(vec![0.4, 0.5], 5.0).unwrap();
        assert!(matches!(
            beta_regression_loglik(0.3, &[1.0, 2.0], &p),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn censored_contribution_examples() {
        let c = censored_contribution(0, 0.6, 1.0, 1.5);
        assert_eq!((c.censored_loglik, c.was_censored), (0.6, false));

        let c = censored_contribution(0, -4.0, 1.0, 1.5);
        assert_eq!((c.censored_loglik, c.was_censored), (-1.5, true));

        // Weighting can move a contribution inside the clamp.
        let c = censored_contribution(0, -4.0, 0.25, 1.5);
        assert_eq!(c.weighted_loglik, -1.0);
        assert_eq!((c.censored_loglik, c.was_censored), (-1.0, false));
    }

    #[test]
    fn zero_weight_never_censors() {
        let c = censored_contribution(3, f64::NEG_INFINITY, 0.0, 1.5);
        assert_eq!(c.weighted_loglik, 0.0);
        assert_eq!(c.censored_loglik, 0.0);
        assert!(!c.was_censored);
    }

    #[test]
    fn log_prior_examples() {
        // Below the Pareto support.
        assert_eq!(
            log_prior(&BetaParams {
                phi: 0.5,
                lambda: 0.05
            }),
            f64::NEG_INFINITY
        );
        // Frozen direct Pareto pdf evaluation at lambda = 0.1 * e.
        let lam = 0.1 * std::f64::consts::E;
        assert_relative_eq!(
            log_prior(&BetaParams {
                phi: 0.5,
                lambda: lam
            }),
            0.20805020110221007,
            epsilon = 1e-12
        );
        // Flat on phi.
        let a = log_prior(&BetaParams {
            phi: 0.11,
            lambda: 2.0,
        });
        let b = log_prior(&BetaParams {
            phi: 0.97,
            lambda: 2.0,
        });
        assert_eq!(a, b);
    }

    #[test]
    fn predictive_sampling_is_deterministic_and_unbiased() {
        let p = BetaParams::new(0.5, 2.0).unwrap();
        let n = 100_000;
        let s1 = predictive_sample(&p, n, &mut rng_from(7)).unwrap();
        let s2 = predictive_sample(&p, n, &mut rng_from(7)).unwrap();
        assert_eq!(s1, s2);
        assert!(s1.values().iter().all(|v| *v > 0.0 && *v < 1.0));
        // Beta(1,1) mean 0.5, sd 1/sqrt(12): three standard errors.
        let mean = s1.values().iter().sum::<f64>() / n as f64;
        let se = (1.0 / 12.0f64).sqrt() / (n as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * se, "mean {mean}");

        let skew = BetaParams::new(1.0 / 7.0, 3.5).unwrap();
        let s = predictive_sample(&skew, n, &mut rng_from(11)).unwrap();
        let mean = s.values().iter().sum::<f64>() / n as f64;
        // Beta(0.5, 3) sd = sqrt(a*b/((a+b)^2 (a+b+1))).
        let var = 0.5 * 3.0 / (3.5f64.powi(2) * 4.5);
        let se = var.sqrt() / (n as f64).sqrt();
        assert!((mean - 1.0 / 7.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = rng_from(42);
        let h = 1e-6;
        for _ in 0..100 {
            let x: f64 = rng.gen_range(0.01..0.99);
            let phi: f64 = rng.gen_range(0.05..0.95);
            let lambda: f64 = rng.gen_range(0.3..20.0);
            let p = BetaParams { phi, lambda };
            let [g_phi, g_lam] = beta_loglik_grad(x, &p).unwrap();
            let f = |phi: f64, lambda: f64| beta_loglik(x, &BetaParams { phi, lambda }).unwrap();
            let num_phi = (f(phi + h, lambda) - f(phi - h, lambda)) / (2.0 * h);
            let num_lam = (f(phi, lambda + h) - f(phi, lambda - h)) / (2.0 * h);
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
            assert!(rel(g_phi, num_phi) < 1e-4, "phi grad {g_phi} vs {num_phi}");
            assert!(
                rel(g_lam, num_lam) < 1e-4,
                "lambda grad {g_lam} vs {num_lam}"
            );
        }
    }

    proptest! {
        #[test]
        fn clamp_is_idempotent(raw in -50.0f64..50.0, m in 0.01f64..10.0) {
            let first = censored_contribution(0, raw, 1.0, m);
            let second = censored_contribution(0, first.censored_loglik, 1.0, m);
            prop_assert_eq!(second.censored_loglik, first.censored_loglik);
            prop_assert!(!second.was_censored || first.censored_loglik.abs() > m);
        }

        #[test]
        fn censored_magnitude_never_exceeds_clamp(
            raw in -1e6f64..1e6,
            alpha in 0.0f64..=1.0,
            m in 1e-3f64..10.0,
        ) {
            let c = censored_contribution(0, raw, alpha, m);
            prop_assert!(c.censored_loglik.abs() <= m);
            prop_assert_eq!(c.was_censored, c.weighted_loglik.abs() > m);
        }

        #[test]
        fn weighting_is_monotone_in_alpha(
            raw in -100.0f64..100.0,
            a1 in 0.0f64..=1.0,
            a2 in 0.0f64..=1.0,
            m in 0.01f64..5.0,
        ) {
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            let c_lo = censored_contribution(0, raw, lo, m);
            let c_hi = censored_contribution(0, raw, hi, m);
            prop_assert!(c_lo.weighted_loglik.abs() <= c_hi.weighted_loglik.abs());
            // Censoring under the smaller weight implies censoring under the larger.
            prop_assert!(!c_lo.was_censored || c_hi.was_censored);
        }

        #[test]
        fn censored_sum_is_bounded(
            raws in proptest::collection::vec(-1e3f64..1e3, 1..50),
            m in 0.01f64..5.0,
        ) {
            let n = raws.len() as f64;
            let sum: f64 = raws
                .iter()
                .map(|r| censored_contribution(0, *r, 1.0, m).censored_loglik)
                .sum();
            prop_assert!(sum >= -n * m - 1e-9 && sum <= n * m + 1e-9);
        }
    }
}

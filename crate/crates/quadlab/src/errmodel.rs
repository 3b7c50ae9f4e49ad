//! The composite-rule error term and its treatment as an unbiased random
//! variable.
//!
//! For a rule with derivative order `n`, constant `C`, and `N'` partitions in
//! dimension `D`, the leading error is `D * fbar / (C * N'^(n/D))`, where
//! `fbar` averages the order-`n` derivative over all partition/axis terms.
//! When those derivative terms are only known up to a symmetric spread, the
//! error has zero mean and standard deviation
//! `sqrt(D) * sigma_bar / (C * N'^(n/D + 1/2))` — one extra half power of
//! `N'` over the worst case, independent of `D`.

use thiserror::Error;

use crate::grid::Rule;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ErrorModelError {
    #[error("partition count must be at least 1")]
    ZeroPartitions,
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("derivative standard deviations must be non-negative")]
    NegativeStd,
    #[error("expected {expected} per-term standard deviations (N' * D), got {got}")]
    PerTermLength { got: usize, expected: u128 },
    #[error(
        "average derivative std {sigma_bar} exceeds the two-point bound sqrt(2)*eta = {bound}"
    )]
    StdExceedsBound { sigma_bar: f64, bound: f64 },
    #[error("derivative bound must be non-negative")]
    NegativeBound,
}

/// Spread of the unknown order-`n` derivative terms: either the root mean
/// square across all `N' * D` terms, or one value per term.
#[derive(Debug, Clone, PartialEq)]
pub enum DerivativeStds {
    RmsAverage(f64),
    PerTerm(Vec<f64>),
}

/// Everything the error formulas need about one composite-rule setup.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorModel {
    rule: Rule,
    dimension: usize,
    partition_count: u64,
    derivative_bound: Option<f64>,
    stds: DerivativeStds,
}

impl ErrorModel {
    pub fn new(
        rule: Rule,
        dimension: usize,
        partition_count: u64,
        stds: DerivativeStds,
    ) -> Result<Self, ErrorModelError> {
        if dimension == 0 {
            return Err(ErrorModelError::ZeroDimension);
        }
        if partition_count == 0 {
            return Err(ErrorModelError::ZeroPartitions);
        }
        match &stds {
            DerivativeStds::RmsAverage(s) => {
                if *s < 0.0 {
                    return Err(ErrorModelError::NegativeStd);
                }
            }
            DerivativeStds::PerTerm(values) => {
                let expected = partition_count as u128 * dimension as u128;
                if values.len() as u128 != expected {
                    return Err(ErrorModelError::PerTermLength {
                        got: values.len(),
                        expected,
                    });
                }
                if values.iter().any(|&s| s < 0.0) {
                    return Err(ErrorModelError::NegativeStd);
                }
            }
        }
        Ok(Self {
            rule,
            dimension,
            partition_count,
            derivative_bound: None,
            stds,
        })
    }

    /// Attaches the known derivative magnitude bound `eta` (`|f^(n)| <= eta`
    /// in every direction), which caps the admissible spread at
    /// `sqrt(2) * eta`.
    pub fn with_derivative_bound(mut self, eta: f64) -> Result<Self, ErrorModelError> {
        if eta < 0.0 {
            return Err(ErrorModelError::NegativeBound);
        }
        let sigma_bar = self.rms_average_std();
        let bound = derivative_std_bound(eta);
        if sigma_bar > bound * (1.0 + 1e-12) {
            return Err(ErrorModelError::StdExceedsBound { sigma_bar, bound });
        }
        self.derivative_bound = Some(eta);
        Ok(self)
    }

    pub fn rule(&self) -> Rule {
        self.rule
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn partition_count(&self) -> u64 {
        self.partition_count
    }

    pub fn derivative_bound(&self) -> Option<f64> {
        self.derivative_bound
    }

    pub fn derivative_order(&self) -> u32 {
        self.rule.derivative_order()
    }

    pub fn error_constant(&self) -> f64 {
        self.rule.error_constant()
    }

    /// The root-mean-square derivative spread `sigma_bar` across all
    /// `N' * D` terms.
    pub fn rms_average_std(&self) -> f64 {
        match &self.stds {
            DerivativeStds::RmsAverage(s) => *s,
            DerivativeStds::PerTerm(values) => {
                let mean_sq =
                    values.iter().map(|s| s * s).sum::<f64>() / values.len() as f64;
                mean_sq.sqrt()
            }
        }
    }

    fn n_prime_pow(&self, extra: f64) -> f64 {
        let exponent = self.derivative_order() as f64 / self.dimension as f64 + extra;
        (self.partition_count as f64).powf(exponent)
    }
}

/// Leading composite-rule error `D * mean_derivative / (C * N'^(n/D))` given
/// the average order-`n` derivative over all terms.
pub fn newton_cotes_error(mean_derivative: f64, model: &ErrorModel) -> f64 {
    model.dimension as f64 * mean_derivative
        / (model.error_constant() * model.n_prime_pow(0.0))
}

/// Standard deviation of the zero-mean error,
/// `sqrt(D) * sigma_bar / (C * N'^(n/D + 1/2))`.
pub fn unbiased_error_std(model: &ErrorModel) -> f64 {
    (model.dimension as f64).sqrt() * model.rms_average_std()
        / (model.error_constant() * model.n_prime_pow(0.5))
}

/// Largest spread a variable bounded by `|x| <= eta` can have: `sqrt(2)*eta`,
/// attained by the 50/50 two-point distribution at the endpoints.
pub fn derivative_std_bound(eta: f64) -> f64 {
    assert!(eta >= 0.0, "eta must be >= 0");
    std::f64::consts::SQRT_2 * eta
}

/// Removes a known expected bias from an estimate.
pub fn bias_correct(estimate: f64, expected_error: f64) -> f64 {
    estimate + expected_error
}

/// Probability that all `N'` independent symmetric error terms share one
/// sign: `2^(1 - N')`.
pub fn worst_case_probability(n_prime: u64) -> f64 {
    assert!(n_prime >= 1, "partition count must be >= 1");
    (1.0 - n_prime as f64).exp2()
}

/// The decay exponent of the unbiased error std, `n/D + 1/2`.
pub fn theoretical_chi(rule: Rule, dimension: usize) -> f64 {
    assert!(dimension >= 1, "dimension must be >= 1");
    rule.derivative_order() as f64 / dimension as f64 + 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::{quadrature_integrate, FunctionOracle};

    fn model(rule: Rule, dimension: usize, n_prime: u64, sigma: f64) -> ErrorModel {
        ErrorModel::new(rule, dimension, n_prime, DerivativeStds::RmsAverage(sigma)).unwrap()
    }

    #[test]
    fn zero_mean_derivative_gives_zero_error() {
        let m = model(Rule::Midpoint, 3, 64, 1.0);
        assert_eq!(newton_cotes_error(0.0, &m), 0.0);
    }

    #[test]
    fn rectangular_error_matches_exact_left_rule_residual() {
        // f(x) = x on [0,1]: the left rule with N = 4 gives
        // (1/4) * (0 + 1/4 + 2/4 + 3/4) = 0.375 and the true value is 0.5.
        let oracle = FunctionOracle::new(1, |x| x[0]);
        let report = quadrature_integrate(&oracle, Rule::Rectangular, 1, 4).unwrap();
        let exact_residual = 0.5 - report.estimate;
        let m = model(Rule::Rectangular, 1, 4, 0.0);
        let predicted = newton_cotes_error(1.0, &m);
        assert_eq!(predicted, 0.125);
        assert!((predicted - exact_residual).abs() < 1e-15);
    }

    #[test]
    fn midpoint_error_matches_exact_quadratic_residual() {
        // f(x) = x^2 with N = 2 midpoints: estimate 0.3125 vs true 1/3.
        let oracle = FunctionOracle::new(1, |x| x[0] * x[0]);
        let report = quadrature_integrate(&oracle, Rule::Midpoint, 1, 2).unwrap();
        let exact_residual = 1.0 / 3.0 - report.estimate;
        let m = model(Rule::Midpoint, 1, 2, 0.0);
        let predicted = newton_cotes_error(2.0, &m);
        assert!((predicted - 1.0 / 48.0).abs() < 1e-16);
        assert!((predicted - exact_residual).abs() < 1e-15);
    }

    #[test]
    fn zero_spread_means_known_error() {
        let m = model(Rule::Rectangular, 2, 100, 0.0);
        assert_eq!(unbiased_error_std(&m), 0.0);
    }

    #[test]
    fn unbiased_std_scales_with_the_extra_half_power() {
        // Quadrupling N' must scale the std by 4^-(n/D + 1/2).
        for (rule, d) in [(Rule::Rectangular, 1), (Rule::Midpoint, 16)] {
            let a = unbiased_error_std(&model(rule, d, 16, 1.0));
            let b = unbiased_error_std(&model(rule, d, 64, 1.0));
            let expected = 4.0f64.powf(theoretical_chi(rule, d));
            assert!((a / b - expected).abs() < 1e-12 * expected);
        }
    }

    #[test]
    fn per_term_stds_reduce_to_their_rms() {
        let per_term = DerivativeStds::PerTerm(vec![1.0, 0.0, 2.0, 1.0, 3.0, 1.0]);
        let m = ErrorModel::new(Rule::Midpoint, 2, 3, per_term).unwrap();
        let rms = ((1.0 + 0.0 + 4.0 + 1.0 + 9.0 + 1.0) / 6.0f64).sqrt();
        assert!((m.rms_average_std() - rms).abs() < 1e-15);
        let avg = model(Rule::Midpoint, 2, 3, rms);
        assert_eq!(unbiased_error_std(&m), unbiased_error_std(&avg));
    }

    #[test]
    fn per_term_length_is_checked() {
        let err = ErrorModel::new(
            Rule::Midpoint,
            2,
            3,
            DerivativeStds::PerTerm(vec![1.0; 5]),
        )
        .unwrap_err();
        assert_eq!(
            err,
            ErrorModelError::PerTermLength {
                got: 5,
                expected: 6
            }
        );
    }

    #[test]
    fn two_point_bound_values() {
        assert_eq!(derivative_std_bound(1.0), std::f64::consts::SQRT_2);
        assert_eq!(derivative_std_bound(0.0), 0.0);
        // A uniform variable on [-eta, eta] has std eta/sqrt(3), well below.
        let eta = 0.8;
        let uniform_std = eta / 3.0f64.sqrt();
        assert!(uniform_std <= derivative_std_bound(eta));
    }

    #[test]
    fn bound_violation_is_rejected() {
        let err = model(Rule::Rectangular, 1, 4, 2.0)
            .with_derivative_bound(1.0)
            .unwrap_err();
        assert!(matches!(err, ErrorModelError::StdExceedsBound { .. }));
        let ok = model(Rule::Rectangular, 1, 4, 1.0)
            .with_derivative_bound(1.0)
            .unwrap();
        assert_eq!(ok.derivative_bound(), Some(1.0));
    }

    #[test]
    fn bounded_std_stays_under_the_eta_envelope() {
        let eta = 0.6;
        for n_prime in [1u64, 2, 16, 1024] {
            let m = model(Rule::Midpoint, 4, n_prime, eta / 3.0f64.sqrt())
                .with_derivative_bound(eta)
                .unwrap();
            let envelope = (2.0 * 4.0f64).sqrt() * eta
                / (m.error_constant()
                    * (n_prime as f64).powf(m.derivative_order() as f64 / 4.0 + 0.5));
            assert!(unbiased_error_std(&m) <= envelope * (1.0 + 1e-12));
        }
    }

    #[test]
    fn bias_correction_examples() {
        assert_eq!(bias_correct(0.42, 0.0), 0.42);
        assert_eq!(bias_correct(0.375, 0.125), 0.5);
        // Exact inverse of subtracting the same error.
        let estimate = 1.234567;
        let e = -0.0721;
        assert_eq!(bias_correct(estimate - e, e), estimate);
    }

    #[test]
    fn worst_case_probability_values() {
        assert_eq!(worst_case_probability(1), 1.0);
        assert_eq!(worst_case_probability(2), 0.5);
        assert!((worst_case_probability(11) - 9.765625e-4).abs() < 1e-18);

        // Oracle for N' = 2: of the four equally likely sign patterns
        // (++, +-, -+, --), exactly two are uniform.
        let patterns = [[1, 1], [1, -1], [-1, 1], [-1, -1]];
        let uniform = patterns
            .iter()
            .filter(|p| p[0] == p[1])
            .count() as f64;
        assert_eq!(worst_case_probability(2), uniform / patterns.len() as f64);
    }

    #[test]
    fn chi_values_and_limit() {
        assert_eq!(theoretical_chi(Rule::Rectangular, 2), 1.0);
        assert_eq!(theoretical_chi(Rule::Midpoint, 4), 1.0);
        let mut last = f64::INFINITY;
        for d in 1..200 {
            let chi = theoretical_chi(Rule::Midpoint, d);
            assert!(chi < last && chi > 0.5);
            last = chi;
        }
        assert!((theoretical_chi(Rule::Midpoint, 100_000) - 0.5) < 1e-4);
    }

    #[test]
    fn chi_is_always_half_above_the_error_exponent() {
        for rule in Rule::ALL {
            for d in 1..30 {
                let gap = theoretical_chi(rule, d) - rule.derivative_order() as f64 / d as f64;
                assert!((gap - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn std_to_worst_case_ratio_halves_when_partitions_quadruple() {
        let sigma = 0.9;
        let fbar = 1.7;
        for (rule, d) in [(Rule::Rectangular, 3), (Rule::Simpson, 2)] {
            let r = |n_prime: u64| {
                let m = model(rule, d, n_prime, sigma);
                unbiased_error_std(&m) / newton_cotes_error(fbar, &m)
            };
            let ratio = r(8) / r(32);
            assert!((ratio - 2.0).abs() < 1e-12);
        }
    }
}

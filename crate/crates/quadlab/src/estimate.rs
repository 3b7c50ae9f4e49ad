//! Integral estimates on the unit cube and their standard deviations.
//!
//! Monte Carlo estimates average the integrand at seeded i.i.d. uniform
//! points; quadrature estimates evaluate it on a rule's grid and weight the
//! values. When the integrand's population standard deviation is known, each
//! estimate also reports its theoretical standard deviation: `sigma/sqrt(N)`
//! for Monte Carlo and `(sigma/N') * sqrt(sum(q^2))` for a weighted rule.
//!
//! Empirical spreads use the population (divide-by-N) convention.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::{self, GridError, Rule};
use crate::sum::{compensated_sum, CompensatedSum};

/// Errors from estimation preconditions.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error("sample count must be at least 1")]
    EmptySample,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("weights must sum to the partition count {expected}, got {got}")]
    WeightSumMismatch { got: f64, expected: u64 },
    #[error("weights must be non-negative")]
    NegativeWeight,
    #[error("oracle dimension {oracle} does not match requested dimension {requested}")]
    DimensionMismatch { oracle: usize, requested: usize },
}

type Evaluator = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A black-box integrand on the unit cube.
///
/// The evaluator must be deterministic (the same point always yields the
/// same value) and finite everywhere. Known population statistics may be
/// attached so estimates can report their theoretical spread.
pub struct FunctionOracle {
    evaluator: Evaluator,
    dimension: usize,
    known_mean: Option<f64>,
    known_std: Option<f64>,
}

impl FunctionOracle {
    pub fn new<F>(dimension: usize, evaluator: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            evaluator: Box::new(evaluator),
            dimension,
            known_mean: None,
            known_std: None,
        }
    }

    /// Attaches the known integral value.
    pub fn with_known_mean(mut self, mean: f64) -> Self {
        self.known_mean = Some(mean);
        self
    }

    /// Attaches the known population standard deviation `sigma_f`.
    pub fn with_known_std(mut self, std: f64) -> Self {
        assert!(std >= 0.0, "population standard deviation must be >= 0");
        self.known_std = Some(std);
        self
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn known_mean(&self) -> Option<f64> {
        self.known_mean
    }

    pub fn known_std(&self) -> Option<f64> {
        self.known_std
    }

    pub fn evaluate(&self, point: &[f64]) -> f64 {
        debug_assert_eq!(point.len(), self.dimension);
        (self.evaluator)(point)
    }
}

impl std::fmt::Debug for FunctionOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FunctionOracle")
            .field("dimension", &self.dimension)
            .field("known_mean", &self.known_mean)
            .field("known_std", &self.known_std)
            .finish_non_exhaustive()
    }
}

/// How an estimate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    MonteCarlo,
    Quadrature(Rule),
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::MonteCarlo => "mc",
            Method::Quadrature(rule) => rule.name(),
        }
    }
}

/// An integral estimate with its provenance and spread.
///
/// `theoretical_std` is present exactly when the oracle's `sigma_f` is
/// known. `empirical_std` is the population standard deviation of the
/// sampled values divided by `sqrt(N)`; it is reported for Monte Carlo runs
/// only, since a deterministic rule has no sampling spread of its own.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub estimate: f64,
    pub method: Method,
    pub sample_count: u64,
    pub theoretical_std: Option<f64>,
    pub empirical_std: Option<f64>,
    pub seed: Option<u64>,
}

/// Monte Carlo estimate from `n` seeded i.i.d. uniform samples of the cube.
///
/// Sampling is with replacement; on a continuum a repeated point has
/// probability zero and the finite-population correction is immaterial.
/// Uniform variates carry the generator's full 53-bit mantissa resolution in
/// `[0, 1)`. Fixed `(oracle, n, seed)` inputs reproduce the report bit for
/// bit.
pub fn mc_integrate(
    oracle: &FunctionOracle,
    n: u64,
    seed: u64,
) -> Result<EstimateReport, EstimateError> {
    if n == 0 {
        return Err(EstimateError::EmptySample);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dimension = oracle.dimension();
    let mut point = vec![0.0f64; dimension];
    let mut sum = CompensatedSum::new();
    let mut sum_sq = CompensatedSum::new();
    for _ in 0..n {
        for coord in point.iter_mut() {
            *coord = rng.random::<f64>();
        }
        let value = oracle.evaluate(&point);
        sum.add(value);
        sum_sq.add(value * value);
    }
    let nf = n as f64;
    let mean = sum.total() / nf;
    let variance = (sum_sq.total() / nf - mean * mean).max(0.0);
    Ok(EstimateReport {
        estimate: mean,
        method: Method::MonteCarlo,
        sample_count: n,
        theoretical_std: oracle.known_std().map(|sigma| mc_theoretical_std(sigma, n)),
        empirical_std: Some(variance.sqrt() / nf.sqrt()),
        seed: Some(seed),
    })
}

/// Deterministic composite-rule estimate `(1/N') * sum(q_i * f_i)` over the
/// rule's `m^D` grid.
pub fn quadrature_integrate(
    oracle: &FunctionOracle,
    rule: Rule,
    dimension: usize,
    m: usize,
) -> Result<EstimateReport, EstimateError> {
    if oracle.dimension() != dimension {
        return Err(EstimateError::DimensionMismatch {
            oracle: oracle.dimension(),
            requested: dimension,
        });
    }
    let points = grid::build_grid(rule, dimension, m)?;
    let (q, n_prime) = grid::weights(rule, dimension, m)?;

    let mut sum = CompensatedSum::new();
    for (point, weight) in points.iter().zip(&q) {
        sum.add(weight * oracle.evaluate(point));
    }
    let estimate = sum.total() / n_prime as f64;

    let theoretical_std = match oracle.known_std() {
        Some(sigma) => Some(quad_std_unknown(&q, n_prime, sigma)?),
        None => None,
    };
    Ok(EstimateReport {
        estimate,
        method: Method::Quadrature(rule),
        sample_count: points.len() as u64,
        theoretical_std,
        empirical_std: None,
        seed: None,
    })
}

/// Theoretical Monte Carlo spread `sigma_f / sqrt(N)`.
pub fn mc_theoretical_std(sigma_f: f64, n: u64) -> f64 {
    assert!(sigma_f >= 0.0, "sigma_f must be >= 0");
    assert!(n >= 1, "sample count must be >= 1");
    sigma_f / (n as f64).sqrt()
}

/// Standard deviation of a weighted estimate when the integrand's values at
/// the sample points are unknown: `(sigma_f / N') * sqrt(sum(q_i^2))`.
///
/// The result always lies in `[sigma_f/sqrt(N), sigma_f]`; the lower end is
/// attained exactly at uniform weights and the upper end when a single
/// weight carries all of `N'`.
pub fn quad_std_unknown(q: &[f64], n_prime: u64, sigma_f: f64) -> Result<f64, EstimateError> {
    assert!(sigma_f >= 0.0, "sigma_f must be >= 0");
    if q.iter().any(|&w| w < 0.0) {
        return Err(EstimateError::NegativeWeight);
    }
    if !grid::weight_sum_is_consistent(q, n_prime) {
        return Err(EstimateError::WeightSumMismatch {
            got: compensated_sum(q.iter().copied()),
            expected: n_prime,
        });
    }
    let sum_sq = compensated_sum(q.iter().map(|&w| w * w));
    Ok(sigma_f / n_prime as f64 * sum_sq.sqrt())
}

/// The variance-minimizing weight vector: every entry `N'/N`, at which
/// [`quad_std_unknown`] collapses to the Monte Carlo value `sigma_f/sqrt(N)`.
pub fn min_variance_weights(n: u64, n_prime: u64) -> Vec<f64> {
    assert!(
        n_prime >= 1 && n_prime <= n,
        "partition count must satisfy 1 <= N' <= N"
    );
    vec![n_prime as f64 / n as f64; n as usize]
}

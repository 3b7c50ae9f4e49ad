//! Seeded, parallel simulation experiments.
//!
//! The centerpiece estimates the decay exponent `chi` of the unbiased
//! composite-rule error: each replicate draws every derivative term from a
//! uniform distribution on `[-eta, eta]`, forms the resulting error sample,
//! and the spread of many replicates is converted back to an exponent via
//! `chi_hat = log_N(sqrt(D) * sigma_bar / (C * sigma_hat))`. In theory
//! `chi = n/D + 1/2` for the rectangular and midpoint rules.
//!
//! Every replicate's generator is derived purely from the master seed and
//! the replicate's coordinates, so results are bit-identical at any thread
//! count.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::grid::{self, Rule};
use crate::sum::CompensatedSum;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("samples per replicate must be at least 1")]
    ZeroSamples,
    #[error("inner repetitions must be at least 2")]
    TooFewInnerReps,
    #[error("outer repetitions must be at least 2")]
    TooFewOuterReps,
    #[error("derivative bound must be positive")]
    NonPositiveBound,
    #[error("dimension list must not be empty")]
    NoDimensions,
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("cannot estimate a spread from an empty error sample")]
    EmptyErrorSample,
    #[error("error spread must be positive to estimate an exponent")]
    NonPositiveErrorStd,
    #[error("exponent estimation needs at least 2 samples per replicate")]
    TooFewSamplesForExponent,
    #[error("experiment needs at least 2 samples")]
    TooFewSamples,
    #[error("experiment needs at least 1 repetition")]
    ZeroReps,
    #[error("chain comparison needs at least 2 replicates")]
    TooFewReplicates,
    #[error("lag-1 correlation must satisfy |rho| < 1")]
    InvalidCorrelation,
    #[error("marginal standard deviation must be non-negative")]
    NegativeStd,
    #[error(
        "the error-exponent simulation needs a rule with one partition per \
         sample (rectangular or midpoint)"
    )]
    RuleNotSamplewise,
}

/// Derives the 32-byte generator seed for one replicate from the master
/// seed and three replicate coordinates. Distinct tuples give independent
/// streams; the mapping is pure, so parallel scheduling cannot affect
/// results.
pub fn derive_replicate_seed(master_seed: u64, a: u64, b: u64, c: u64) -> [u8; 32] {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&a.to_le_bytes());
    seed[16..24].copy_from_slice(&b.to_le_bytes());
    seed[24..32].copy_from_slice(&c.to_le_bytes());
    seed
}

/// Configuration of the error-exponent experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiSimConfig {
    pub rule: Rule,
    pub dimensions: Vec<usize>,
    /// Samples per replicate (`N`).
    pub samples_per_replicate: u64,
    /// Error samples per exponent estimate (`R`).
    pub inner_reps: usize,
    /// Independent repetitions of the whole estimate (`M`).
    pub outer_reps: usize,
    pub master_seed: u64,
    /// Derivative terms are uniform on `[-eta, eta]`.
    pub derivative_bound: f64,
}

impl ChiSimConfig {
    /// The reference configuration: `N = 2^16`, 100 inner samples, 10 outer
    /// repetitions, unit derivative bound, dimensions 1 through 16.
    pub fn standard(rule: Rule) -> Self {
        Self {
            rule,
            dimensions: vec![1, 2, 4, 8, 16],
            samples_per_replicate: 1 << 16,
            inner_reps: 100,
            outer_reps: 10,
            master_seed: 0,
            derivative_bound: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        // The error sample draws one derivative term per sample, which
        // identifies the partition count with N; only the rectangular and
        // midpoint rules tile that way. Higher-order rules have fewer
        // partitions than samples and would need a different sample shape.
        if !matches!(self.rule, Rule::Rectangular | Rule::Midpoint) {
            return Err(SimError::RuleNotSamplewise);
        }
        if self.samples_per_replicate == 0 {
            return Err(SimError::ZeroSamples);
        }
        if self.inner_reps < 2 {
            return Err(SimError::TooFewInnerReps);
        }
        if self.outer_reps < 2 {
            return Err(SimError::TooFewOuterReps);
        }
        if self.derivative_bound.is_nan() || self.derivative_bound <= 0.0 {
            return Err(SimError::NonPositiveBound);
        }
        if self.dimensions.is_empty() {
            return Err(SimError::NoDimensions);
        }
        if self.dimensions.contains(&0) {
            return Err(SimError::ZeroDimension);
        }
        Ok(())
    }

    /// Exact standard deviation of one derivative term, `eta / sqrt(3)`.
    pub fn derivative_std(&self) -> f64 {
        self.derivative_bound / 3.0f64.sqrt()
    }
}

/// One row of the exponent experiment, for a single dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiRow {
    pub dimension: usize,
    /// The worst-case decay exponent `n/D`.
    pub error_exponent: f64,
    /// The predicted spread decay exponent `n/D + 1/2`.
    pub theory_chi: f64,
    pub chi_hat_mean: f64,
    pub chi_hat_std: f64,
}

/// Full result of the exponent experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiResult {
    pub rows: Vec<ChiRow>,
    pub config: ChiSimConfig,
    pub runtime: Duration,
}

/// One simulated error sample: `N * D` derivative terms drawn uniformly
/// from `[-eta, eta]`, summed, and scaled by `1 / (C * N^(n/D + 1))`.
pub fn simulate_error_sample(
    config: &ChiSimConfig,
    dimension: usize,
    replicate_seed: [u8; 32],
) -> f64 {
    let n = config.samples_per_replicate;
    let eta = config.derivative_bound;
    let two_eta = 2.0 * eta;
    let mut rng = ChaCha8Rng::from_seed(replicate_seed);
    let mut acc = CompensatedSum::new();
    for _ in 0..n * dimension as u64 {
        acc.add(two_eta * rng.random::<f64>() - eta);
    }
    let exponent = config.rule.derivative_order() as f64 / dimension as f64 + 1.0;
    acc.total() / (config.rule.error_constant() * (n as f64).powf(exponent))
}

/// Root-mean-square spread of zero-mean error samples,
/// `sqrt((1/R) * sum(e_j^2))`.
pub fn estimate_error_std(errors: &[f64]) -> Result<f64, SimError> {
    if errors.is_empty() {
        return Err(SimError::EmptyErrorSample);
    }
    let mut acc = CompensatedSum::new();
    for &e in errors {
        acc.add(e * e);
    }
    Ok((acc.total() / errors.len() as f64).sqrt())
}

/// Converts an observed error spread back to a decay exponent:
/// `log_N(sqrt(D) * sigma_bar / (c_q * sigma_hat))`.
///
/// The constant `c_q` cancels against the same constant inside the simulated
/// samples, so the estimate does not depend on its value.
pub fn estimate_chi(
    sigma_hat: f64,
    dimension: usize,
    sigma_bar: f64,
    c_q: f64,
    n: u64,
) -> Result<f64, SimError> {
    if dimension == 0 {
        return Err(SimError::ZeroDimension);
    }
    if n < 2 {
        return Err(SimError::TooFewSamplesForExponent);
    }
    let positive = |x: f64| !x.is_nan() && x > 0.0;
    if !positive(sigma_hat) || !positive(sigma_bar) || !positive(c_q) {
        return Err(SimError::NonPositiveErrorStd);
    }
    let ratio = (dimension as f64).sqrt() * sigma_bar / (c_q * sigma_hat);
    Ok(ratio.ln() / (n as f64).ln())
}

/// Runs the full exponent experiment: for every configured dimension,
/// `M` independent exponent estimates of `R` error samples each, reported
/// as mean and spread of the `M` estimates.
pub fn run_chi_experiment(config: &ChiSimConfig) -> Result<ChiResult, SimError> {
    config.validate()?;
    let start = Instant::now();
    let sigma_bar = config.derivative_std();
    let c_q = config.rule.error_constant();
    let n = config.samples_per_replicate;
    let inner = config.inner_reps;
    let outer = config.outer_reps;

    let mut rows = Vec::with_capacity(config.dimensions.len());
    for &dimension in &config.dimensions {
        let errors: Vec<f64> = (0..outer * inner)
            .into_par_iter()
            .map(|job| {
                let seed = derive_replicate_seed(
                    config.master_seed,
                    dimension as u64,
                    (job / inner) as u64,
                    (job % inner) as u64,
                );
                simulate_error_sample(config, dimension, seed)
            })
            .collect();

        let mut chi_hats = Vec::with_capacity(outer);
        for block in errors.chunks_exact(inner) {
            let sigma_hat = estimate_error_std(block)?;
            chi_hats.push(estimate_chi(sigma_hat, dimension, sigma_bar, c_q, n)?);
        }
        let m = chi_hats.len() as f64;
        let mean = chi_hats.iter().sum::<f64>() / m;
        let variance =
            chi_hats.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / m;
        rows.push(ChiRow {
            dimension,
            error_exponent: config.rule.derivative_order() as f64 / dimension as f64,
            theory_chi: crate::errmodel::theoretical_chi(config.rule, dimension),
            chi_hat_mean: mean,
            chi_hat_std: variance.sqrt(),
        });
    }
    Ok(ChiResult {
        rows,
        config: config.clone(),
        runtime: start.elapsed(),
    })
}

/// A function whose values are unknown until sampled: every fresh point
/// draws from the generating distribution, and the draw is memoized so that
/// sampling the same location again returns the same value.
#[derive(Debug, Clone, Default)]
pub struct UnknownFunction {
    mean: f64,
    std: f64,
    memo: HashMap<Vec<u64>, f64>,
}

impl UnknownFunction {
    pub fn new(mean: f64, std: f64) -> Self {
        Self {
            mean,
            std,
            memo: HashMap::new(),
        }
    }

    pub fn evaluate<R: Rng>(&mut self, point: &[f64], rng: &mut R) -> f64 {
        let key: Vec<u64> = point.iter().map(|c| c.to_bits()).collect();
        if let Some(&value) = self.memo.get(&key) {
            return value;
        }
        let z: f64 = StandardNormal.sample(rng);
        let value = self.mean + self.std * z;
        self.memo.insert(key, value);
        value
    }

    /// Number of distinct locations sampled so far.
    pub fn sampled_locations(&self) -> usize {
        self.memo.len()
    }
}

/// Aggregate statistics of the unknown-function comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct UnknownFnSummary {
    pub quadrature_mean: f64,
    pub quadrature_std: f64,
    pub mc_mean: f64,
    pub mc_std: f64,
    pub samples: usize,
    pub reps: usize,
}

/// Samples a fresh unknown function per repetition — standard normal values
/// with memoized collapse — once on a midpoint grid and once at uniform
/// random points, `samples` evaluations each, and pools population
/// statistics across all repetitions.
///
/// Because an unsampled location is as random as any other, both sampling
/// schemes see i.i.d. values and their statistics agree for every dimension.
pub fn unknown_function_experiment(
    dimension: usize,
    samples: usize,
    reps: usize,
    seed: u64,
) -> Result<UnknownFnSummary, SimError> {
    unknown_function_experiment_with(dimension, samples, reps, seed, 0.0, 1.0)
}

/// [`unknown_function_experiment`] with an explicit generating distribution.
pub fn unknown_function_experiment_with(
    dimension: usize,
    samples: usize,
    reps: usize,
    seed: u64,
    dist_mean: f64,
    dist_std: f64,
) -> Result<UnknownFnSummary, SimError> {
    if dimension == 0 {
        return Err(SimError::ZeroDimension);
    }
    if samples < 2 {
        return Err(SimError::TooFewSamples);
    }
    if reps == 0 {
        return Err(SimError::ZeroReps);
    }
    if dist_std < 0.0 {
        return Err(SimError::NegativeStd);
    }

    // The smallest midpoint grid with at least `samples` points; the first
    // `samples` of them in lexicographic order are the quadrature locations.
    let mut m = (samples as f64).powf(1.0 / dimension as f64).floor() as usize;
    m = m.max(1);
    while (m as u64).saturating_pow(dimension as u32) < samples as u64 {
        m += 1;
    }
    let grid_points = grid::build_grid(Rule::Midpoint, dimension, m)
        .expect("midpoint accepts any m >= 1");

    let partials: Vec<[f64; 4]> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::from_seed(derive_replicate_seed(
                seed,
                u64::MAX,
                rep as u64,
                0,
            ));
            let mut function = UnknownFunction::new(dist_mean, dist_std);
            let mut q_sum = CompensatedSum::new();
            let mut q_sum_sq = CompensatedSum::new();
            for point in grid_points.iter().take(samples) {
                let v = function.evaluate(point, &mut rng);
                q_sum.add(v);
                q_sum_sq.add(v * v);
            }
            let mut mc_sum = CompensatedSum::new();
            let mut mc_sum_sq = CompensatedSum::new();
            let mut point = vec![0.0f64; dimension];
            for _ in 0..samples {
                for coord in point.iter_mut() {
                    *coord = rng.random::<f64>();
                }
                let v = function.evaluate(&point, &mut rng);
                mc_sum.add(v);
                mc_sum_sq.add(v * v);
            }
            [
                q_sum.total(),
                q_sum_sq.total(),
                mc_sum.total(),
                mc_sum_sq.total(),
            ]
        })
        .collect();

    let mut totals = [CompensatedSum::new(); 4];
    for partial in &partials {
        for (acc, &value) in totals.iter_mut().zip(partial) {
            acc.add(value);
        }
    }
    let count = (samples * reps) as f64;
    let pooled = |sum: f64, sum_sq: f64| {
        let mean = sum / count;
        let variance = (sum_sq / count - mean * mean).max(0.0);
        (mean, variance.sqrt())
    };
    let (quadrature_mean, quadrature_std) = pooled(totals[0].total(), totals[1].total());
    let (mc_mean, mc_std) = pooled(totals[2].total(), totals[3].total());
    Ok(UnknownFnSummary {
        quadrature_mean,
        quadrature_std,
        mc_mean,
        mc_std,
        samples,
        reps,
    })
}

/// Configuration of the autocorrelated-chain variance comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct McmcCompareConfig {
    pub chain_length: u64,
    /// Lag-1 correlation of the stationary chain.
    pub lag1_correlation: f64,
    pub replicates: usize,
    pub seed: u64,
    pub marginal_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcCompareResult {
    /// Variance of the chain mean across replicates.
    pub empirical_variance: f64,
    /// `tau * sigma_f^2 / N`.
    pub theory_variance: f64,
    /// Integrated autocorrelation time `tau = (1 + rho) / (1 - rho)`.
    pub tau: f64,
}

/// Simulates stationary lag-1 autoregressive chains and compares the
/// spread of their means against the autocorrelation-time prediction.
/// With `rho = 0` the chain is i.i.d. sampling and `tau = 1`.
pub fn mcmc_variance_compare(config: &McmcCompareConfig) -> Result<McmcCompareResult, SimError> {
    let rho = config.lag1_correlation;
    if rho.is_nan() || rho.abs() >= 1.0 {
        return Err(SimError::InvalidCorrelation);
    }
    if config.chain_length == 0 {
        return Err(SimError::ZeroSamples);
    }
    if config.replicates < 2 {
        return Err(SimError::TooFewReplicates);
    }
    if config.marginal_std < 0.0 {
        return Err(SimError::NegativeStd);
    }
    let sigma = config.marginal_std;
    let innovation_scale = sigma * (1.0 - rho * rho).sqrt();
    let n = config.chain_length;

    let means: Vec<f64> = (0..config.replicates)
        .into_par_iter()
        .map(|replicate| {
            let mut rng = ChaCha8Rng::from_seed(derive_replicate_seed(
                config.seed,
                u64::MAX - 1,
                replicate as u64,
                0,
            ));
            let z0: f64 = StandardNormal.sample(&mut rng);
            let mut x = sigma * z0;
            let mut acc = CompensatedSum::new();
            acc.add(x);
            for _ in 1..n {
                let z: f64 = StandardNormal.sample(&mut rng);
                x = rho * x + innovation_scale * z;
                acc.add(x);
            }
            acc.total() / n as f64
        })
        .collect();

    let r = means.len() as f64;
    let grand = means.iter().sum::<f64>() / r;
    let empirical_variance =
        means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() / r;
    let tau = (1.0 + rho) / (1.0 - rho);
    Ok(McmcCompareResult {
        empirical_variance,
        theory_variance: tau * sigma * sigma / n as f64,
        tau,
    })
}

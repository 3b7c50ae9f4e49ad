//! Uniform tensor-product sampling grids on the unit cube, composite rule
//! weight vectors, and partition counts.
//!
//! A grid is the `D`-fold tensor product of `m` equally spaced axis nodes.
//! Node placement depends on the rule: the rectangular rule samples left
//! cell edges, the midpoint rule samples cell centers, and the trapezoidal
//! and Simpson rules sample the closed nodes `i/(m-1)`.
//!
//! Weight vectors are normalized so that the integral estimate is
//! `(1/N') * sum(q_i * f_i)` with `sum(q_i) = N'`, where `N'` is the number
//! of partitions the composite rule tiles the cube with. Under this
//! convention the rectangular and midpoint rules have all weights equal to
//! one and reduce to the plain sample mean.

use std::fmt;

use thiserror::Error;

use crate::sum::compensated_sum;

/// Tolerance for the floating-point weight-sum identity `sum(q) = N'`.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// Errors from grid, weight, and partition-count construction.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    /// The per-axis point count is too small (or has the wrong parity) for
    /// the requested rule.
    #[error("{rule} rule requires {requirement} points per axis, got {got}")]
    InvalidPointsPerAxis {
        rule: Rule,
        requirement: &'static str,
        got: usize,
    },
    /// Grids are only defined for `D >= 1`.
    #[error("dimension must be at least 1")]
    ZeroDimension,
    /// `m^D` does not fit in the sample budget.
    #[error("{points_per_axis}^{dimension} grid points overflow the 64-bit sample budget")]
    TooManyPoints {
        points_per_axis: usize,
        dimension: usize,
    },
    /// A total sample count that is not an exact `D`-th power of an integer.
    #[error("sample count {total_points} is not a perfect {dimension}-th power")]
    NotAPerfectPower {
        total_points: u64,
        dimension: usize,
    },
}

/// The supported composite Newton-Cotes rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    /// Left cell edges, order-1 derivative error term.
    Rectangular,
    /// Cell centers, order-2 derivative error term.
    Midpoint,
    /// Closed nodes with end weights halved, order-2 derivative error term.
    Trapezoidal,
    /// Closed nodes with 1-4-2-...-4-1 panel weights, order-4 error term.
    Simpson,
}

impl Rule {
    /// All rules, in increasing polynomial order.
    pub const ALL: [Rule; 4] = [
        Rule::Rectangular,
        Rule::Midpoint,
        Rule::Trapezoidal,
        Rule::Simpson,
    ];

    /// Number of derivatives in the rule's leading error term (`n_Q`).
    pub fn derivative_order(self) -> u32 {
        match self {
            Rule::Rectangular => 1,
            Rule::Midpoint | Rule::Trapezoidal => 2,
            Rule::Simpson => 4,
        }
    }

    /// The 1-D composite error constant (`C_Q`).
    ///
    /// The rectangular and midpoint constants are pinned by exact closed-form
    /// errors on affine and quadratic integrands; the trapezoidal and Simpson
    /// constants are the classical composite values and are not
    /// exactness-verified here.
    pub fn error_constant(self) -> f64 {
        match self {
            Rule::Rectangular => 2.0,
            Rule::Midpoint => 24.0,
            Rule::Trapezoidal => 12.0,
            Rule::Simpson => 180.0,
        }
    }

    /// Smallest admissible number of points per axis.
    pub fn min_points_per_axis(self) -> usize {
        match self {
            Rule::Rectangular | Rule::Midpoint => 1,
            Rule::Trapezoidal => 2,
            Rule::Simpson => 3,
        }
    }

    /// Lower-case rule name as used by the command-line interface.
    pub fn name(self) -> &'static str {
        match self {
            Rule::Rectangular => "rectangular",
            Rule::Midpoint => "midpoint",
            Rule::Trapezoidal => "trapezoidal",
            Rule::Simpson => "simpson",
        }
    }

    /// Checks the per-axis point count for this rule. Simpson additionally
    /// needs an odd count so the 1-4-...-4-1 panels close.
    pub fn validate_points_per_axis(self, m: usize) -> Result<(), GridError> {
        let ok = match self {
            Rule::Simpson => m >= 3 && m % 2 == 1,
            _ => m >= self.min_points_per_axis(),
        };
        if ok {
            Ok(())
        } else {
            let requirement = match self {
                Rule::Rectangular | Rule::Midpoint => "at least 1",
                Rule::Trapezoidal => "at least 2",
                Rule::Simpson => "an odd count of at least 3",
            };
            Err(GridError::InvalidPointsPerAxis {
                rule: self,
                requirement,
                got: m,
            })
        }
    }

    /// Partitions per axis for `m` points per axis.
    fn partitions_per_axis(self, m: usize) -> u64 {
        match self {
            Rule::Rectangular | Rule::Midpoint => m as u64,
            Rule::Trapezoidal => (m - 1) as u64,
            Rule::Simpson => (m - 2) as u64,
        }
    }

    /// The 1-D axis nodes for `m` points per axis.
    fn axis_nodes(self, m: usize) -> Vec<f64> {
        let mf = m as f64;
        match self {
            Rule::Rectangular => (0..m).map(|i| i as f64 / mf).collect(),
            Rule::Midpoint => (0..m).map(|i| (i as f64 + 0.5) / mf).collect(),
            Rule::Trapezoidal | Rule::Simpson => {
                (0..m).map(|i| i as f64 / (m - 1) as f64).collect()
            }
        }
    }

    /// The 1-D weight vector, scaled so it sums to the per-axis partition
    /// count.
    fn axis_weights(self, m: usize) -> Vec<f64> {
        match self {
            Rule::Rectangular | Rule::Midpoint => vec![1.0; m],
            Rule::Trapezoidal => {
                let mut q = vec![1.0; m];
                q[0] = 0.5;
                q[m - 1] = 0.5;
                q
            }
            Rule::Simpson => {
                // Panel weights 1, 4, 2, ..., 4, 1 sum to 3(m-1); rescale so
                // the vector sums to the m-2 partitions instead.
                let scale = (m - 2) as f64 / (3.0 * (m - 1) as f64);
                (0..m)
                    .map(|i| {
                        let w = if i == 0 || i == m - 1 {
                            1.0
                        } else if i % 2 == 1 {
                            4.0
                        } else {
                            2.0
                        };
                        scale * w
                    })
                    .collect()
            }
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A validated `(D, m)` pair describing an `m^D`-point tensor grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    dimension: usize,
    points_per_axis: usize,
}

impl GridSpec {
    pub fn new(dimension: usize, points_per_axis: usize) -> Result<Self, GridError> {
        if dimension == 0 {
            return Err(GridError::ZeroDimension);
        }
        let spec = Self {
            dimension,
            points_per_axis,
        };
        // Reject anything whose total point count cannot be represented.
        spec.checked_total().map(|_| spec)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    /// Total point count `N = m^D`, exact in integer arithmetic.
    pub fn total_points(&self) -> u64 {
        self.checked_total().expect("validated at construction")
    }

    fn checked_total(&self) -> Result<u64, GridError> {
        let m = self.points_per_axis as u64;
        let mut total: u64 = 1;
        for _ in 0..self.dimension {
            total = total
                .checked_mul(m)
                .ok_or(GridError::TooManyPoints {
                    points_per_axis: self.points_per_axis,
                    dimension: self.dimension,
                })?;
        }
        Ok(total)
    }
}

/// Builds the rule's `m^D` grid points in lexicographic axis order (the
/// first coordinate varies slowest). Output is deterministic and
/// bit-identical across calls.
pub fn build_grid(rule: Rule, dimension: usize, m: usize) -> Result<Vec<Vec<f64>>, GridError> {
    rule.validate_points_per_axis(m)?;
    let spec = GridSpec::new(dimension, m)?;
    let nodes = rule.axis_nodes(m);
    let total = spec.total_points() as usize;

    let mut points = Vec::with_capacity(total);
    let mut index = vec![0usize; dimension];
    for _ in 0..total {
        points.push(index.iter().map(|&i| nodes[i]).collect());
        // Odometer increment with the last axis fastest.
        for axis in (0..dimension).rev() {
            index[axis] += 1;
            if index[axis] < m {
                break;
            }
            index[axis] = 0;
        }
    }
    Ok(points)
}

/// Tensor-product weight vector for the rule on an `m^D` grid, together with
/// the partition count `N'`. The vector has length `m^D` and sums to `N'`.
pub fn weights(rule: Rule, dimension: usize, m: usize) -> Result<(Vec<f64>, u64), GridError> {
    rule.validate_points_per_axis(m)?;
    let spec = GridSpec::new(dimension, m)?;
    let axis = rule.axis_weights(m);
    let total = spec.total_points() as usize;

    let n_prime = checked_pow(rule.partitions_per_axis(m), dimension).ok_or(
        GridError::TooManyPoints {
            points_per_axis: m,
            dimension,
        },
    )?;

    let mut q = Vec::with_capacity(total);
    let mut index = vec![0usize; dimension];
    for _ in 0..total {
        q.push(index.iter().map(|&i| axis[i]).product());
        for d in (0..dimension).rev() {
            index[d] += 1;
            if index[d] < m {
                break;
            }
            index[d] = 0;
        }
    }
    Ok((q, n_prime))
}

/// Partition count `N'` for a total of `N = m^D` samples.
///
/// Rectangular and midpoint tile one partition per sample (`N' = N`); the
/// trapezoidal rule yields `(m-1)^D` and Simpson `(m-2)^D`.
///
/// Note the Simpson law counts `m-2` partitions per axis, so a 3-point axis
/// counts a single partition even though composite Simpson on `m` points has
/// `(m-1)/2` panels; the partition law and the weight vector are therefore
/// deliberately independent quantities.
pub fn partition_count(rule: Rule, total_points: u64, dimension: usize) -> Result<u64, GridError> {
    if dimension == 0 {
        return Err(GridError::ZeroDimension);
    }
    let m = exact_root(total_points, dimension).ok_or(GridError::NotAPerfectPower {
        total_points,
        dimension,
    })?;
    rule.validate_points_per_axis(m as usize)?;
    checked_pow(rule.partitions_per_axis(m as usize), dimension).ok_or(GridError::TooManyPoints {
        points_per_axis: m as usize,
        dimension,
    })
}

/// Exact integer `d`-th root: returns `m` with `m^d == n`, if one exists.
fn exact_root(n: u64, d: usize) -> Option<u64> {
    if d == 1 {
        return Some(n);
    }
    if n == 0 {
        return Some(0);
    }
    let guess = (n as f64).powf(1.0 / d as f64).round() as u64;
    (guess.saturating_sub(2)..=guess + 2).find(|&m| checked_pow(m, d) == Some(n))
}

fn checked_pow(base: u64, exp: usize) -> Option<u64> {
    let mut out: u64 = 1;
    for _ in 0..exp {
        out = out.checked_mul(base)?;
    }
    Some(out)
}

/// Floating-point check that a weight vector sums to its partition count.
pub fn weight_sum_is_consistent(q: &[f64], n_prime: u64) -> bool {
    let sum = compensated_sum(q.iter().copied());
    let scale = (n_prime as f64).max(1.0);
    (sum - n_prime as f64).abs() <= WEIGHT_SUM_TOLERANCE * scale
}

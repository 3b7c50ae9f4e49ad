//! Monte Carlo and composite Newton-Cotes integration on the unit `D`-cube.
//!
//! The crate has five pieces:
//!
//! - [`grid`]: uniform tensor-product sampling grids, composite rule weights,
//!   and partition counts for the rectangular, midpoint, trapezoidal, and
//!   Simpson rules.
//! - [`estimate`]: integral estimates and their theoretical/empirical
//!   standard deviations, for seeded Monte Carlo and for grid quadrature.
//! - [`discrete`]: the finite "deck" sampling model — multivariate
//!   hypergeometric draws, grid-conditional distributions under prior
//!   knowledge, shuffle marginalization, and law-of-total-variance checks,
//!   all exactly enumerable in rational arithmetic.
//! - [`errmodel`]: the composite-rule error term, the standard deviation of
//!   the unbiased error with its `N^-(n/D + 1/2)` decay, bias correction,
//!   and the worst-case sign-agreement probability.
//! - [`simlab`]: seeded, parallel experiments — the error-exponent
//!   simulation, the unknown-function comparison, and the autocorrelated
//!   chain variance check.
//!
//! Every randomized operation takes an explicit seed and is bit-reproducible
//! at any level of parallelism.

pub mod discrete;
pub mod errmodel;
pub mod estimate;
pub mod grid;
pub mod simlab;

mod sum;

//! The finite "deck" sampling model.
//!
//! A deck is an arrangement of `K` values over positions `0..K`; its
//! spectrum records how many positions carry each distinct value. Drawing
//! `N` positions uniformly without replacement induces the multivariate
//! hypergeometric distribution over the vector of per-value draw counts.
//!
//! Grid sampling reads `N` fixed positions instead. What the reader knows
//! beforehand is a [`KnowledgeState`]: the spectrum (always fully known)
//! plus the set of arrangements consistent with any prior information,
//! carried extensionally with a uniform posterior. Averaging the
//! grid-conditional count distribution over every size-`N` grid must
//! reproduce the hypergeometric one — shuffling the deck and fixing the grid
//! is the same experiment as fixing the deck and drawing at random. That
//! identity, and the law-of-total-variance consequence that the expected
//! grid-conditional variance never exceeds the without-replacement variance,
//! are checked here by exhaustive enumeration.
//!
//! Two arithmetic modes are provided: exact rationals (`i128`-backed) for
//! identity proofs on small decks, and floating point for larger randomized
//! sweeps.
//!
//! The spectrum itself is always fully known; only positional knowledge
//! varies. Uncertainty about the spectrum would be a further marginalization
//! layer and is not modeled here.

use std::collections::BTreeMap;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Signed, Zero};
use thiserror::Error;

/// Exact scalar for deck values and probabilities.
pub type Rational = Ratio<i128>;

/// Hard cap on how many admissible arrangements an enumeration will build.
pub const MAX_ENUMERABLE_ARRANGEMENTS: u128 = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiscreteError {
    #[error("deck must contain at least one card")]
    EmptyDeck,
    #[error("spectrum multiplicities must be at least 1")]
    ZeroMultiplicity,
    #[error("spectrum values must be distinct")]
    DuplicateValue,
    #[error("at most 255 distinct values are supported, got {got}")]
    TooManyDistinctValues { got: usize },
    #[error("draw count must be at least 1")]
    EmptyDraw,
    #[error("draw count {n} exceeds deck size {k}")]
    DrawTooLarge { n: usize, k: usize },
    #[error("count vector has {got} entries, spectrum has {expected} distinct values")]
    CountShape { got: usize, expected: usize },
    #[error("grid positions must be distinct, in range, and non-empty")]
    InvalidGrid,
    #[error("pin position {position} is out of range or pinned twice")]
    InvalidPin { position: usize },
    #[error("no arrangement is consistent with the prior information")]
    EmptyAdmissible,
    #[error("arrangement does not realize the spectrum")]
    SpectrumMismatch,
    #[error("{arrangements} admissible arrangements exceed the enumeration cap {limit}")]
    EnumerationTooLarge { arrangements: u128, limit: u128 },
    #[error("exact arithmetic overflowed; deck values are too large")]
    ArithmeticOverflow,
    #[error("cannot parse {0:?} as a rational value")]
    InvalidValue(String),
}

/// Parses an integer (`3`), decimal (`-1.25`), or fraction (`2/3`) literal
/// into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational, DiscreteError> {
    let s = text.trim();
    let err = || DiscreteError::InvalidValue(text.to_string());
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    if body.is_empty() {
        return Err(err());
    }
    let magnitude = if let Some((numer, denom)) = body.split_once('/') {
        let n: i128 = numer.parse().map_err(|_| err())?;
        let d: i128 = denom.parse().map_err(|_| err())?;
        if d == 0 || n < 0 || denom.starts_with('-') {
            return Err(err());
        }
        Rational::new(n, d)
    } else if let Some((int, frac)) = body.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let int_part: i128 = if int.is_empty() {
            0
        } else {
            int.parse().map_err(|_| err())?
        };
        let frac_part: i128 = frac.parse().map_err(|_| err())?;
        let scale = 10i128
            .checked_pow(frac.len() as u32)
            .ok_or_else(err)?;
        let numer = int_part
            .checked_mul(scale)
            .and_then(|v| v.checked_add(frac_part))
            .ok_or_else(err)?;
        Rational::new(numer, scale)
    } else {
        let n: i128 = body.parse().map_err(|_| err())?;
        Rational::from_integer(n)
    };
    Ok(if negative { -magnitude } else { magnitude })
}

/// Converts an exact probability or moment to floating point.
pub fn rational_to_f64(value: &Rational) -> f64 {
    *value.numer() as f64 / *value.denom() as f64
}

/// The deck's value census: which distinct values occur and how often.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Spectrum {
    values: Vec<Rational>,
    multiplicities: Vec<usize>,
}

impl Spectrum {
    /// Builds a spectrum from explicit `(value, multiplicity)` pairs.
    pub fn new(pairs: Vec<(Rational, usize)>) -> Result<Self, DiscreteError> {
        if pairs.is_empty() {
            return Err(DiscreteError::EmptyDeck);
        }
        if pairs.iter().any(|(_, m)| *m == 0) {
            return Err(DiscreteError::ZeroMultiplicity);
        }
        let mut pairs = pairs;
        pairs.sort_by_key(|a| a.0);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(DiscreteError::DuplicateValue);
        }
        if pairs.len() > u8::MAX as usize {
            return Err(DiscreteError::TooManyDistinctValues { got: pairs.len() });
        }
        let (values, multiplicities) = pairs.into_iter().unzip();
        Ok(Self {
            values,
            multiplicities,
        })
    }

    /// Census of a concrete value list (with repeats).
    pub fn from_values(values: &[Rational]) -> Result<Self, DiscreteError> {
        if values.is_empty() {
            return Err(DiscreteError::EmptyDeck);
        }
        let mut counts: BTreeMap<Rational, usize> = BTreeMap::new();
        for v in values {
            *counts.entry(*v).or_insert(0) += 1;
        }
        Self::new(counts.into_iter().collect())
    }

    /// Total deck size `K`.
    pub fn deck_size(&self) -> usize {
        self.multiplicities.iter().sum()
    }

    /// Number of distinct values `C`.
    pub fn distinct_count(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Rational, usize)> {
        self.values.iter().zip(self.multiplicities.iter().copied())
    }

    /// Index of a value in the sorted distinct-value table.
    pub fn value_index(&self, value: &Rational) -> Option<usize> {
        self.values.binary_search(value).ok()
    }

    /// Population mean and variance of a single uniformly drawn card.
    pub fn population_mean_variance(&self) -> (Rational, Rational) {
        let k = Rational::from_integer(self.deck_size() as i128);
        let mut mean = Rational::zero();
        let mut second = Rational::zero();
        for (value, mult) in self.iter() {
            let weight = Rational::from_integer(mult as i128) / k;
            mean += value * weight;
            second += value * value * weight;
        }
        let variance = second - mean * mean;
        (mean, variance)
    }

    /// Value numerators over one common denominator, for integer-only
    /// accumulation in the enumeration loops.
    fn scaled_numerators(&self) -> Result<(Vec<i128>, i128), DiscreteError> {
        let mut denom: i128 = 1;
        for v in &self.values {
            denom = denom.lcm(v.denom());
        }
        let numerators = self
            .values
            .iter()
            .map(|v| {
                v.numer()
                    .checked_mul(denom / v.denom())
                    .ok_or(DiscreteError::ArithmeticOverflow)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok((numerators, denom))
    }
}

/// A concrete deck: an arrangement of values over positions `0..K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteFunction {
    spectrum: Spectrum,
    arrangement: Vec<u8>,
}

impl DiscreteFunction {
    pub fn new(values: &[Rational]) -> Result<Self, DiscreteError> {
        let spectrum = Spectrum::from_values(values)?;
        let arrangement = values
            .iter()
            .map(|v| spectrum.value_index(v).expect("value census is complete") as u8)
            .collect();
        Ok(Self {
            spectrum,
            arrangement,
        })
    }

    pub fn from_ints(values: &[i64]) -> Result<Self, DiscreteError> {
        let rationals: Vec<Rational> = values
            .iter()
            .map(|&v| Rational::from_integer(v as i128))
            .collect();
        Self::new(&rationals)
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn deck_size(&self) -> usize {
        self.arrangement.len()
    }

    /// Value indices (into the spectrum's sorted value table) per position.
    pub fn arrangement(&self) -> &[u8] {
        &self.arrangement
    }

    pub fn value_at(&self, position: usize) -> &Rational {
        &self.spectrum.values()[self.arrangement[position] as usize]
    }
}

/// What is known before sampling: the spectrum, the set of arrangements
/// consistent with the prior information (uniform posterior), and the grid
/// of positions that will be read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeState {
    spectrum: Spectrum,
    admissible: Vec<Vec<u8>>,
    grid: Vec<usize>,
}

impl KnowledgeState {
    /// No positional information: every distinct arrangement of the spectrum
    /// is admissible.
    pub fn unconstrained(spectrum: Spectrum, grid: Vec<usize>) -> Result<Self, DiscreteError> {
        Self::with_pins(spectrum, &[], grid)
    }

    /// The arrangement is fully known: a single admissible arrangement.
    pub fn fully_known(function: &DiscreteFunction, grid: Vec<usize>) -> Result<Self, DiscreteError> {
        validate_grid(function.deck_size(), &grid)?;
        Ok(Self {
            spectrum: function.spectrum().clone(),
            admissible: vec![function.arrangement().to_vec()],
            grid,
        })
    }

    /// Positions pinned to known values; everything else is a uniform
    /// shuffle of the remaining cards.
    pub fn with_pins(
        spectrum: Spectrum,
        pins: &[(usize, Rational)],
        grid: Vec<usize>,
    ) -> Result<Self, DiscreteError> {
        let k = spectrum.deck_size();
        validate_grid(k, &grid)?;

        let mut pinned: Vec<Option<u8>> = vec![None; k];
        let mut residual = spectrum.multiplicities().to_vec();
        for (position, value) in pins {
            if *position >= k || pinned[*position].is_some() {
                return Err(DiscreteError::InvalidPin {
                    position: *position,
                });
            }
            let index = spectrum
                .value_index(value)
                .ok_or(DiscreteError::EmptyAdmissible)?;
            if residual[index] == 0 {
                return Err(DiscreteError::EmptyAdmissible);
            }
            residual[index] -= 1;
            pinned[*position] = Some(index as u8);
        }

        let completions = enumerate_arrangements(&residual)?;
        let free: Vec<usize> = (0..k).filter(|p| pinned[*p].is_none()).collect();
        let admissible = completions
            .into_iter()
            .map(|completion| {
                let mut arrangement: Vec<u8> =
                    pinned.iter().map(|slot| slot.unwrap_or(0)).collect();
                for (&position, index) in free.iter().zip(completion) {
                    arrangement[position] = index;
                }
                arrangement
            })
            .collect();
        Ok(Self {
            spectrum,
            admissible,
            grid,
        })
    }

    /// Arbitrary extensional prior: an explicit admissible set.
    pub fn from_admissible(
        spectrum: Spectrum,
        admissible: Vec<Vec<u8>>,
        grid: Vec<usize>,
    ) -> Result<Self, DiscreteError> {
        validate_grid(spectrum.deck_size(), &grid)?;
        if admissible.is_empty() {
            return Err(DiscreteError::EmptyAdmissible);
        }
        let c = spectrum.distinct_count();
        for arrangement in &admissible {
            if arrangement.len() != spectrum.deck_size() {
                return Err(DiscreteError::SpectrumMismatch);
            }
            let mut counts = vec![0usize; c];
            for &index in arrangement {
                if index as usize >= c {
                    return Err(DiscreteError::SpectrumMismatch);
                }
                counts[index as usize] += 1;
            }
            if counts != spectrum.multiplicities() {
                return Err(DiscreteError::SpectrumMismatch);
            }
        }
        Ok(Self {
            spectrum,
            admissible,
            grid,
        })
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn admissible(&self) -> &[Vec<u8>] {
        &self.admissible
    }

    pub fn grid(&self) -> &[usize] {
        &self.grid
    }

    pub fn draw_count(&self) -> usize {
        self.grid.len()
    }
}

fn validate_grid(deck_size: usize, grid: &[usize]) -> Result<(), DiscreteError> {
    if grid.is_empty() || grid.len() > deck_size {
        return Err(DiscreteError::InvalidGrid);
    }
    let mut seen = vec![false; deck_size];
    for &position in grid {
        if position >= deck_size || seen[position] {
            return Err(DiscreteError::InvalidGrid);
        }
        seen[position] = true;
    }
    Ok(())
}

/// Distribution over per-value draw-count vectors `(N_1, ..., N_C)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DrawDistribution {
    probabilities: BTreeMap<Vec<u8>, Rational>,
}

impl DrawDistribution {
    fn from_map(probabilities: BTreeMap<Vec<u8>, Rational>) -> Self {
        Self { probabilities }
    }

    pub fn probability(&self, counts: &[u8]) -> Rational {
        self.probabilities
            .get(counts)
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u8], &Rational)> {
        self.probabilities.iter().map(|(k, v)| (k.as_slice(), v))
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Exact total mass; always 1 for distributions built by this module.
    pub fn total(&self) -> Rational {
        self.probabilities
            .values()
            .fold(Rational::zero(), |acc, p| acc + p)
    }

    /// Mean and variance of the draw average `(1/N) * sum(f_c * N_c)`.
    pub fn draw_average_mean_variance(&self, spectrum: &Spectrum) -> (Rational, Rational) {
        let mut mean = Rational::zero();
        let mut second = Rational::zero();
        for (counts, probability) in self.iter() {
            let n: i128 = counts.iter().map(|&c| c as i128).sum();
            let mut total = Rational::zero();
            for (value, &count) in spectrum.values().iter().zip(counts) {
                total += value * Rational::from_integer(count as i128);
            }
            let average = total / Rational::from_integer(n);
            mean += average * probability;
            second += average * average * probability;
        }
        let variance = second - mean * mean;
        (mean, variance)
    }

    /// Largest pointwise probability difference against another
    /// distribution over the same count space.
    pub fn max_abs_difference(&self, other: &DrawDistribution) -> Rational {
        let mut max = Rational::zero();
        for (counts, p) in self.iter() {
            let diff = (*p - other.probability(counts)).abs();
            if diff > max {
                max = diff;
            }
        }
        for (counts, p) in other.iter() {
            let diff = (*p - self.probability(counts)).abs();
            if diff > max {
                max = diff;
            }
        }
        max
    }
}

fn binomial_i128(n: usize, k: usize) -> Result<i128, DiscreteError> {
    if k > n {
        return Ok(0);
    }
    if n > 120 {
        // C(121, 60) overflows i128; decks anywhere near this size are far
        // beyond enumeration scale anyway.
        return Err(DiscreteError::ArithmeticOverflow);
    }
    Ok(num_integer::binomial(n as i128, k as i128))
}

/// Number of distinct arrangements of a multiset.
fn arrangement_count(multiplicities: &[usize]) -> Result<u128, DiscreteError> {
    let mut total: u128 = 1;
    let mut placed = 0usize;
    for &mult in multiplicities {
        placed += mult;
        let choose = binomial_i128(placed, mult)? as u128;
        total = total
            .checked_mul(choose)
            .ok_or(DiscreteError::ArithmeticOverflow)?;
    }
    Ok(total)
}

/// All distinct arrangements of the multiset described by `multiplicities`,
/// in lexicographic order of value indices.
fn enumerate_arrangements(multiplicities: &[usize]) -> Result<Vec<Vec<u8>>, DiscreteError> {
    let count = arrangement_count(multiplicities)?;
    if count > MAX_ENUMERABLE_ARRANGEMENTS {
        return Err(DiscreteError::EnumerationTooLarge {
            arrangements: count,
            limit: MAX_ENUMERABLE_ARRANGEMENTS,
        });
    }
    let k: usize = multiplicities.iter().sum();
    let mut out = Vec::with_capacity(count as usize);
    let mut remaining = multiplicities.to_vec();
    let mut prefix = Vec::with_capacity(k);
    fn recurse(
        remaining: &mut [usize],
        prefix: &mut Vec<u8>,
        k: usize,
        out: &mut Vec<Vec<u8>>,
    ) {
        if prefix.len() == k {
            out.push(prefix.clone());
            return;
        }
        for index in 0..remaining.len() {
            if remaining[index] > 0 {
                remaining[index] -= 1;
                prefix.push(index as u8);
                recurse(remaining, prefix, k, out);
                prefix.pop();
                remaining[index] += 1;
            }
        }
    }
    recurse(&mut remaining, &mut prefix, k, &mut out);
    Ok(out)
}

/// Visits every size-`n` subset of `0..k` in lexicographic order.
fn try_for_each_subset<E>(
    k: usize,
    n: usize,
    mut visit: impl FnMut(&[usize]) -> Result<(), E>,
) -> Result<(), E> {
    debug_assert!(n >= 1 && n <= k);
    let mut subset: Vec<usize> = (0..n).collect();
    loop {
        visit(&subset)?;
        // Advance the rightmost index that still has room.
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            if subset[i] < k - (n - i) {
                break;
            }
        }
        subset[i] += 1;
        for j in i + 1..n {
            subset[j] = subset[j - 1] + 1;
        }
    }
}

/// Probability of drawing the given per-value counts in `n` draws without
/// replacement: `prod(C(K_c, N_c)) / C(K, n)`. Infeasible counts have
/// probability zero.
pub fn hypergeometric_pmf(
    spectrum: &Spectrum,
    counts: &[u8],
    n: usize,
) -> Result<Rational, DiscreteError> {
    let k = spectrum.deck_size();
    if counts.len() != spectrum.distinct_count() {
        return Err(DiscreteError::CountShape {
            got: counts.len(),
            expected: spectrum.distinct_count(),
        });
    }
    if n > k {
        return Err(DiscreteError::DrawTooLarge { n, k });
    }
    let total: usize = counts.iter().map(|&c| c as usize).sum();
    if total != n {
        return Ok(Rational::zero());
    }
    let mut numerator: i128 = 1;
    for (&count, &mult) in counts.iter().zip(spectrum.multiplicities()) {
        if count as usize > mult {
            return Ok(Rational::zero());
        }
        numerator = numerator
            .checked_mul(binomial_i128(mult, count as usize)?)
            .ok_or(DiscreteError::ArithmeticOverflow)?;
    }
    Ok(Rational::new(numerator, binomial_i128(k, n)?))
}

/// The full hypergeometric distribution over feasible count vectors.
pub fn hypergeometric_distribution(
    spectrum: &Spectrum,
    n: usize,
) -> Result<DrawDistribution, DiscreteError> {
    if n == 0 {
        return Err(DiscreteError::EmptyDraw);
    }
    if n > spectrum.deck_size() {
        return Err(DiscreteError::DrawTooLarge {
            n,
            k: spectrum.deck_size(),
        });
    }
    let c = spectrum.distinct_count();
    let mut probabilities = BTreeMap::new();
    let mut counts = vec![0u8; c];
    fn recurse(
        spectrum: &Spectrum,
        counts: &mut Vec<u8>,
        index: usize,
        left: usize,
        n: usize,
        out: &mut BTreeMap<Vec<u8>, Rational>,
    ) -> Result<(), DiscreteError> {
        if index == counts.len() {
            if left == 0 {
                let p = hypergeometric_pmf(spectrum, counts, n)?;
                if !p.is_zero() {
                    out.insert(counts.clone(), p);
                }
            }
            return Ok(());
        }
        let cap = spectrum.multiplicities()[index].min(left);
        for take in 0..=cap {
            counts[index] = take as u8;
            recurse(spectrum, counts, index + 1, left - take, n, out)?;
        }
        counts[index] = 0;
        Ok(())
    }
    recurse(spectrum, &mut counts, 0, n, n, &mut probabilities)?;
    Ok(DrawDistribution::from_map(probabilities))
}

/// Mean and variance of the average of `n` draws made without replacement.
///
/// The variance carries the finite-population factor `(K-n)/(K-1)`; a
/// single-card deck is deterministic and reports variance zero directly.
pub fn hypergeometric_mean_variance(
    spectrum: &Spectrum,
    n: usize,
) -> Result<(Rational, Rational), DiscreteError> {
    let k = spectrum.deck_size();
    if n == 0 {
        return Err(DiscreteError::EmptyDraw);
    }
    if n > k {
        return Err(DiscreteError::DrawTooLarge { n, k });
    }
    let (mean, population_variance) = spectrum.population_mean_variance();
    if k == 1 {
        return Ok((mean, Rational::zero()));
    }
    let factor = Rational::new((k - n) as i128, (n * (k - 1)) as i128);
    Ok((mean, factor * population_variance))
}

/// Count distribution of reading the state's grid positions when the
/// arrangement is drawn uniformly from the admissible set.
pub fn quadrature_conditional_distribution(state: &KnowledgeState) -> DrawDistribution {
    let c = state.spectrum().distinct_count();
    let mut tally: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
    let mut counts = vec![0u8; c];
    for arrangement in state.admissible() {
        counts.iter_mut().for_each(|slot| *slot = 0);
        for &position in state.grid() {
            counts[arrangement[position] as usize] += 1;
        }
        match tally.get_mut(counts.as_slice()) {
            Some(t) => *t += 1,
            None => {
                tally.insert(counts.clone(), 1);
            }
        }
    }
    let total = state.admissible().len() as i128;
    DrawDistribution::from_map(
        tally
            .into_iter()
            .map(|(counts, hits)| (counts, Rational::new(hits as i128, total)))
            .collect(),
    )
}

/// Marginalizes the grid-conditional distribution over every size-`N` grid
/// with uniform weight (`N` is the state's grid size). This is the shuffle
/// average; it must coincide with [`hypergeometric_pmf`] for every count
/// vector, whatever the prior information says.
pub fn shuffle_marginalize(state: &KnowledgeState) -> Result<DrawDistribution, DiscreteError> {
    let k = state.spectrum().deck_size();
    let n = state.draw_count();
    let c = state.spectrum().distinct_count();

    let mut tally: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
    let mut counts = vec![0u8; c];
    try_for_each_subset(k, n, |grid| -> Result<(), DiscreteError> {
        for arrangement in state.admissible() {
            counts.iter_mut().for_each(|slot| *slot = 0);
            for &position in grid {
                counts[arrangement[position] as usize] += 1;
            }
            match tally.get_mut(counts.as_slice()) {
                Some(t) => *t += 1,
                None => {
                    tally.insert(counts.clone(), 1);
                }
            }
        }
        Ok(())
    })?;

    let grids = binomial_i128(k, n)?;
    let total = grids
        .checked_mul(state.admissible().len() as i128)
        .ok_or(DiscreteError::ArithmeticOverflow)?;
    Ok(DrawDistribution::from_map(
        tally
            .into_iter()
            .map(|(counts, hits)| (counts, Rational::new(hits as i128, total)))
            .collect(),
    ))
}

/// Exact law-of-total-variance decomposition over uniformly weighted grids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TotalVarianceCheck {
    /// `E_g[Var(draw average | g)]` under the admissible-arrangement posterior.
    pub expected_conditional_variance: Rational,
    /// `Var_g(E[draw average | g])`.
    pub variance_of_conditional_means: Rational,
    /// The without-replacement variance of the same draw average.
    pub mc_variance: Rational,
    /// Whether `E_g[Var | g] <= mc_variance` (exact comparison).
    pub holds: bool,
}

/// Floating-point counterpart of [`TotalVarianceCheck`] for randomized
/// sweeps; the inequality verdict allows 1e-12 of rounding slack.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalVarianceCheckF64 {
    pub expected_conditional_variance: f64,
    pub variance_of_conditional_means: f64,
    pub mc_variance: f64,
    pub holds: bool,
}

/// Per-grid integer moment sums shared by both arithmetic modes.
///
/// For each size-`n` grid the callback receives `sum_a s(a)` and
/// `sum_a s(a)^2`, where `s(a)` is the integer value-numerator sum of
/// arrangement `a` at the grid positions.
fn for_each_grid_moment<E: From<DiscreteError>>(
    state: &KnowledgeState,
    n: usize,
    numerators: &[i128],
    mut visit: impl FnMut(i128, i128) -> Result<(), E>,
) -> Result<(), E> {
    let k = state.spectrum().deck_size();
    try_for_each_subset(k, n, |grid| -> Result<(), E> {
        let mut sum = 0i128;
        let mut sum_sq = 0i128;
        for arrangement in state.admissible() {
            let mut s = 0i128;
            for &position in grid {
                s = s
                    .checked_add(numerators[arrangement[position] as usize])
                    .ok_or(DiscreteError::ArithmeticOverflow)?;
            }
            sum = sum
                .checked_add(s)
                .ok_or(DiscreteError::ArithmeticOverflow)?;
            sum_sq = sum_sq
                .checked_add(s.checked_mul(s).ok_or(DiscreteError::ArithmeticOverflow)?)
                .ok_or(DiscreteError::ArithmeticOverflow)?;
        }
        visit(sum, sum_sq)
    })
}

/// Exact check of `E_g[Var | g] <= Var_MC` for `n` draws, marginalizing over
/// every size-`n` grid with uniform weight.
///
/// The state's own grid plays no role here; only its spectrum and admissible
/// set do.
pub fn total_variance_check(
    state: &KnowledgeState,
    n: usize,
) -> Result<TotalVarianceCheck, DiscreteError> {
    let k = state.spectrum().deck_size();
    if n == 0 {
        return Err(DiscreteError::EmptyDraw);
    }
    if n > k {
        return Err(DiscreteError::DrawTooLarge { n, k });
    }
    let (numerators, denom) = state.spectrum().scaled_numerators()?;
    let a = state.admissible().len() as i128;
    let first_scale = a * n as i128 * denom;
    let second_scale = a * (n as i128 * denom).pow(2);

    let mut sum_variance = Rational::zero();
    let mut sum_mean = Rational::zero();
    let mut sum_mean_sq = Rational::zero();
    let mut grids: i128 = 0;
    for_each_grid_moment(state, n, &numerators, |sum, sum_sq| {
        let mean = Rational::new(sum, first_scale);
        let second = Rational::new(sum_sq, second_scale);
        sum_variance += second - mean * mean;
        sum_mean += mean;
        sum_mean_sq += mean * mean;
        grids += 1;
        Ok::<(), DiscreteError>(())
    })?;

    let g = Rational::from_integer(grids);
    let expected_conditional_variance = sum_variance / g;
    let grand_mean = sum_mean / g;
    let variance_of_conditional_means =
        sum_mean_sq / g - grand_mean * grand_mean;
    let (_, mc_variance) = hypergeometric_mean_variance(state.spectrum(), n)?;
    let holds = expected_conditional_variance <= mc_variance;
    Ok(TotalVarianceCheck {
        expected_conditional_variance,
        variance_of_conditional_means,
        mc_variance,
        holds,
    })
}

/// Floating-point mode of [`total_variance_check`] for randomized sweeps.
pub fn total_variance_check_f64(
    state: &KnowledgeState,
    n: usize,
) -> Result<TotalVarianceCheckF64, DiscreteError> {
    let k = state.spectrum().deck_size();
    if n == 0 {
        return Err(DiscreteError::EmptyDraw);
    }
    if n > k {
        return Err(DiscreteError::DrawTooLarge { n, k });
    }
    let (numerators, denom) = state.spectrum().scaled_numerators()?;
    let a = state.admissible().len() as f64;
    let first_scale = a * n as f64 * denom as f64;
    let second_scale = a * (n as f64 * denom as f64).powi(2);

    let mut sum_variance = 0.0f64;
    let mut sum_mean = 0.0f64;
    let mut sum_mean_sq = 0.0f64;
    let mut grids = 0.0f64;
    for_each_grid_moment(state, n, &numerators, |sum, sum_sq| {
        let mean = sum as f64 / first_scale;
        let second = sum_sq as f64 / second_scale;
        sum_variance += second - mean * mean;
        sum_mean += mean;
        sum_mean_sq += mean * mean;
        grids += 1.0;
        Ok::<(), DiscreteError>(())
    })?;

    let expected_conditional_variance = sum_variance / grids;
    let grand_mean = sum_mean / grids;
    let variance_of_conditional_means = sum_mean_sq / grids - grand_mean * grand_mean;

    // Same moments in floating point, straight from the census.
    let kf = k as f64;
    let mut mean = 0.0f64;
    let mut second = 0.0f64;
    for (value, mult) in state.spectrum().iter() {
        let v = rational_to_f64(value);
        let w = mult as f64 / kf;
        mean += v * w;
        second += v * v * w;
    }
    let population_variance = second - mean * mean;
    let mc_variance = if k == 1 {
        0.0
    } else {
        (k - n) as f64 / (n as f64 * (k - 1) as f64) * population_variance
    };

    let slack = 1e-12 * mc_variance.abs().max(1.0);
    Ok(TotalVarianceCheckF64 {
        expected_conditional_variance,
        variance_of_conditional_means,
        mc_variance,
        holds: expected_conditional_variance <= mc_variance + slack,
    })
}

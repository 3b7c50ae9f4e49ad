//! Randomized total-variance sweep: seeded random decks, random draw
//! counts, and random pinned-position priors, checked in floating point.

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use quadlab::discrete::{
    total_variance_check_f64, DiscreteFunction, KnowledgeState, TotalVarianceCheckF64,
};
use quadlab::simlab::derive_replicate_seed;

pub struct SweepRow {
    pub index: usize,
    pub deck_size: usize,
    pub distinct: usize,
    pub draws: usize,
    /// "none" for the empty prior, or "pinP=V" for one pinned position.
    pub prior: String,
    pub check: TotalVarianceCheckF64,
}

pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub violations: usize,
    /// Largest |E[Var|g] - Var_MC| seen across empty-prior decks, which
    /// should be rounding-level only.
    pub max_unconstrained_gap: f64,
}

pub fn run(count: usize, max_k: usize, seed: u64) -> Result<SweepOutcome> {
    let max_k = max_k.max(2);
    let rows: Vec<SweepRow> = (0..count)
        .into_par_iter()
        .map(|index| {
            let mut rng = ChaCha8Rng::from_seed(derive_replicate_seed(
                seed,
                u64::MAX - 2,
                index as u64,
                0,
            ));
            let deck_size = rng.random_range(2..=max_k);
            let alphabet = rng.random_range(2..=4usize.min(deck_size)) as i64;
            let values: Vec<i64> = (0..deck_size)
                .map(|_| rng.random_range(0..alphabet))
                .collect();
            let deck = DiscreteFunction::from_ints(&values).expect("non-empty deck");
            let draws = rng.random_range(1..=deck_size);
            let grid: Vec<usize> = (0..draws).collect();

            let (state, prior) = if rng.random_bool(0.5) {
                let position = rng.random_range(0..deck_size);
                let value = *deck.value_at(position);
                let label = format!("pin{position}={value}");
                let state = KnowledgeState::with_pins(
                    deck.spectrum().clone(),
                    &[(position, value)],
                    grid,
                )
                .expect("pinning a held value is always consistent");
                (state, label)
            } else {
                let state = KnowledgeState::unconstrained(deck.spectrum().clone(), grid)
                    .expect("spectrum is enumerable at sweep scale");
                (state, "none".to_string())
            };

            let check = total_variance_check_f64(&state, draws)
                .expect("draw count stays within the deck");
            SweepRow {
                index,
                deck_size,
                distinct: deck.spectrum().distinct_count(),
                draws,
                prior,
                check,
            }
        })
        .collect();

    let violations = rows.iter().filter(|row| !row.check.holds).count();
    let max_unconstrained_gap = rows
        .iter()
        .filter(|row| row.prior == "none")
        .map(|row| {
            (row.check.expected_conditional_variance - row.check.mc_variance).abs()
        })
        .fold(0.0f64, f64::max);
    Ok(SweepOutcome {
        rows,
        violations,
        max_unconstrained_gap,
    })
}

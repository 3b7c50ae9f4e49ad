//! Acceptance suite: one test per shipped claim, each printing a PASS line
//! with its measured margin. Run with `cargo test --test acceptance`
//! (add `-- --nocapture` to see the lines as they pass).

use std::process::{Command, Output};
use std::time::Instant;

use quadlab::discrete::{
    hypergeometric_distribution, hypergeometric_mean_variance, shuffle_marginalize, DiscreteFunction, KnowledgeState, Rational, Spectrum,
};
use quadlab::errmodel::{newton_cotes_error, DerivativeStds, ErrorModel};
use quadlab::estimate::{
    mc_integrate, mc_theoretical_std, min_variance_weights, quad_std_unknown,
    quadrature_integrate, FunctionOracle,
};
use quadlab::grid::Rule;
use quadlab::simlab::{
    mcmc_variance_compare, unknown_function_experiment, McmcCompareConfig,
};

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_quadlab")
}

fn run_cli(args: &[&str]) -> Output {
    Command::new(binary())
        .args(args)
        .env_remove("QUADLAB_SEED")
        .output()
        .expect("binary runs")
}

fn stdout_str(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("utf-8 output")
}

/// Parses chi-sim CSV rows into (dimension, theory_chi, chi_hat, chi_hat_std).
fn parse_chi_rows(text: &str) -> Vec<(usize, f64, f64, f64)> {
    text.lines()
        .filter(|line| !line.starts_with('#') && !line.starts_with("dimension"))
        .map(|line| {
            let cells: Vec<&str> = line.split(',').collect();
            (
                cells[0].parse().unwrap(),
                cells[2].parse().unwrap(),
                cells[3].parse().unwrap(),
                cells[4].parse().unwrap(),
            )
        })
        .collect()
}

fn check_chi_table(rule: &str, n: u64, theory: &[f64], tolerance: f64, std_cap: f64) -> f64 {
    let n_text = n.to_string();
    let args = [
        "chi-sim", "--rule", rule, "--dims", "1,2,4,8,16", "--n", &n_text,
        "--seed", "42", "--format", "csv",
    ];
    let output = run_cli(&args);
    assert!(output.status.success(), "chi-sim failed for {rule}");
    let rows = parse_chi_rows(&stdout_str(&output));
    assert_eq!(rows.len(), 5);
    let mut worst = 0.0f64;
    for ((dimension, theory_chi, chi_hat, chi_hat_std), expected) in
        rows.into_iter().zip(theory)
    {
        assert_eq!(theory_chi, *expected, "theory column at dimension {dimension}");
        let gap = (chi_hat - theory_chi).abs();
        assert!(
            gap <= tolerance,
            "{rule} dimension {dimension}: chi_hat {chi_hat} vs {theory_chi} (tol {tolerance})"
        );
        assert!(
            chi_hat_std <= std_cap,
            "{rule} dimension {dimension}: spread {chi_hat_std} exceeds {std_cap}"
        );
        worst = worst.max(gap);
    }
    worst
}

#[test]
fn acceptance_01_rectangular_exponent_table() {
    let start = Instant::now();
    let worst = check_chi_table(
        "rectangular",
        1 << 16,
        &[1.5, 1.0, 0.75, 0.625, 0.5625],
        0.03,
        0.02,
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 120, "took {elapsed:.2?}");
    println!(
        "acceptance 1 (rectangular exponent table, n=65536): PASS — worst |chi_hat - theory| = {worst:.4} (tol 0.03) in {elapsed:.2?}"
    );
}

#[test]
fn acceptance_02_midpoint_exponent_table_and_scaled_mode() {
    let worst_full = check_chi_table(
        "midpoint",
        1 << 16,
        &[2.5, 1.5, 1.0, 0.75, 0.625],
        0.03,
        0.02,
    );
    let start = Instant::now();
    let worst_scaled = check_chi_table(
        "midpoint",
        1 << 12,
        &[2.5, 1.5, 1.0, 0.75, 0.625],
        0.05,
        0.05,
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "scaled mode took {elapsed:.2?}");
    println!(
        "acceptance 2 (midpoint exponent table + scaled mode): PASS — worst gaps {worst_full:.4} (full, tol 0.03) / {worst_scaled:.4} (scaled, tol 0.05, {elapsed:.2?} < 10s)"
    );
}

/// Nonincreasing partitions of `total` into at most `max_parts` parts.
fn partitions(total: usize, max_parts: usize, cap: usize) -> Vec<Vec<usize>> {
    if total == 0 {
        return vec![vec![]];
    }
    if max_parts == 0 {
        return vec![];
    }
    let mut out = Vec::new();
    for first in (1..=total.min(cap)).rev() {
        for mut rest in partitions(total - first, max_parts - 1, first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Deck with value `i+1` repeated `multiplicities[i]` times, in blocks.
fn deck_from_multiplicities(multiplicities: &[usize]) -> DiscreteFunction {
    let mut values = Vec::new();
    for (index, &mult) in multiplicities.iter().enumerate() {
        values.extend(std::iter::repeat_n((index + 1) as i64, mult));
    }
    DiscreteFunction::from_ints(&values).unwrap()
}

/// Every consistent assignment of spectrum values to the given positions.
fn pin_assignments(
    spectrum: &Spectrum,
    positions: &[usize],
) -> Vec<Vec<(usize, Rational)>> {
    fn recurse(
        spectrum: &Spectrum,
        positions: &[usize],
        next: usize,
        remaining: &mut Vec<usize>,
        current: &mut Vec<(usize, Rational)>,
        out: &mut Vec<Vec<(usize, Rational)>>,
    ) {
        if next == positions.len() {
            out.push(current.clone());
            return;
        }
        for value_index in 0..spectrum.distinct_count() {
            if remaining[value_index] > 0 {
                remaining[value_index] -= 1;
                current.push((positions[next], spectrum.values()[value_index]));
                recurse(spectrum, positions, next + 1, remaining, current, out);
                current.pop();
                remaining[value_index] += 1;
            }
        }
    }
    let mut out = Vec::new();
    let mut remaining = spectrum.multiplicities().to_vec();
    recurse(spectrum, positions, 0, &mut remaining, &mut Vec::new(), &mut out);
    out
}

#[test]
fn acceptance_03_shuffle_identity_is_exact_on_all_small_decks() {
    // Every multiplicity pattern of decks with at most six cards and at most
    // three distinct values (the count distributions depend on the deck only
    // through that pattern), every draw count, and every pinned-position
    // prior: the grid marginal must equal the without-replacement
    // distribution exactly, term by term, in rational arithmetic.
    let mut checks = 0usize;
    for k in 1..=6usize {
        for multiplicities in partitions(k, 3, k) {
            let deck = deck_from_multiplicities(&multiplicities);
            let spectrum = deck.spectrum().clone();
            for n in 1..=k {
                let reference = hypergeometric_distribution(&spectrum, n).unwrap();
                let grid: Vec<usize> = (0..n).collect();
                for subset in 0u32..(1 << k) {
                    let positions: Vec<usize> =
                        (0..k).filter(|p| subset & (1 << p) != 0).collect();
                    for pins in pin_assignments(&spectrum, &positions) {
                        let state = KnowledgeState::with_pins(
                            spectrum.clone(),
                            &pins,
                            grid.clone(),
                        )
                        .unwrap();
                        let marginal = shuffle_marginalize(&state).unwrap();
                        assert_eq!(
                            marginal, reference,
                            "deviation at multiplicities {multiplicities:?}, n {n}, pins {pins:?}"
                        );
                        checks += 1;
                    }
                }
            }
        }
    }
    assert_eq!(checks, 42_013, "enumeration scope changed");
    println!(
        "acceptance 3 (exact shuffle identity): PASS — {checks} deck/prior/draw instances, zero deviation"
    );
}

#[test]
fn acceptance_04_total_variance_sweep_has_no_violations() {
    let output = run_cli(&[
        "totalvar-sweep", "--count", "1000", "--max-k", "8", "--seed", "3",
        "--format", "csv",
    ]);
    assert!(output.status.success());
    let text = stdout_str(&output);
    let rows: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("index"))
        .collect();
    assert_eq!(rows.len(), 1000);
    assert!(rows.iter().all(|row| row.ends_with(",true")));
    assert!(text.contains("# violations=0 of 1000"));
    let gap: f64 = text
        .lines()
        .find(|l| l.starts_with("# max_unconstrained_gap="))
        .unwrap()
        .trim_start_matches("# max_unconstrained_gap=")
        .parse()
        .unwrap();
    assert!(gap <= 1e-12, "empty-prior equality gap {gap}");
    println!(
        "acceptance 4 (total-variance sweep, 1000 decks): PASS — zero violations, empty-prior gap {gap:.2e} <= 1e-12"
    );
}

#[test]
fn acceptance_05_hypergeometric_closed_form_matches_enumeration() {
    // Independent oracle: walk all C(K, n) position subsets of a concrete
    // arrangement and compute the draw-average moments directly.
    fn enumerate_moments(deck: &DiscreteFunction, n: usize) -> (Rational, Rational) {
        let k = deck.deck_size();
        let mut averages: Vec<Rational> = Vec::new();
        let mut subset: Vec<usize> = Vec::new();
        fn recurse(
            deck: &DiscreteFunction,
            start: usize,
            n: usize,
            subset: &mut Vec<usize>,
            averages: &mut Vec<Rational>,
        ) {
            if subset.len() == n {
                let total: Rational =
                    subset.iter().map(|&p| *deck.value_at(p)).sum();
                averages.push(total / Rational::from_integer(n as i128));
                return;
            }
            for position in start..deck.deck_size() {
                subset.push(position);
                recurse(deck, position + 1, n, subset, averages);
                subset.pop();
            }
        }
        recurse(deck, 0, n, &mut subset, &mut averages);
        assert!(!averages.is_empty());
        let _ = k;
        let count = Rational::from_integer(averages.len() as i128);
        let mean: Rational = averages.iter().cloned().sum::<Rational>() / count;
        let second: Rational = averages
            .iter()
            .map(|a| *a * *a)
            .sum::<Rational>()
            / count;
        (mean, second - mean * mean)
    }

    let mut checks = 0usize;
    for k in 1..=8usize {
        for multiplicities in partitions(k, 4, k) {
            let deck = deck_from_multiplicities(&multiplicities);
            for n in 1..=k {
                let closed = hypergeometric_mean_variance(deck.spectrum(), n).unwrap();
                let brute = enumerate_moments(&deck, n);
                assert_eq!(closed, brute, "at {multiplicities:?}, n {n}");
                checks += 1;
            }
        }
    }

    // A deck with fractional values exercises the rational arithmetic.
    let fractional = DiscreteFunction::new(&[
        Rational::new(1, 2),
        Rational::new(-3, 4),
        Rational::new(1, 2),
        Rational::new(5, 3),
    ])
    .unwrap();
    for n in 1..=4 {
        assert_eq!(
            hypergeometric_mean_variance(fractional.spectrum(), n).unwrap(),
            enumerate_moments(&fractional, n)
        );
        checks += 1;
    }

    // The four-card deck lands on mean 2, variance 1/6 at two draws.
    let four = DiscreteFunction::from_ints(&[1, 2, 3, 2]).unwrap();
    let (mean, variance) = hypergeometric_mean_variance(four.spectrum(), 2).unwrap();
    assert_eq!(mean, Rational::from_integer(2));
    assert_eq!(variance, Rational::new(1, 6));

    println!(
        "acceptance 5 (hypergeometric oracle): PASS — {checks} spectra/draw pairs match enumeration exactly"
    );
}

#[test]
fn acceptance_06_error_constants_are_pinned_by_exact_residuals() {
    let linear = FunctionOracle::new(1, |x| x[0]);
    let square = FunctionOracle::new(1, |x| x[0] * x[0]);
    let mut worst = 0.0f64;
    for n in [2usize, 4, 8, 16] {
        // Left-endpoint rule on f(x) = x: residual exactly 1/(2N).
        let report = quadrature_integrate(&linear, Rule::Rectangular, 1, n).unwrap();
        let residual = 0.5 - report.estimate;
        let expected = 1.0 / (2.0 * n as f64);
        assert!((residual - expected).abs() <= 1e-12, "rectangular n={n}");
        let model = ErrorModel::new(
            Rule::Rectangular,
            1,
            n as u64,
            DerivativeStds::RmsAverage(0.0),
        )
        .unwrap();
        let predicted = newton_cotes_error(1.0, &model);
        assert!((predicted - residual).abs() <= 1e-12);
        worst = worst.max((residual - expected).abs());

        // Midpoint rule on f(x) = x^2: residual exactly 1/(12 N^2).
        let report = quadrature_integrate(&square, Rule::Midpoint, 1, n).unwrap();
        let residual = 1.0 / 3.0 - report.estimate;
        let expected = 1.0 / (12.0 * (n * n) as f64);
        assert!((residual - expected).abs() <= 1e-12, "midpoint n={n}");
        let model = ErrorModel::new(
            Rule::Midpoint,
            1,
            n as u64,
            DerivativeStds::RmsAverage(0.0),
        )
        .unwrap();
        let predicted = newton_cotes_error(2.0, &model);
        assert!((predicted - residual).abs() <= 1e-12);
        worst = worst.max((residual - expected).abs());
    }
    println!(
        "acceptance 6 (error constants 2 and 24): PASS — residuals exact to {worst:.1e} (tol 1e-12)"
    );
}

#[test]
fn acceptance_07_mc_scaling_law_is_dimension_independent() {
    let replicates = 20_000u64;
    let mut worst = 0.0f64;
    for (dimension, sigma_f, base_seed) in [
        (1usize, (1.0f64 / 12.0).sqrt(), 100_000u64),
        (4, (1.0f64 / 48.0).sqrt(), 900_000),
    ] {
        let d = dimension as f64;
        let oracle =
            FunctionOracle::new(dimension, move |x: &[f64]| x.iter().sum::<f64>() / d);
        for n in [16u64, 256] {
            let estimates: Vec<f64> = (0..replicates)
                .map(|r| {
                    mc_integrate(&oracle, n, base_seed + n * replicates + r)
                        .unwrap()
                        .estimate
                })
                .collect();
            let mean = estimates.iter().sum::<f64>() / replicates as f64;
            let variance = estimates
                .iter()
                .map(|e| (e - mean) * (e - mean))
                .sum::<f64>()
                / replicates as f64;
            let theory = mc_theoretical_std(sigma_f, n);
            let ratio = variance.sqrt() / theory;
            assert!(
                (ratio - 1.0).abs() <= 0.05,
                "dimension {dimension}, n {n}: ratio {ratio}"
            );
            worst = worst.max((ratio - 1.0).abs());
        }
    }
    println!(
        "acceptance 7 (mc scaling law, 20000 replicates): PASS — worst |ratio - 1| = {worst:.4} (tol 0.05)"
    );
}

#[test]
fn acceptance_08_weighted_variance_bounds_hold_everywhere() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
    let sigma = 1.3f64;
    for case in 0..10_000 {
        let len = rng.random_range(2usize..=64);
        let n_prime = rng.random_range(1u64..=len as u64);
        let raw: Vec<f64> = (0..len).map(|_| rng.random::<f64>() + 1e-6).collect();
        let total: f64 = raw.iter().sum();
        let q: Vec<f64> = raw.iter().map(|w| w * n_prime as f64 / total).collect();

        let std = quad_std_unknown(&q, n_prime, sigma).unwrap();
        let lower = mc_theoretical_std(sigma, len as u64);
        let slack = 1e-12 * sigma;
        assert!(std >= lower - slack, "case {case}: {std} < {lower}");
        assert!(std <= sigma + slack, "case {case}: {std} > {sigma}");

        let uniform = min_variance_weights(len as u64, n_prime);
        let at_uniform = quad_std_unknown(&uniform, n_prime, sigma).unwrap();
        assert!(
            (at_uniform - lower).abs() <= 1e-13 * sigma,
            "case {case}: uniform weights missed equality"
        );
    }
    println!(
        "acceptance 8 (weighted-variance bounds): PASS — 10000 random weight vectors inside [sigma/sqrt(N), sigma], equality at uniform"
    );
}

#[test]
fn acceptance_09_autocorrelated_chain_variance_matches_tau() {
    let base = McmcCompareConfig {
        chain_length: 100_000,
        lag1_correlation: 0.5,
        replicates: 200,
        seed: 7,
        marginal_std: 1.0,
    };
    let correlated = mcmc_variance_compare(&base).unwrap();
    assert_eq!(correlated.tau, 3.0);
    let rel_half = (correlated.empirical_variance - correlated.theory_variance).abs()
        / correlated.theory_variance;
    assert!(rel_half <= 0.10, "rho=0.5 relative gap {rel_half}");

    let iid = mcmc_variance_compare(&McmcCompareConfig {
        lag1_correlation: 0.0,
        ..base
    })
    .unwrap();
    assert_eq!(iid.tau, 1.0);
    let mc_variance = 1.0 / 100_000.0;
    let rel_zero = (iid.empirical_variance - mc_variance).abs() / mc_variance;
    assert!(rel_zero <= 0.10, "rho=0 relative gap {rel_zero}");

    println!(
        "acceptance 9 (chain variance vs tau): PASS — relative gaps {rel_half:.3} (rho=0.5) and {rel_zero:.3} (rho=0), tol 0.10"
    );
}

#[test]
fn acceptance_10_unknown_function_statistics_agree_across_methods() {
    let samples = 100usize;
    let reps = 10_000usize;
    let three_se = 3.0 / ((samples * reps) as f64).sqrt();
    let mut worst_std_gap = 0.0f64;
    let mut stds = Vec::new();
    for dimension in [1usize, 8] {
        let summary = unknown_function_experiment(dimension, samples, reps, 0).unwrap();
        assert!(
            summary.quadrature_mean.abs() <= three_se,
            "dimension {dimension}: grid mean {}",
            summary.quadrature_mean
        );
        assert!(
            summary.mc_mean.abs() <= three_se,
            "dimension {dimension}: mc mean {}",
            summary.mc_mean
        );
        assert!((summary.quadrature_std - 1.0).abs() <= 0.03);
        assert!((summary.mc_std - 1.0).abs() <= 0.03);
        let cross = (summary.quadrature_std - summary.mc_std).abs() / summary.mc_std;
        assert!(cross <= 0.03, "dimension {dimension}: methods differ by {cross}");
        worst_std_gap = worst_std_gap
            .max((summary.quadrature_std - 1.0).abs())
            .max((summary.mc_std - 1.0).abs());
        stds.push(summary.quadrature_std);
        stds.push(summary.mc_std);
    }
    // No dimension dependence: the 1-D and 8-D spreads agree as well.
    let across = (stds[0] - stds[2]).abs() / stds[2];
    assert!(across <= 0.03, "dimension dependence {across}");
    println!(
        "acceptance 10 (unknown-function comparison): PASS — means within 3 standard errors of 0, stds within {worst_std_gap:.4} of 1 (tol 0.03)"
    );
}

#[test]
fn acceptance_11_outputs_are_byte_identical_at_any_thread_count() {
    let cases: Vec<Vec<&str>> = vec![
        vec![
            "integrate", "--method", "mc", "--dim", "3", "--n", "5000", "--seed", "17",
            "--fn", "sum-coords",
        ],
        vec![
            "integrate", "--rule", "simpson", "--dim", "2", "-m", "5", "--fn", "square",
        ],
        vec![
            "chi-sim", "--rule", "rectangular", "--dims", "1,4", "--n", "2048",
            "--inner-reps", "20", "--outer-reps", "4", "--seed", "23",
        ],
        vec!["discrete-verify", "--deck", "1,2,3,2", "--n", "3", "--pin", "0=2"],
        vec!["unknown-fn", "--dim", "4", "--samples", "50", "--reps", "300", "--seed", "29"],
        vec![
            "mcmc-compare", "--rho", "0.3", "--n", "5000", "--replicates", "60",
            "--seed", "31",
        ],
        vec!["totalvar-sweep", "--count", "120", "--max-k", "8", "--seed", "37"],
    ];
    let mut runs = 0usize;
    for case in &cases {
        for format in ["csv", "table"] {
            let mut reference: Option<Vec<u8>> = None;
            for threads in ["1", "2", "4"] {
                let mut args = case.clone();
                args.extend(["--format", format, "--threads", threads]);
                let output = run_cli(&args);
                assert!(output.status.success(), "failed: {args:?}");
                match &reference {
                    Some(bytes) => assert_eq!(
                        bytes, &output.stdout,
                        "thread-dependent bytes: {args:?}"
                    ),
                    None => reference = Some(output.stdout),
                }
                runs += 1;
            }
        }
    }
    println!(
        "acceptance 11 (byte-identical reruns): PASS — {runs} runs across 7 subcommands, 2 formats, 3 thread counts"
    );
}

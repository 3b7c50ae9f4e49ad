//! Subcommand implementations.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Result};

use quadlab::discrete::{
    hypergeometric_distribution, parse_rational, rational_to_f64, shuffle_marginalize,
    total_variance_check, DiscreteFunction, KnowledgeState, Rational,
};
use quadlab::estimate::{mc_integrate, quadrature_integrate, EstimateReport};
use quadlab::grid::Rule;
use quadlab::simlab::{
    mcmc_variance_compare, run_chi_experiment, unknown_function_experiment, ChiSimConfig,
    McmcCompareConfig,
};

use crate::output::{float17, open_sink, opt_float17, write_csv_row, write_header, write_table};
use crate::{
    resolve_seed, sweep, usage_error, ChiSimArgs, Command, DiscreteVerifyArgs, IntegrateArgs,
    McmcCompareArgs, MethodArg, OutputFormat, TotalvarSweepArgs, UnknownFnArgs,
};

pub fn dispatch(command: Command, format: OutputFormat, out: Option<&Path>) -> Result<ExitCode> {
    let mut sink = open_sink(out)?;
    let code = match command {
        Command::Integrate(args) => cmd_integrate(args, format, sink.as_mut())?,
        Command::ChiSim(args) => cmd_chi_sim(args, format, sink.as_mut())?,
        Command::DiscreteVerify(args) => cmd_discrete_verify(args, format, sink.as_mut())?,
        Command::UnknownFn(args) => cmd_unknown_fn(args, format, sink.as_mut())?,
        Command::McmcCompare(args) => cmd_mcmc_compare(args, format, sink.as_mut())?,
        Command::TotalvarSweep(args) => cmd_totalvar_sweep(args, format, sink.as_mut())?,
    };
    sink.flush()?;
    Ok(code)
}

fn cmd_integrate(
    args: IntegrateArgs,
    format: OutputFormat,
    w: &mut dyn Write,
) -> Result<ExitCode> {
    let method = match (args.method, args.rule, args.n) {
        (Some(method), ..) => method,
        (None, Some(_), None) => MethodArg::Quad,
        (None, None, Some(_)) => MethodArg::Mc,
        _ => usage_error("choose --method, or exactly one of --rule (quadrature) / --n (mc)"),
    };
    let oracle = match crate::integrands::build(&args.function, args.dim) {
        Ok(oracle) => oracle,
        Err(message) => usage_error(&message),
    };

    let (report, mut fields) = match method {
        MethodArg::Quad => {
            let rule: Rule = args
                .rule
                .unwrap_or_else(|| usage_error("--rule is required for quadrature"))
                .into();
            let m = args
                .m
                .unwrap_or_else(|| usage_error("-m (points per axis) is required for quadrature"));
            let report = quadrature_integrate(&oracle, rule, args.dim, m)?;
            // Deterministic run; the header still pins the (absent) seed.
            let fields = vec![
                ("method", "quad".to_string()),
                ("rule", rule.name().to_string()),
                ("dim", args.dim.to_string()),
                ("m", m.to_string()),
                ("seed", "-".to_string()),
                ("fn", args.function.clone()),
            ];
            (report, fields)
        }
        MethodArg::Mc => {
            let n = args
                .n
                .unwrap_or_else(|| usage_error("--n (sample count) is required for Monte Carlo"));
            let seed = resolve_seed(args.seed);
            let report = mc_integrate(&oracle, n, seed)?;
            let fields = vec![
                ("method", "mc".to_string()),
                ("dim", args.dim.to_string()),
                ("n", n.to_string()),
                ("seed", seed.to_string()),
                ("fn", args.function.clone()),
            ];
            (report, fields)
        }
    };
    fields.push(("format", format.name().to_string()));
    write_header(w, "integrate", &fields)?;
    emit_report(w, format, &args.function, args.dim, &report)?;
    Ok(ExitCode::SUCCESS)
}

fn emit_report(
    w: &mut dyn Write,
    format: OutputFormat,
    function: &str,
    dimension: usize,
    report: &EstimateReport,
) -> Result<()> {
    let header = [
        "method",
        "function",
        "dimension",
        "sample_count",
        "seed",
        "estimate",
        "theoretical_std",
        "empirical_std",
    ];
    let row = vec![
        report.method.name().to_string(),
        function.to_string(),
        dimension.to_string(),
        report.sample_count.to_string(),
        report.seed.map(|s| s.to_string()).unwrap_or_default(),
        float17(report.estimate),
        opt_float17(report.theoretical_std),
        opt_float17(report.empirical_std),
    ];
    match format {
        OutputFormat::Csv => {
            write_csv_row(w, &header.iter().map(|h| h.to_string()).collect::<Vec<_>>())?;
            write_csv_row(w, &row)?;
        }
        OutputFormat::Table => {
            let rows: Vec<Vec<String>> = header
                .iter()
                .zip(&row)
                .filter(|(_, value)| !value.is_empty())
                .map(|(key, value)| vec![key.to_string(), value.clone()])
                .collect();
            write_table(w, &["field", "value"], &rows)?;
        }
    }
    Ok(())
}

fn cmd_chi_sim(args: ChiSimArgs, format: OutputFormat, w: &mut dyn Write) -> Result<ExitCode> {
    let seed = resolve_seed(args.seed);
    let config = ChiSimConfig {
        rule: args.rule.into(),
        dimensions: args.dims.clone(),
        samples_per_replicate: args.n,
        inner_reps: args.inner_reps,
        outer_reps: args.outer_reps,
        master_seed: seed,
        derivative_bound: args.eta,
    };
    let result = run_chi_experiment(&config)?;

    let dims: Vec<String> = args.dims.iter().map(|d| d.to_string()).collect();
    write_header(
        w,
        "chi-sim",
        &[
            ("rule", config.rule.name().to_string()),
            ("dims", dims.join(",")),
            ("n", args.n.to_string()),
            ("inner-reps", args.inner_reps.to_string()),
            ("outer-reps", args.outer_reps.to_string()),
            ("eta", format!("{}", args.eta)),
            ("seed", seed.to_string()),
            ("format", format.name().to_string()),
        ],
    )?;

    let header = [
        "dimension",
        "error_exponent",
        "theory_chi",
        "chi_hat",
        "chi_hat_std",
    ];
    match format {
        OutputFormat::Csv => {
            write_csv_row(w, &header.iter().map(|h| h.to_string()).collect::<Vec<_>>())?;
            for row in &result.rows {
                write_csv_row(
                    w,
                    &[
                        row.dimension.to_string(),
                        float17(row.error_exponent),
                        float17(row.theory_chi),
                        float17(row.chi_hat_mean),
                        float17(row.chi_hat_std),
                    ],
                )?;
            }
        }
        OutputFormat::Table => {
            let rows: Vec<Vec<String>> = result
                .rows
                .iter()
                .map(|row| {
                    vec![
                        row.dimension.to_string(),
                        format!("{:.4}", row.error_exponent),
                        format!("{:.4}", row.theory_chi),
                        format!("{:.4}", row.chi_hat_mean),
                        format!("{:.4}", row.chi_hat_std),
                    ]
                })
                .collect();
            write_table(w, &header, &rows)?;
        }
    }
    eprintln!(
        "chi-sim: {} dimensions in {:.2?}",
        result.rows.len(),
        result.runtime
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_discrete_verify(
    args: DiscreteVerifyArgs,
    format: OutputFormat,
    w: &mut dyn Write,
) -> Result<ExitCode> {
    let values: Vec<Rational> = args
        .deck
        .iter()
        .map(|text| match parse_rational(text) {
            Ok(v) => v,
            Err(e) => usage_error(&e.to_string()),
        })
        .collect();
    let deck = match DiscreteFunction::new(&values) {
        Ok(deck) => deck,
        Err(e) => usage_error(&e.to_string()),
    };
    let k = deck.deck_size();
    if k > args.max_k {
        bail!(
            "deck has {k} cards but exact enumeration is capped at {}; \
             pass --max-k {k} to accept a longer run",
            args.max_k
        );
    }
    if args.n == 0 || args.n > k {
        usage_error(&format!("--n must lie in 1..={k} for this deck"));
    }
    let pins: Vec<(usize, Rational)> = args
        .pin
        .iter()
        .map(|text| {
            let Some((position, value)) = text.split_once('=') else {
                usage_error(&format!("--pin must look like POS=VALUE, got {text:?}"));
            };
            let position = position
                .trim()
                .parse()
                .unwrap_or_else(|_| usage_error(&format!("bad pin position in {text:?}")));
            let value = parse_rational(value)
                .unwrap_or_else(|e| usage_error(&e.to_string()));
            (position, value)
        })
        .collect();

    let grid: Vec<usize> = (0..args.n).collect();
    let state = if pins.is_empty() {
        KnowledgeState::unconstrained(deck.spectrum().clone(), grid)?
    } else {
        KnowledgeState::with_pins(deck.spectrum().clone(), &pins, grid)?
    };

    let marginal = shuffle_marginalize(&state)?;
    let reference = hypergeometric_distribution(deck.spectrum(), args.n)?;
    let max_diff = marginal.max_abs_difference(&reference);
    let marginal_pass = max_diff == Rational::from_integer(0);

    let check = total_variance_check(&state, args.n)?;
    let equality = check.expected_conditional_variance == check.mc_variance;
    let variance_pass = check.holds && (!pins.is_empty() || equality);

    let deck_text: Vec<String> = args.deck.iter().map(|s| s.trim().to_string()).collect();
    write_header(
        w,
        "discrete-verify",
        &[
            ("deck", deck_text.join(",")),
            ("n", args.n.to_string()),
            ("pins", if args.pin.is_empty() {
                "-".to_string()
            } else {
                args.pin.join(";")
            }),
            ("max-k", args.max_k.to_string()),
            ("seed", "-".to_string()),
            ("format", format.name().to_string()),
        ],
    )?;

    let mut support: BTreeSet<Vec<u8>> = BTreeSet::new();
    for (counts, _) in marginal.iter().chain(reference.iter()) {
        support.insert(counts.to_vec());
    }
    let header = [
        "counts",
        "pmf_quadrature_marginal",
        "pmf_hypergeometric",
        "abs_diff",
    ];
    let rows: Vec<Vec<String>> = support
        .iter()
        .map(|counts| {
            let p_marginal = marginal.probability(counts);
            let p_reference = reference.probability(counts);
            let diff = rational_to_f64(&p_marginal) - rational_to_f64(&p_reference);
            vec![
                counts
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join("|"),
                float17(rational_to_f64(&p_marginal)),
                float17(rational_to_f64(&p_reference)),
                float17(diff.abs()),
            ]
        })
        .collect();
    match format {
        OutputFormat::Csv => {
            write_csv_row(w, &header.iter().map(|h| h.to_string()).collect::<Vec<_>>())?;
            for row in &rows {
                write_csv_row(w, row)?;
            }
        }
        OutputFormat::Table => write_table(w, &header, &rows)?,
    }

    writeln!(
        w,
        "# marginalization: {} max_abs_diff={}",
        if marginal_pass { "PASS" } else { "FAIL" },
        float17(rational_to_f64(&max_diff)),
    )?;
    writeln!(
        w,
        "# total-variance: {} expected_conditional_variance={} mc_variance={} gap={} equality={}",
        if variance_pass { "PASS" } else { "FAIL" },
        float17(rational_to_f64(&check.expected_conditional_variance)),
        float17(rational_to_f64(&check.mc_variance)),
        float17(rational_to_f64(
            &(check.mc_variance - check.expected_conditional_variance)
        )),
        equality,
    )?;

    Ok(if marginal_pass && variance_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_unknown_fn(
    args: UnknownFnArgs,
    format: OutputFormat,
    w: &mut dyn Write,
) -> Result<ExitCode> {
    let seed = resolve_seed(args.seed);
    let summary = unknown_function_experiment(args.dim, args.samples, args.reps, seed)?;
    write_header(
        w,
        "unknown-fn",
        &[
            ("dim", args.dim.to_string()),
            ("samples", args.samples.to_string()),
            ("reps", args.reps.to_string()),
            ("seed", seed.to_string()),
            ("format", format.name().to_string()),
        ],
    )?;
    let header = ["method", "samples", "reps", "mean", "population_std"];
    let rows = vec![
        vec![
            "quadrature".to_string(),
            summary.samples.to_string(),
            summary.reps.to_string(),
            float17(summary.quadrature_mean),
            float17(summary.quadrature_std),
        ],
        vec![
            "mc".to_string(),
            summary.samples.to_string(),
            summary.reps.to_string(),
            float17(summary.mc_mean),
            float17(summary.mc_std),
        ],
    ];
    match format {
        OutputFormat::Csv => {
            write_csv_row(w, &header.iter().map(|h| h.to_string()).collect::<Vec<_>>())?;
            for row in &rows {
                write_csv_row(w, row)?;
            }
        }
        OutputFormat::Table => write_table(w, &header, &rows)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_mcmc_compare(
    args: McmcCompareArgs,
    format: OutputFormat,
    w: &mut dyn Write,
) -> Result<ExitCode> {
    let seed = resolve_seed(args.seed);
    let config = McmcCompareConfig {
        chain_length: args.n,
        lag1_correlation: args.rho,
        replicates: args.replicates,
        seed,
        marginal_std: args.sigma,
    };
    let result = mcmc_variance_compare(&config)?;
    write_header(
        w,
        "mcmc-compare",
        &[
            ("rho", format!("{}", args.rho)),
            ("n", args.n.to_string()),
            ("replicates", args.replicates.to_string()),
            ("sigma", format!("{}", args.sigma)),
            ("seed", seed.to_string()),
            ("format", format.name().to_string()),
        ],
    )?;
    let header = [
        "rho",
        "tau",
        "n",
        "replicates",
        "sigma_f",
        "empirical_variance",
        "theory_variance",
        "ratio",
    ];
    let row = vec![
        format!("{}", args.rho),
        float17(result.tau),
        args.n.to_string(),
        args.replicates.to_string(),
        format!("{}", args.sigma),
        float17(result.empirical_variance),
        float17(result.theory_variance),
        float17(result.empirical_variance / result.theory_variance),
    ];
    match format {
        OutputFormat::Csv => {
            write_csv_row(w, &header.iter().map(|h| h.to_string()).collect::<Vec<_>>())?;
            write_csv_row(w, &row)?;
        }
        OutputFormat::Table => write_table(w, &header, &[row])?,
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_totalvar_sweep(
    args: TotalvarSweepArgs,
    format: OutputFormat,
    w: &mut dyn Write,
) -> Result<ExitCode> {
    if args.count == 0 {
        usage_error("--count must be at least 1");
    }
    if args.max_k < 2 {
        usage_error("--max-k must be at least 2");
    }
    let seed = resolve_seed(args.seed);
    let outcome = sweep::run(args.count, args.max_k, seed)?;
    write_header(
        w,
        "totalvar-sweep",
        &[
            ("count", args.count.to_string()),
            ("max-k", args.max_k.to_string()),
            ("seed", seed.to_string()),
            ("format", format.name().to_string()),
        ],
    )?;
    let header = [
        "index",
        "k",
        "c",
        "n",
        "prior",
        "expected_conditional_variance",
        "mc_variance",
        "gap",
        "holds",
    ];
    let rows: Vec<Vec<String>> = outcome
        .rows
        .iter()
        .map(|row| {
            vec![
                row.index.to_string(),
                row.deck_size.to_string(),
                row.distinct.to_string(),
                row.draws.to_string(),
                row.prior.clone(),
                float17(row.check.expected_conditional_variance),
                float17(row.check.mc_variance),
                float17(row.check.mc_variance - row.check.expected_conditional_variance),
                row.check.holds.to_string(),
            ]
        })
        .collect();
    match format {
        OutputFormat::Csv => {
            write_csv_row(w, &header.iter().map(|h| h.to_string()).collect::<Vec<_>>())?;
            for row in &rows {
                write_csv_row(w, row)?;
            }
        }
        OutputFormat::Table => write_table(w, &header, &rows)?,
    }
    writeln!(
        w,
        "# violations={} of {}",
        outcome.violations, args.count
    )?;
    writeln!(
        w,
        "# max_unconstrained_gap={}",
        float17(outcome.max_unconstrained_gap)
    )?;
    Ok(if outcome.violations == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

//! Command-line front end for the quadlab experiments.
//!
//! Every subcommand records its full flag set and seed in a leading `#`
//! header line, emits CSV or an aligned table, and is byte-reproducible for
//! a fixed seed at any `--threads` setting.
//!
//! Exit codes: 0 on success, 1 on runtime or verification failure, 2 on
//! usage errors.

mod commands;
mod integrands;
mod output;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use quadlab::grid::Rule;

#[derive(Parser)]
#[command(
    name = "quadlab",
    version,
    about = "Monte Carlo and composite Newton-Cotes quadrature laboratory",
    propagate_version = true
)]
struct Cli {
    /// Cap on worker threads for parallel sections (0 = all cores).
    /// Results do not depend on this setting.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Table)]
    format: OutputFormat,

    /// Write output to this path instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Table,
}

impl OutputFormat {
    fn name(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Table => "table",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RuleArg {
    Rectangular,
    Midpoint,
    Trapezoidal,
    Simpson,
}

impl From<RuleArg> for Rule {
    fn from(arg: RuleArg) -> Rule {
        match arg {
            RuleArg::Rectangular => Rule::Rectangular,
            RuleArg::Midpoint => Rule::Midpoint,
            RuleArg::Trapezoidal => Rule::Trapezoidal,
            RuleArg::Simpson => Rule::Simpson,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Mc,
    Quad,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate an integral over the unit cube.
    ///
    /// CSV schema: method,function,dimension,sample_count,seed,estimate,
    /// theoretical_std,empirical_std
    Integrate(IntegrateArgs),

    /// Estimate the error-decay exponent of a composite rule per dimension.
    ///
    /// CSV schema: dimension,error_exponent,theory_chi,chi_hat,chi_hat_std
    ChiSim(ChiSimArgs),

    /// Verify the shuffle-marginalization identity and the total-variance
    /// inequality on one deck, in exact rational arithmetic.
    ///
    /// CSV schema: counts,pmf_quadrature_marginal,pmf_hypergeometric,
    /// abs_diff (counts joined with '|'); verdicts follow as '#' comments.
    DiscreteVerify(DiscreteVerifyArgs),

    /// Sample functions that are unknown until evaluated, on a midpoint grid
    /// and at uniform random points, and compare pooled statistics.
    ///
    /// CSV schema: method,samples,reps,mean,population_std
    UnknownFn(UnknownFnArgs),

    /// Compare the variance of an autocorrelated chain's mean against the
    /// integrated-autocorrelation-time prediction.
    ///
    /// CSV schema: rho,tau,n,replicates,sigma_f,empirical_variance,
    /// theory_variance,ratio
    McmcCompare(McmcCompareArgs),

    /// Run the total-variance inequality on randomized decks and count
    /// violations (must be zero).
    ///
    /// CSV schema: index,k,c,n,prior,expected_conditional_variance,
    /// mc_variance,gap,holds
    TotalvarSweep(TotalvarSweepArgs),
}

#[derive(Debug, clap::Args)]
struct IntegrateArgs {
    /// Estimation method; inferred from --rule or --n when omitted.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,

    /// Composite rule for quadrature.
    #[arg(long, value_enum)]
    rule: Option<RuleArg>,

    /// Dimension of the cube.
    #[arg(long, default_value_t = 1)]
    dim: usize,

    /// Points per axis for quadrature (total grid is m^dim).
    #[arg(short)]
    m: Option<usize>,

    /// Monte Carlo sample count.
    #[arg(long)]
    n: Option<u64>,

    /// Monte Carlo seed (default: QUADLAB_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,

    /// Integrand: constant | linear | square | sum-coords | product-coords
    /// | poly:c0,c1,... (separable, per-axis polynomial).
    #[arg(long = "fn")]
    function: String,
}

#[derive(Debug, clap::Args)]
struct ChiSimArgs {
    #[arg(long, value_enum)]
    rule: RuleArg,

    /// Comma-separated dimensions.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
    dims: Vec<usize>,

    /// Samples per error replicate.
    #[arg(long, default_value_t = 65536)]
    n: u64,

    /// Error samples per exponent estimate.
    #[arg(long, default_value_t = 100)]
    inner_reps: usize,

    /// Independent repetitions of the whole estimate.
    #[arg(long, default_value_t = 10)]
    outer_reps: usize,

    /// Derivative terms are uniform on [-eta, eta].
    #[arg(long, default_value_t = 1.0)]
    eta: f64,

    /// Master seed (default: QUADLAB_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, clap::Args)]
struct DiscreteVerifyArgs {
    /// Deck values by position, e.g. --deck 1,2,3,2.
    #[arg(long, value_delimiter = ',', required = true)]
    deck: Vec<String>,

    /// Number of draws.
    #[arg(long)]
    n: usize,

    /// Pin a position to a known value, e.g. --pin 0=3. Repeatable.
    #[arg(long)]
    pin: Vec<String>,

    /// Largest deck accepted for exact enumeration.
    #[arg(long, default_value_t = 8)]
    max_k: usize,
}

#[derive(Debug, clap::Args)]
struct UnknownFnArgs {
    #[arg(long, default_value_t = 1)]
    dim: usize,

    /// Evaluations per method per repetition.
    #[arg(long, default_value_t = 100)]
    samples: usize,

    /// Number of independently generated functions.
    #[arg(long, default_value_t = 10000)]
    reps: usize,

    /// Master seed (default: QUADLAB_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, clap::Args)]
struct McmcCompareArgs {
    /// Lag-1 correlation of the chain, in [0, 1).
    #[arg(long)]
    rho: f64,

    /// Chain length.
    #[arg(long)]
    n: u64,

    /// Number of independent chains.
    #[arg(long, default_value_t = 200)]
    replicates: usize,

    /// Marginal standard deviation of the chain.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,

    /// Master seed (default: QUADLAB_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, clap::Args)]
struct TotalvarSweepArgs {
    /// Number of randomized decks.
    #[arg(long, default_value_t = 1000)]
    count: usize,

    /// Largest deck size generated.
    #[arg(long, default_value_t = 8)]
    max_k: usize,

    /// Master seed (default: QUADLAB_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
}

/// Reports a semantic argument problem through clap, exiting with code 2.
fn usage_error(message: &str) -> ! {
    let mut cmd = Cli::command();
    cmd.error(clap::error::ErrorKind::InvalidValue, message).exit()
}

/// Seed resolution: flag wins, then the QUADLAB_SEED environment variable,
/// then zero.
fn resolve_seed(flag: Option<u64>) -> u64 {
    if let Some(seed) = flag {
        return seed;
    }
    match std::env::var("QUADLAB_SEED") {
        Ok(text) => match text.parse() {
            Ok(seed) => seed,
            Err(_) => usage_error(&format!(
                "QUADLAB_SEED must be a 64-bit unsigned integer, got {text:?}"
            )),
        },
        Err(_) => 0,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    let run = || commands::dispatch(cli.command, cli.format, cli.out.as_deref());
    let outcome = if threads > 0 {
        match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(run),
            Err(e) => {
                eprintln!("error: cannot build a {threads}-thread pool: {e}");
                return ExitCode::from(1);
            }
        }
    } else {
        run()
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

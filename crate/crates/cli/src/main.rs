//! `sostest`: seeded interpolation sweeps, SOS checks, certificates and
//! testers from the command line.
//!
//! Exit codes: 0 success, 1 NO verdict / contradiction / uncertified
//! certificate (output is still written), 2 usage, 3 numerical failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use config::{Config, Settings};

#[derive(Parser, Debug)]
#[command(name = "sostest", version, about = "Property testing for sums of squares over the Gaussian measure")]
#[command(after_help = "Precedence: flags, then the --config file, then the defaults shown above.")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Default)]
pub struct GlobalArgs {
    /// Base seed; sweeps use seed, seed+1, ... [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write output to this file instead of stdout
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Evaluation tolerance of the feasibility search [default: 1e-6]
    #[arg(long, global = true)]
    pub tol_eval: Option<f64>,
    /// PSD tolerance [default: 1e-8]
    #[arg(long, global = true)]
    pub tol_psd: Option<f64>,
    /// Norm-bound tolerance [default: 1e-6]
    #[arg(long, global = true)]
    pub tol_norm: Option<f64>,
    /// Iteration cap of the feasibility search [default: 100000]
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    /// Output format; csv is only available for interp-sweep [default: csv for interp-sweep, json otherwise]
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// TOML file supplying defaults
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValuesKind {
    /// A random unit vector, drawn from the sweep seed
    Unit,
    /// All ones
    Ones,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Family {
    /// Explicit graded moments of the generalized Motzkin polynomial
    Motzkin,
    /// Parity-block moments for the r = 2 Motzkin polynomial
    MotzkinBlock,
    /// Closure certificate for a random 4-XOR instance
    Xor,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Minimum-norm interpolation diagnostics over a grid of (n, m, seed)
    InterpSweep(SweepArgs),
    /// Run the SOS feasibility search on a polynomial file or a sample file
    SosCheck(SosCheckArgs),
    /// Build a pseudo-expectation certificate and its distance bound
    Certify(CertifyArgs),
    /// Certified farness plus an accepting SOS tester run on the same polynomial
    LowerboundDemo(DemoArgs),
    /// Sign tester on Gaussian samples of a polynomial file
    NonnegTest(NonnegArgs),
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Dimensions, comma separated [default: 32,64,128]
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Interpolation degree [default: 2]
    #[arg(long)]
    pub d: Option<usize>,
    /// Sample counts, comma separated; overrides --m-exponent
    #[arg(long, value_delimiter = ',')]
    pub m: Option<Vec<usize>>,
    /// Use m = floor(n^e) for each n [default: 0.8]
    #[arg(long)]
    pub m_exponent: Option<f64>,
    /// Number of seeds per (n, m) [default: 10]
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Values to interpolate [default: unit]
    #[arg(long, value_enum)]
    pub values: Option<ValuesKind>,
    /// Also compute ||g²||, which is expensive for large n
    #[arg(long)]
    pub gsq: bool,
}

#[derive(Args, Debug)]
pub struct SosCheckArgs {
    /// Polynomial JSON, or {"n", "half_degree", "samples": [{"point", "value"}]}
    pub file: PathBuf,
    /// Half degree d of the Gram matrix [default: ceil(deg/2) for polynomials; required for samples]
    #[arg(long)]
    pub half_degree: Option<usize>,
    /// Bound on the Hermite norm of f_M [default: none for polynomials, 1 for samples]
    #[arg(long)]
    pub norm_bound: Option<f64>,
    /// Skip the interpolation warm start for sample files
    #[arg(long)]
    pub cold: bool,
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    #[arg(value_enum)]
    pub family: Family,
    /// Motzkin parameter, even and positive [default: 2]
    #[arg(long)]
    pub r: Option<u32>,
    /// Motzkin constant c >= 0, decimal or p/q [default: 0]
    #[arg(long)]
    pub c: Option<String>,
    /// Scale k = base^(1/root) of the graded moments [default: base 2+c]
    #[arg(long)]
    pub k_base: Option<String>,
    /// [default: r]
    #[arg(long)]
    pub k_root: Option<u32>,
    /// Exponent offset of the graded moments [default: (r+2)² + (2r+2)²]
    #[arg(long)]
    pub nu: Option<i64>,
    /// Number of variables [default: 2 for motzkin, 16 for xor]
    #[arg(long)]
    pub n: Option<usize>,
    /// XOR equations [default: 40]
    #[arg(long)]
    pub m: Option<usize>,
    /// XOR closure degree [default: 4]
    #[arg(long)]
    pub d: Option<usize>,
    /// XOR equations as a JSON list of {"vars": [4 ids], "sign": ±1}, replacing the random instance
    #[arg(long)]
    pub equations: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DemoArgs {
    /// [default: 10]
    #[arg(long)]
    pub n: Option<usize>,
    /// [default: 2]
    #[arg(long)]
    pub r: Option<u32>,
    /// [default: 1]
    #[arg(long)]
    pub c: Option<f64>,
    /// Samples handed to the tester [default: 8]
    #[arg(long)]
    pub m: Option<usize>,
}

#[derive(Args, Debug)]
pub struct NonnegArgs {
    /// Polynomial JSON
    pub file: PathBuf,
    /// Distance parameter ε in (0, 1] [default: 0.1]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Degree used in the sample bound [default: degree of the polynomial]
    #[arg(long)]
    pub degree: Option<usize>,
}

fn run(cli: Cli) -> Result<u8, output::CliError> {
    let config = Config::load(cli.global.config.as_deref())?;
    let settings = Settings::resolve(&cli.global, &config)?;
    match cli.command {
        Command::InterpSweep(a) => commands::interp_sweep(&a, &config.interp_sweep, &settings),
        Command::SosCheck(a) => commands::sos_check(&a, &config.sos_check, &settings),
        Command::Certify(a) => commands::certify(&a, &config.certify, &settings),
        Command::LowerboundDemo(a) => commands::lowerbound_demo(&a, &config.lowerbound_demo, &settings),
        Command::NonnegTest(a) => commands::nonneg_test(&a, &config.nonneg_test, &settings),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("sostest: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

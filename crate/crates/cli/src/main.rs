//! `ahm-lab`: build candidate unitaries, test them for criticality and
//! local maximality of the 1-norm, and run expectation scans and searches.
//!
//! Exit codes: 0 success, 2 input error, 3 precondition failure, 4 internal
//! numerical failure.

mod commands;
mod render;
mod search;

use ahm_core::Tolerances;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "ahm-lab", version, about = "Critical points of the 1-norm on the unitary group")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output format; each command picks a default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Tolerance override, e.g. `--tol neg=1e-7`. Repeatable.
    #[arg(long = "tol", global = true, value_name = "NAME=VALUE")]
    pub tol: Vec<String>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Rescale {
    /// Divide by √N (Hadamard matrix to unitary).
    SqrtN,
}

#[derive(Args, Debug, Clone)]
pub struct MatrixInput {
    /// Matrix file, JSON or plain text; `-` or absent reads stdin.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub rescale: Option<Rescale>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a matrix from a named family.
    Construct(ConstructArgs),
    /// Criticality, balance, and exclusion report for a unitary.
    Check(CheckArgs),
    /// Evaluate the second-order form Φ(U,B).
    Phi(PhiArgs),
    /// Spectrum of the Hessian form on hermitian directions.
    Spectrum(SpectrumArgs),
    /// Expected Φ over random directions.
    Expect(ExpectArgs),
    /// Sign scan of circulant expectations.
    Scan(ScanArgs),
    /// Multi-start ascent of the 1-norm.
    Search(SearchArgs),
    /// Defect spaces of a complex Hadamard matrix.
    Defect(DefectArgs),
}

#[derive(Args, Debug)]
pub struct ConstructArgs {
    /// fourier, fourier_group, kn, pattern, fano, paley11, pg2, circulant.
    pub family: String,
    #[arg(long)]
    pub n: Option<usize>,
    /// Factor sizes for fourier_group, e.g. `2,2`.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,
    /// Design key for `pattern`: fano, paley11, pg2_<q>, kn_<N>.
    #[arg(long)]
    pub design: Option<String>,
    #[arg(long, default_value = "real-minus")]
    pub branch: String,
    /// Prime order for pg2.
    #[arg(long)]
    pub q: Option<u64>,
    /// Real eigenvalues (±1) of a circulant.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub signs: Vec<f64>,
    /// Eigenphases θ_k of a circulant, eigenvalues e^{iθ_k}.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub phases: Vec<f64>,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[command(flatten)]
    pub input: MatrixInput,
}

#[derive(Args, Debug)]
pub struct PhiArgs {
    #[command(flatten)]
    pub input: MatrixInput,
    /// all-ones, identity, u, one-minus-u, or a matrix file.
    #[arg(long, default_value = "all-ones")]
    pub direction: String,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub input: MatrixInput,
    /// Eigenvalues with modulus at most this count toward the kernel.
    #[arg(long, default_value_t = 1e-9)]
    pub kernel_threshold: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Model {
    /// Circulant symmetric orthogonal directions (mirrored ±1 eigenvalues).
    Symmetric,
    /// Circulant self-adjoint directions (i.i.d. ±1 eigenvalues).
    Selfadjoint,
    /// B = G + G* with complex Gaussian G.
    Gaussian,
}

#[derive(Args, Debug)]
pub struct ExpectArgs {
    /// Built-in family (`kn`); alternatively give `--matrix`.
    #[arg(long, conflicts_with = "matrix")]
    pub family: Option<String>,
    /// Size or inclusive range, e.g. `5` or `3..7`.
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub rescale: Option<Rescale>,
    /// Direction model; inferred from the matrix when absent.
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    /// Enumerate all sign vectors regardless of size.
    #[arg(long, conflicts_with = "no_exact")]
    pub exact: bool,
    /// Never enumerate.
    #[arg(long)]
    pub no_exact: bool,
    /// Monte Carlo samples.
    #[arg(long)]
    pub mc: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ScanArgs {
    /// circulant-symmetric or circulant-selfadjoint.
    #[arg(long, default_value = "circulant-symmetric")]
    pub family: String,
    /// Size or inclusive range.
    #[arg(long)]
    pub n: String,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub starts: usize,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    /// Two limits are identified when some permutation and rephasing brings
    /// one within this distance of the other.
    #[arg(long, default_value_t = 1e-5)]
    pub dedup_tol: f64,
}

#[derive(Args, Debug)]
pub struct DefectArgs {
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// The input is already divided by √N.
    #[arg(long)]
    pub scaled: bool,
}

/// Failure with an exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<ahm_core::Error> for Failure {
    fn from(e: ahm_core::Error) -> Self {
        let code = if e.is_input_error() {
            2
        } else if e.is_numerical() {
            4
        } else {
            3
        };
        Failure { code, message: e.to_string() }
    }
}

pub type CmdResult<T> = std::result::Result<T, Failure>;

fn tolerances(overrides: &[String]) -> CmdResult<Tolerances> {
    let mut tol = Tolerances::default();
    for o in overrides {
        tol.apply_override(o)?;
    }
    Ok(tol)
}

fn run(cli: Cli) -> CmdResult<String> {
    if let Some(t) = cli.global.threads {
        if t == 0 {
            return Err(Failure::input("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure { code: 4, message: e.to_string() })?;
    }
    let tol = tolerances(&cli.global.tol)?;
    let ctx = commands::Context { seed: cli.global.seed, format: cli.global.format, tol };
    match &cli.command {
        Command::Construct(a) => commands::construct(&ctx, a),
        Command::Check(a) => commands::check(&ctx, a),
        Command::Phi(a) => commands::phi(&ctx, a),
        Command::Spectrum(a) => commands::spectrum(&ctx, a),
        Command::Expect(a) => commands::expect(&ctx, a),
        Command::Scan(a) => commands::scan(&ctx, a),
        Command::Search(a) => commands::search(&ctx, a),
        Command::Defect(a) => commands::defect(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.global.out.clone();
    let result = run(cli).and_then(|text| match &out {
        Some(path) => std::fs::write(path, &text)
            .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure { code: 4, message: e.to_string() }),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("ahm-lab: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

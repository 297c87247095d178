//! `ising-lab`: tables of diagonal correlations, form-factor integrals,
//! boundary scans and the diagonal susceptibility.
//!
//! Exit codes: 0 success, 1 bad input or domain error, 2 a result was
//! produced but did not reach its requested accuracy.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod config;
mod table;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use crate::args::{ComplexArg, EpsArg, GridArg, RadiiArg};
use crate::config::Config;
use crate::table::Format;

pub const THREADS_ENV: &str = "ISING_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ising-lab", version, about, allow_negative_numbers = true)]
struct Cli {
    /// Output format: csv or json [default: csv].
    #[arg(long, global = true)]
    format: Option<Format>,
    /// Flat TOML file of defaults; keys are long flag names.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the table here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

/// Coupling, given either directly or through the temperature.
#[derive(Debug, Clone, clap::Args)]
pub struct CouplingArgs {
    /// Coupling k as `re` or `re,im`, |k| < 1.
    #[arg(long)]
    pub k: Option<ComplexArg>,
    /// Inverse temperature times coupling; gives k = sinh(2 betaJ)^-2.
    #[arg(long, conflicts_with = "k")]
    pub beta_j: Option<f64>,
}

/// Integration rule for the form-factor integrals.
#[derive(Debug, Clone, clap::Args)]
pub struct QuadArgs {
    /// Gauss nodes per axis (tensor rule, n <= 2).
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Geometric panels toward the endpoint; automatic when omitted.
    #[arg(long)]
    pub grading: Option<u32>,
    /// Monte Carlo samples; selects Monte Carlo instead of the tensor rule.
    #[arg(long, conflicts_with = "nodes")]
    pub mc_samples: Option<usize>,
    /// Monte Carlo seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Relative error target; results above it are flagged.
    #[arg(long)]
    pub target: Option<f64>,
}

/// Route settings shared by `chi` and `sweep`.
#[derive(Debug, Clone, clap::Args)]
pub struct RouteArgs {
    /// fredholm, toeplitz_direct or integral [default: fredholm].
    #[arg(long)]
    pub route: Option<String>,
    /// Absolute tolerance on the summed series [default: 1e-12].
    #[arg(long)]
    pub tol: Option<f64>,
    /// Largest separation summed by the toeplitz_direct route [default: 64].
    #[arg(long)]
    pub toeplitz_n_max: Option<usize>,
    /// Number of form-factor terms in the integral route [default: 2].
    #[arg(long)]
    pub integral_n_max: Option<usize>,
    /// Gauss nodes per axis in the integral route [default: 48].
    #[arg(long)]
    pub nodes: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Diagonal correlation <s_00 s_NN> from the Toeplitz determinant.
    Correlation {
        #[command(flatten)]
        coupling: CouplingArgs,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Compares D(N) with M^2 det(I - K_N) for N = 1..n-max.
    GcboCheck {
        #[command(flatten)]
        coupling: CouplingArgs,
        /// [default: 8]
        #[arg(long)]
        n_max: Option<usize>,
        /// Fredholm truncation tolerance [default: 1e-14].
        #[arg(long)]
        tol: Option<f64>,
    },
    /// The diagonal susceptibility beta^-1 chi_d by one route.
    Chi {
        #[command(flatten)]
        coupling: CouplingArgs,
        #[command(flatten)]
        route: RouteArgs,
    },
    /// One form-factor integral S_n(kappa).
    Sn {
        /// kappa = k^2 as `re` or `re,im`, |kappa| < 1.
        #[arg(long)]
        kappa: Option<ComplexArg>,
        #[arg(long)]
        n: Option<usize>,
        /// Sn2 (Vandermonde) or Sn1 (Cauchy) [default: Sn2].
        #[arg(long)]
        form: Option<String>,
        #[command(flatten)]
        quad: QuadArgs,
    },
    /// Radial scan of a singular integral toward a root of unity.
    BoundaryScan {
        /// Root of unity exp(2 pi i p/q) as `p/q`.
        #[arg(long)]
        eps: Option<EpsArg>,
        #[arg(long)]
        n: Option<usize>,
        /// Derivative order.
        #[arg(long)]
        ell: Option<u32>,
        /// Radii 1 - 2^-j for j = j0..j1 [default: 4..10].
        #[arg(long)]
        radii: Option<RadiiArg>,
        /// main_term or exact [default: main_term].
        #[arg(long)]
        proxy: Option<String>,
        #[command(flatten)]
        quad: QuadArgs,
    },
    /// Bounded/diverging classification of the derivatives of S_1 + S_2.
    Smoothness {
        /// [default: 1/2, i.e. kappa -> -1]
        #[arg(long)]
        eps: Option<EpsArg>,
        /// Highest derivative order [default: 7].
        #[arg(long)]
        ell_max: Option<u32>,
        /// [default: 4..10]
        #[arg(long)]
        radii: Option<RadiiArg>,
        /// main_term or exact [default: main_term].
        #[arg(long)]
        proxy: Option<String>,
        #[command(flatten)]
        quad: QuadArgs,
    },
    /// beta^-1 chi_d over a grid of k, one row per point.
    Sweep {
        /// `start:stop:step`, or k values separated by `;` or spaces.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<GridArg>,
        #[command(flatten)]
        route: RouteArgs,
    },
}

/// Every key a config file may contain.
const CONFIG_KEYS: &[&str] = &[
    "format",
    "output",
    "k",
    "beta-j",
    "n",
    "n-max",
    "tol",
    "route",
    "toeplitz-n-max",
    "integral-n-max",
    "nodes",
    "grading",
    "mc-samples",
    "seed",
    "target",
    "kappa",
    "form",
    "eps",
    "ell",
    "ell-max",
    "radii",
    "proxy",
    "grid",
];

/// Non-error outcome of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// Output was written but some result missed its accuracy target.
    Flagged,
    /// Output was written but some rows failed on bad input.
    DomainError,
}

fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("{THREADS_ENV}={raw:?} is not a non-negative integer"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<Status> {
    init_threads()?;
    let cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    cfg.check_keys(CONFIG_KEYS)?;
    let format = cfg.pick(cli.format, "format")?.unwrap_or(Format::Csv);
    let output = cfg.pick::<PathBuf>(cli.output, "output")?;
    let (table, status) = commands::execute(&cli.command, &cfg)?;
    match output {
        Some(path) => {
            let file = File::create(&path)
                .with_context(|| format!("creating output file {}", path.display()))?;
            let mut w = BufWriter::new(file);
            table.write(format, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            table.write(format, &mut w)?;
            w.flush()?;
        }
    }
    if status == Status::Flagged {
        eprintln!("warning: some results did not reach the requested accuracy (see flags)");
    }
    Ok(status)
}

/// 2 for convergence failures, 1 for everything else.
fn error_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<ising_diag::Error>() {
        Some(inner) if inner.is_convergence() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Flagged) => ExitCode::from(2),
        Ok(Status::DomainError) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(error_code(&e))
        }
    }
}

/// Shared guard for mutually exclusive settings that may come from the file.
pub fn exclusive(a: bool, b: bool, what: &str) -> Result<()> {
    if a && b {
        bail!("{what} are mutually exclusive");
    }
    Ok(())
}

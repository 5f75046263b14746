//! `kneadlab`: batch front end for the kneadlab core library.

mod commands;
mod family;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use output::{render, Format};

#[derive(Debug, Parser)]
#[command(name = "kneadlab", version, about = "Kneading, transversality and transfer-operator experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    /// Write output to a file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FamilyArgs {
    /// quad, quartic, sine, logistic, tent, flat, lorenz, lorenz-flat, arnold, powerlaw
    #[arg(long)]
    pub family: Option<String>,
    /// Family kind as JSON, inline or a file path.
    #[arg(long = "family-json")]
    pub family_json: Option<String>,
    /// Exponent for powerlaw / flat families; also the sector exponent.
    #[arg(long)]
    pub ell: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    /// Parameter values (comma separated for several parameters).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub param: Vec<f64>,
    /// Use every superstable parameter of this minimal period instead.
    #[arg(long)]
    pub period: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub from: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub to: Option<f64>,
    /// Grid cells for the superstable search.
    #[arg(long, default_value_t = 1 << 16)]
    pub steps: usize,
    /// Orbit closure tolerance (family default when absent).
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = 0.1)]
    pub rmax: f64,
    #[arg(long, default_value_t = 16)]
    pub rays: usize,
    #[arg(long, default_value_t = 24)]
    pub radii: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Real motions (real on the real axis) instead of complex ones.
    #[arg(long)]
    pub real: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Superstable parameters of a given period, or the parameter of a word.
    Solve {
        #[command(flatten)]
        fam: FamilyArgs,
        #[arg(long)]
        period: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        word: Option<String>,
        #[arg(long, allow_negative_numbers = true)]
        from: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        to: Option<f64>,
        #[arg(long, default_value_t = kneadlab_core::solver::GRID)]
        steps: usize,
    },
    /// Kneading sequences at given parameters.
    Knead {
        #[command(flatten)]
        fam: FamilyArgs,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        param: Vec<f64>,
        /// Word length.
        #[arg(long, default_value_t = 40)]
        steps: usize,
    },
    /// Kneading sequences along a parameter grid, with order checks.
    Scan {
        #[command(flatten)]
        fam: FamilyArgs,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        #[arg(long, default_value_t = 2001)]
        steps: usize,
        #[arg(long, default_value_t = 40)]
        prefix: usize,
    },
    /// Transversality sums and oriented determinant quotients.
    Trans {
        #[command(flatten)]
        fam: FamilyArgs,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Spectrum of the transfer operator.
    Spectrum {
        #[command(flatten)]
        fam: FamilyArgs,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Iterated lifts of a random holomorphic motion.
    Lift {
        #[command(flatten)]
        fam: FamilyArgs,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        param: Vec<f64>,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 40)]
        iterations: usize,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Sector regularity of successive lifts.
    Sectors {
        #[command(flatten)]
        fam: FamilyArgs,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        param: Vec<f64>,
        #[arg(long, allow_hyphen_values = true)]
        word: Option<String>,
        #[arg(long, default_value_t = 0.05)]
        theta: f64,
        #[command(flatten)]
        grid: GridArgs,
        /// Number of lifts (word length when absent).
        #[arg(long)]
        lifts: Option<usize>,
    },
    /// Markov data of a piecewise-linear map given by its turning values.
    Pl {
        #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
        epsilon: i8,
        #[arg(long, value_delimiter = ',', required = true)]
        kappa: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        values: Vec<f64>,
    },
    /// Two-parameter Lorenz families: relations, orientation, spectrum.
    Lorenz {
        #[command(flatten)]
        fam: FamilyArgs,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        param: Vec<f64>,
        /// Two relations `from:q:to`, comma separated, to refine `param` by Newton.
        #[arg(long, value_delimiter = ',')]
        relations: Vec<String>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Constants for odd exponents, e.g. `--odd-ell 3..31`.
    Constants {
        #[arg(long = "odd-ell", default_value = "3..31")]
        odd_ell: String,
    },
    /// Covering-domain geometry of the separation property.
    Separation {
        #[command(flatten)]
        fam: FamilyArgs,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        param: Vec<f64>,
    },
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("KNEADLAB_THREADS") {
        let n: usize = v.parse().with_context(|| format!("KNEADLAB_THREADS={v}"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<Option<bool>> {
    configure_threads()?;
    let report = match cli.command {
        Command::Solve { fam, period, word, from, to, steps } => {
            commands::solve(&fam, period, word.as_deref(), from, to, steps)?
        }
        Command::Knead { fam, param, steps } => commands::knead(&fam, &param, steps)?,
        Command::Scan { fam, from, to, steps, prefix } => {
            commands::scan(&fam, from, to, steps, prefix)?
        }
        Command::Trans { fam, params } => commands::trans(&fam, &params)?,
        Command::Spectrum { fam, params } => commands::spectrum(&fam, &params)?,
        Command::Lift { fam, param, grid, iterations, tol } => {
            commands::lift(&fam, &param, &grid, iterations, tol)?
        }
        Command::Sectors { fam, param, word, theta, grid, lifts } => {
            commands::sectors(&fam, &param, word.as_deref(), theta, &grid, lifts)?
        }
        Command::Pl { epsilon, kappa, values } => commands::pl(epsilon, kappa, values)?,
        Command::Lorenz { fam, param, relations, tol } => {
            commands::lorenz(&fam, &param, &relations, tol)?
        }
        Command::Constants { odd_ell } => commands::constants(&odd_ell)?,
        Command::Separation { fam, param } => commands::separation(&fam, &param)?,
    };
    let mut sink: Box<dyn Write> = match &cli.out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    render(&report, cli.format, &mut *sink)?;
    sink.flush()?;
    Ok(report.verdict)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Some(false)) => ExitCode::from(2),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use combqft::format::ConnectionSpec;
use combqft::metric::WeightPreset;

mod commands;
mod report;

use report::{Format, Table};

/// Gluing verification and continuum-limit experiments for Gaussian fields
/// on metrized simplicial complexes.
#[derive(Parser, Debug)]
#[command(name = "combqft", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the determinant, partition-function and critical-action gluing identities.
    VerifyGluing(Options),
    /// Determinant ratios and seam Gram ratios under refinement of a circle.
    Converge {
        #[command(flatten)]
        options: Options,
        /// Length of the interval before it is closed up.
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Edges at the coarsest level.
        #[arg(long, default_value_t = 8)]
        n0: usize,
        /// Number of doublings.
        #[arg(long, default_value_t = 6)]
        steps: usize,
    },
    /// Spectra and determinants of the Laplacians of a complex.
    Spectrum(Options),
    /// Partition functions, or the seam integral when the complex is glued.
    Partition {
        #[command(flatten)]
        options: Options,
        /// Boundary data, comma separated; random from the seed when omitted.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        eta: Option<Vec<f64>>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct Options {
    /// Complex description file.
    #[arg(long, conflicts_with = "preset")]
    complex: Option<PathBuf>,
    /// Named complex, battery or weight preset, depending on the subcommand.
    #[arg(long)]
    preset: Option<String>,
    /// Weight preset: diagonal-unit, lumped or whitney.
    #[arg(long)]
    weights: Option<WeightPreset>,
    #[arg(long, default_value_t = 1)]
    rank: usize,
    /// Use a complex vector bundle.
    #[arg(long)]
    complex_field: bool,
    /// trivial, pure-gauge:SEED or holonomy:THETA.
    #[arg(long)]
    connection: Option<ConnectionSpec>,
    /// Squared masses, comma separated.
    #[arg(long, value_delimiter = ',')]
    mass: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Instances drawn from a random battery.
    #[arg(long, default_value_t = 216)]
    count: usize,
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Why a run did not succeed.
#[derive(Debug)]
pub enum Failure {
    /// A verified property does not hold; the report is still written.
    Assertion(String),
    Config(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Config(e.into())
    }
}

fn write_table(table: &Table, options: &Options) -> Result<(), Failure> {
    let mut out: Box<dyn Write> = match &options.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    table.write(options.format, &mut out)?;
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (table, options, verdict) = match cli.command {
        Command::VerifyGluing(options) => {
            let (table, verdict) = commands::verify_gluing(&options)?;
            (table, options, verdict)
        }
        Command::Converge {
            options,
            lambda,
            n0,
            steps,
        } => {
            let (table, verdict) = commands::converge(&options, lambda, n0, steps)?;
            (table, options, verdict)
        }
        Command::Spectrum(options) => (commands::spectrum(&options)?, options, Ok(())),
        Command::Partition { options, eta } => {
            let (table, verdict) = commands::partition(&options, eta.as_deref())?;
            (table, options, verdict)
        }
    };
    write_table(&table, &options)?;
    verdict.map_err(Failure::Assertion)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertion(message)) => {
            eprintln!("{message}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

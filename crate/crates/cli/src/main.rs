//! Command-line driver: experiment runs, ADC power tables, quantizer dumps,
//! and scenario analysis. Exit codes: 0 success, 1 usage or configuration
//! error, 2 internal error.

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

mod cmds;
mod config;
mod manifest;
mod svg;

/// A command failed; the variant picks the exit code.
#[derive(Debug)]
pub enum CmdError {
    /// Bad flags or configuration (exit 1).
    Usage(String),
    /// Unexpected failure while doing the work (exit 2).
    Internal(String),
}

impl std::fmt::Display for CmdError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) | Self::Internal(m) => f.write_str(m),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "dqalms",
    version,
    about = "Diffusion LMS over coarsely quantized signals: experiments and analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the ensemble experiment and write MSD learning curves.
    Run {
        /// Experiment configuration file (`key = value` lines).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for msd.csv, msd.svg, and the manifest.
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for the trial ensemble (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Emit SVG plots (default).
        #[arg(long, overrides_with = "no_svg")]
        svg: bool,
        /// Skip SVG plots.
        #[arg(long)]
        no_svg: bool,
    },
    /// Tabulate total network ADC power across resolutions.
    Power {
        /// Number of agents (two ADCs each).
        #[arg(long, default_value_t = 20)]
        nodes: usize,
        /// ADC bandwidth in Hz.
        #[arg(long, default_value_t = 2.0e5)]
        bandwidth: f64,
        /// Energy per conversion step in joules.
        #[arg(long, default_value_t = 494e-15)]
        conversion_energy: f64,
        /// Lowest resolution in the table.
        #[arg(long, default_value_t = 1)]
        min_bits: u32,
        /// Highest resolution in the table.
        #[arg(long, default_value_t = 12)]
        max_bits: u32,
        /// Output directory for power.csv (and power.svg).
        #[arg(long)]
        out: PathBuf,
        /// Emit SVG plots (default).
        #[arg(long, overrides_with = "no_svg")]
        svg: bool,
        /// Skip SVG plots.
        #[arg(long)]
        no_svg: bool,
    },
    /// Design a quantizer and dump its cells plus summary quantities.
    Quantizer {
        /// ADC resolution in bits (1-12).
        #[arg(long)]
        bits: u32,
        /// Output directory for quantizer.csv and quantizer_stats.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Stability, complexity, and steady-state analysis of a scenario.
    Analyze {
        /// Experiment configuration file (`key = value` lines).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for the report CSVs.
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for the covariance estimates.
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn dispatch(cli: Cli) -> Result<(), CmdError> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            workers,
            svg: _,
            no_svg,
        } => cmds::cmd_run(&config, &out, seed, workers, !no_svg),
        Command::Power {
            nodes,
            bandwidth,
            conversion_energy,
            min_bits,
            max_bits,
            out,
            svg: _,
            no_svg,
        } => cmds::cmd_power(nodes, bandwidth, conversion_energy, min_bits, max_bits, &out, !no_svg),
        Command::Quantizer { bits, out } => cmds::cmd_quantizer(bits, &out),
        Command::Analyze {
            config,
            out,
            seed,
            workers,
        } => cmds::cmd_analyze(&config, &out, seed, workers),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => {}
        Err(CmdError::Usage(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(1);
        }
        Err(CmdError::Internal(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(2);
        }
    }
}

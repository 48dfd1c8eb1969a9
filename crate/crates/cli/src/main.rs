//! `pwlv`: bound tables, verification runs, model emission and exact oracle
//! values for piecewise-linear networks.
//!
//! Exit codes: 0 robust, 1 counterexample, 2 input error, 3 inconclusive,
//! 4 size guard exceeded.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pwlv::formulation::{BoundMethod, CoeffMode, Mode};

#[derive(Parser)]
#[command(name = "pwlv", version, about = "Strong MIP formulations and verification for piecewise-linear networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Formulation {
    Bigm,
    Extended,
    IdealCuts,
}

impl Formulation {
    pub fn mode(self) -> Mode {
        match self {
            Formulation::Bigm => Mode::BigM,
            Formulation::Extended => Mode::Extended,
            Formulation::IdealCuts => Mode::BigMWithCuts,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Formulation::Bigm => "bigm",
            Formulation::Extended => "extended",
            Formulation::IdealCuts => "ideal-cuts",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Coeff {
    Box,
    Tjeng,
}

impl Coeff {
    pub fn mode(self) -> CoeffMode {
        match self {
            Coeff::Box => CoeffMode::Box,
            Coeff::Tjeng => CoeffMode::Tjeng,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Bounds {
    Interval,
    Lp,
}

impl Bounds {
    pub fn method(self) -> BoundMethod {
        match self {
            Bounds::Interval => BoundMethod::Interval,
            Bounds::Lp => BoundMethod::Lp,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Format {
    Mps,
    Lp,
}

#[derive(clap::Args)]
pub struct ModelArgs {
    /// Network file (JSON).
    pub network: PathBuf,
    /// Instance file (JSON).
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value = "bigm")]
    pub formulation: Formulation,
    #[arg(long, value_enum, default_value = "box")]
    pub coeff: Coeff,
    #[arg(long, value_enum, default_value = "interval")]
    pub bounds: Bounds,
}

#[derive(Subcommand)]
enum Command {
    /// Per-neuron pre-activation bounds and stability.
    Bounds {
        network: PathBuf,
        /// Restrict the domain to an instance's ball.
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "interval")]
        bounds: Bounds,
    },
    /// Certify or refute robustness; prints one JSON report per instance.
    Verify {
        network: PathBuf,
        #[arg(required = true)]
        instances: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "bigm")]
        formulation: Formulation,
        #[arg(long, value_enum, default_value = "box")]
        coeff: Coeff,
        #[arg(long, value_enum, default_value = "interval")]
        bounds: Bounds,
        /// Seconds.
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long)]
        node_limit: Option<usize>,
        #[arg(long, env = "PWLV_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Append reports to this file as well.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write the verification model as MPS or LP.
    Emit {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "mps")]
        format: Format,
        /// `seeded`, or `enumerate<=N` to add every family member (at most N
        /// per neuron).
        #[arg(long, default_value = "seeded")]
        cuts: String,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Exact optimum by activation-pattern enumeration.
    Oracle { network: PathBuf, instance: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Bounds {
            network,
            instance,
            bounds,
        } => commands::bounds(&network, instance.as_deref(), bounds),
        Command::Verify {
            network,
            instances,
            formulation,
            coeff,
            bounds,
            time_limit,
            node_limit,
            seed,
            jobs,
            report,
        } => commands::verify(commands::VerifyArgs {
            network,
            instances,
            formulation,
            coeff,
            bounds,
            time_limit,
            node_limit,
            seed,
            jobs,
            report,
        }),
        Command::Emit {
            model,
            format,
            cuts,
            output,
        } => commands::emit(&model, format, &cuts, output.as_deref()),
        Command::Oracle { network, instance } => commands::oracle(&network, &instance),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

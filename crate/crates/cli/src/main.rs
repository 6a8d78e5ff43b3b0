//! Experiment driver for the torsion-driven curvature-flow laboratory.
//!
//! Exit codes: 0 success, 1 configuration/solver error, 3 a flow run that
//! finished without reaching its residual tolerance.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "torlab",
    about = "Torsion solvers, dual torsional measures, variational audits and normalized curvature flows for convex bodies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's out_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed recorded in the provenance header (overrides the config's seed).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve S_k(D^2 u) = 1 on the configured body and report rigidities.
    SolveTorsion(CommonArgs),
    /// Integrate the normalized curvature flow and export its time series.
    Flow(CommonArgs),
    /// Evaluate the dual torsional measure over a partition.
    Measure(CommonArgs),
    /// Finite-difference audits of the variational formulas.
    VariationAudit(CommonArgs),
    /// Cone-volume identity discrepancy under both sigma conventions.
    CroftonAudit(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::SolveTorsion(a) => ("solve-torsion", a),
        Command::Flow(a) => ("flow", a),
        Command::Measure(a) => ("measure", a),
        Command::VariationAudit(a) => ("variation-audit", a),
        Command::CroftonAudit(a) => ("crofton-audit", a),
    };
    match commands::run_command(name, &args.config, args.out.clone(), args.seed) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

//! `aof-lab`: experiments on how feature age affects forecasting loss.

mod commands;
mod config;
mod output;
mod sources;

use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use commands::{
    AgeCurveArgs, BetaArgs, Command, CrossLossArgs, DecomposeArgs, EpsilonArgs, GenArgs,
    OrderCheckArgs, SimulateAoiArgs,
};
use config::{ConfigFile, GlobalArgs};
use output::Output;

#[derive(Parser, Debug)]
#[command(name = "aof-lab", version, about)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate a process model and optionally sample a trajectory.
    Gen(GenArgs),
    /// Minimum training loss over a grid of age vectors.
    AgeCurve(AgeCurveArgs),
    /// Split the loss at one age vector into its two monotone parts.
    Decompose(DecomposeArgs),
    /// Epsilon-Markov coefficient, or its sweep along a Markov mixture.
    Epsilon(EpsilonArgs),
    /// Chi-squared distance between test and training window laws.
    Beta(BetaArgs),
    /// Check whether one age law is stochastically smaller than another.
    OrderCheck(OrderCheckArgs),
    /// Testing against training loss under a test-time age law.
    CrossLoss(CrossLossArgs),
    /// Age process of a delivery trace.
    SimulateAoi(SimulateAoiArgs),
}

fn execute<C: Command + serde::de::DeserializeOwned>(
    file: &ConfigFile,
    global: &GlobalArgs,
    flags: &C,
) -> Result<()> {
    let g = file.globals(global)?;
    let mut params: C = file.command(C::NAME, flags)?;
    params.fill_defaults();
    let effective = json!({ "command": C::NAME, "global": g, "params": params });
    let mut out = Output::new(&g.out, effective)?;
    params.run(&g, &mut out)?;
    for p in out.written() {
        println!("{}", p.display());
    }
    Ok(())
}

fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("AOF_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("AOF_LAB_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    let file = ConfigFile::load(cli.global.config.as_deref())?;
    let g = &cli.global;
    match &cli.command {
        Cmd::Gen(a) => execute(&file, g, a),
        Cmd::AgeCurve(a) => execute(&file, g, a),
        Cmd::Decompose(a) => execute(&file, g, a),
        Cmd::Epsilon(a) => execute(&file, g, a),
        Cmd::Beta(a) => execute(&file, g, a),
        Cmd::OrderCheck(a) => execute(&file, g, a),
        Cmd::CrossLoss(a) => execute(&file, g, a),
        Cmd::SimulateAoi(a) => execute(&file, g, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

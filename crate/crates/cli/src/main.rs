//! `polar-reading`: polar coding experiments for quantum reading.
//!
//! Each run writes its files under the configured output directory and
//! prints one JSON status object on stdout. Exit codes: 0 on success, 1 when
//! a requested check fails, 2 on invalid input or a runtime error.

mod commands;
mod config;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "polar-reading", version, about = "Polar coding for quantum reading")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the rows of G_N for N = 2^n.
    Transform {
        #[arg(long)]
        n: u32,
    },
    /// Rates and reliabilities of all synthesized channels.
    Polarize(RunArgs),
    /// Select the information set.
    Construct(RunArgs),
    /// Monte Carlo block error of the successive-cancellation decoder.
    Simulate(RunArgs),
    /// Optimize the probe state over the Bloch ball.
    ProbeOpt(RunArgs),
    /// Check the rate and reliability inequalities on random instances.
    Verify(RunArgs),
}

#[derive(Args, Clone, Debug, Default)]
pub struct RunArgs {
    /// JSON experiment configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Level n (block length 2^n).
    #[arg(long)]
    pub n: Option<u32>,
    /// Cell prior P(X = 0).
    #[arg(long)]
    pub prior: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn init_threads() {
    if let Some(k) = std::env::var("POLAR_READING_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&k| k > 0)
    {
        // fails only if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
}

fn failure(command: &str, message: String) -> ExitCode {
    println!("{}", json!({ "status": "error", "command": command, "message": message }));
    ExitCode::from(2)
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Transform { n } => {
            return match commands::transform(*n) {
                Ok(rows) => {
                    for r in rows {
                        println!("{r}");
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => failure("transform", format!("{e:#}")),
            };
        }
        Command::Polarize(a) => ("polarize", a),
        Command::Construct(a) => ("construct", a),
        Command::Simulate(a) => ("simulate", a),
        Command::ProbeOpt(a) => ("probe-opt", a),
        Command::Verify(a) => ("verify", a),
    };
    let cfg = match ExperimentConfig::load(args.config.as_deref()).and_then(|mut c| {
        c.apply(args);
        c.validate()?;
        Ok(c)
    }) {
        Ok(c) => c,
        Err(e) => return failure(name, format!("{e:#}")),
    };
    let run = match &cli.command {
        Command::Polarize(_) => commands::polarize(&cfg),
        Command::Construct(_) => commands::construct(&cfg),
        Command::Simulate(_) => commands::simulate(&cfg),
        Command::ProbeOpt(_) => commands::probe_opt(&cfg),
        Command::Verify(_) => commands::verify(&cfg),
        Command::Transform { .. } => unreachable!("handled above"),
    };
    match run {
        Ok(out) => {
            let outputs: Vec<String> = out.outputs.iter().map(|p| p.display().to_string()).collect();
            let status = if out.passed { "ok" } else { "failed" };
            println!("{}", json!({ "status": status, "command": name, "outputs": outputs }));
            if out.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => failure(name, format!("{e:#}")),
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use carbon_faas::baselines::PolicyKind;
use carbon_faas::harness::{parse_config, run_experiment, Overrides};

#[derive(Parser)]
#[command(name = "carbon-faas", version, about = "Carbon- and SLO-aware FaaS cluster simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a day-long experiment under one policy.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_policy)]
        policy: Option<PolicyKind>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long)]
        intensity: Option<f64>,
        #[arg(long)]
        laxity: Option<f64>,
        #[arg(long)]
        cstr: Option<f64>,
        #[arg(long)]
        nodes: Option<usize>,
    },
}

fn parse_policy(s: &str) -> Result<PolicyKind, String> {
    s.parse().map_err(|e: carbon_faas::baselines::BaselineError| e.to_string())
}

fn run(cli: Cli) -> Result<()> {
    let Command::Run {
        config,
        policy,
        seed,
        out,
        summary,
        intensity,
        laxity,
        cstr,
        nodes,
    } = cli.command;
    let mut cfg = parse_config(&config).with_context(|| format!("loading {}", config.display()))?;
    cfg.apply(&Overrides {
        policy,
        seed,
        intensity,
        laxity,
        cstr,
        nodes,
        metrics: out,
        summary,
    });
    let report = run_experiment(&cfg)?;
    let s = &report.summary;
    eprintln!(
        "{} seed {}: {} epochs, carbon {:.1} g, cost {:.4}, SLO {:.4}, load {:.4}",
        s.policy, s.seed, s.epochs, s.ca_cum_g, s.co_total, s.sl_ave, s.lo_mean
    );
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

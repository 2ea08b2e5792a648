use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mixknap::fpa::{good_edge_check, PolicyTree};
use mixknap::harness::{baseline_lines, read_auction_csv, run_experiment, ExperimentConfig, OUTPUT_DIR_ENV};
use mixknap::{semi_infinite_gap_demo, Error};

#[derive(Parser)]
#[command(name = "mixknap", version, about = "Primal-dual online learning with knapsack constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of an experiment and write traces and reports.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` and the environment variable.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Print the LP baselines of an experiment's instance.
    Baselines { config: PathBuf },
    /// Duality gap of the semi-infinite example at a grid step.
    Gapdemo {
        #[arg(long)]
        step: f64,
    },
    /// Replay an auction stream and check the good-edge property.
    Goodedge { trace: PathBuf },
}

enum Failure {
    Error(Error),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn output_dir(cfg: &ExperimentConfig, flag: Option<PathBuf>) -> PathBuf {
    let base = flag
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| cfg.output_dir.clone());
    base.join(&cfg.name)
}

fn print_lines(lines: &[(String, String)]) {
    for (k, v) in lines {
        println!("{k} = {v}");
    }
}

fn goodedge(path: &Path) -> Result<(), Failure> {
    let stream = read_auction_csv(path)?;
    let tree = PolicyTree::build(&stream.tree)?;
    let report = good_edge_check(&tree, &stream.rounds)?;
    let over: Vec<_> = report.regret_violations().collect();
    println!("rounds = {}", report.rounds);
    println!("checks = {}", report.checks);
    println!("violations = {}", report.violations.len());
    println!("min_margin = {}", report.min_margin);
    println!("node_regret_violations = {}", over.len());
    if let Some(worst) = report
        .node_regrets
        .iter()
        .max_by(|a, b| (a.regret / a.bound).total_cmp(&(b.regret / b.bound)))
    {
        println!(
            "worst_node = {} (level {}, regret {}, bound {})",
            worst.node, worst.level, worst.regret, worst.bound
        );
    }
    if !report.violations.is_empty() || !over.is_empty() {
        return Err(Failure::Check("good-edge or per-node regret check failed".into()));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { config, output_dir: flag } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let dir = output_dir(&cfg, flag);
            let outcome = run_experiment(&cfg, &dir)?;
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Baselines { config } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            print_lines(&baseline_lines(&cfg)?);
        }
        Command::Gapdemo { step } => {
            let r = semi_infinite_gap_demo(step)?;
            println!("primal = {}", r.primal);
            println!("dual = {}", r.dual);
            println!("gap = {}", r.gap);
        }
        Command::Goodedge { trace } => goodedge(&trace)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("mixknap: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Error(e)) => {
            eprintln!("mixknap: {e}");
            ExitCode::from(match e {
                Error::Config { .. } => 2,
                Error::Capacity { .. } => 3,
                _ => 1,
            })
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use riskplan::risk_q::sample_bound;
use riskplan::sim::{
    episode_info, load_config, monte_carlo, run_episode, summarize, write_batch, write_episode, Scenario, SimError,
};

const EXIT_SAFETY: u8 = 3;

#[derive(Parser)]
#[command(name = "riskplan", version, about = "Risk-averse highway planning with feasibility monitoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the first window of a scenario and print the Q-table statistics and plan.
    Plan {
        config: PathBuf,
        /// Seed for sampling; defaults to the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one closed-loop episode and write trace.csv, events.csv, summary.json and the Q-tables.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run seeded episodes for each entropic parameter and write summary.json.
    Montecarlo {
        config: PathBuf,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        /// Comma-separated entropic parameters, e.g. `0,0.2`.
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the number of samples that bounds the violation probability.
    Bound {
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        nq: u64,
    },
}

fn scenario(path: &Path, seed: Option<u64>) -> Result<Scenario, SimError> {
    let mut cfg = load_config(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Scenario::new(cfg)
}

fn plan(config: &Path, seed: Option<u64>) -> Result<u8, SimError> {
    let sc = scenario(config, seed)?;
    let (epoch, plan) = sc.first_plan(sc.cfg.seed)?;
    let q = plan.qtable.to_qtable()?;
    let values = q.values();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    println!(
        "window: {}x{} cells from road column {}, {} risky cells",
        sc.grid.rows(),
        sc.grid.cols(),
        epoch.origin_col,
        epoch.risk.layers.first().map_or(0, |l| l.len())
    );
    println!(
        "samples: {} ({} pairs topped up), sweeps: {}, residual: {:e}, max violation: {:e}",
        plan.samples, plan.topped_up, plan.iterations, plan.residual, plan.max_violation
    );
    println!("Q: min {min:.6}, mean {mean:.6}, max {max:.6} over {} entries", values.len());
    println!("plan:");
    for (cell, t) in &plan.waypoints {
        println!("  t={t:.3} row={} col={}", cell.row, cell.col);
    }
    Ok(0)
}

fn simulate(config: &Path, seed: Option<u64>, out: &Path) -> Result<u8, SimError> {
    let sc = scenario(config, seed)?;
    let ep = run_episode(&sc, sc.cfg.seed)?;
    let summary = summarize(ep.alpha, std::slice::from_ref(&ep));
    let info = episode_info(&ep);
    write_episode(out, &ep.trace, &ep.events, &ep.plans, &summary, &info)?;
    println!(
        "{} steps, {} plans, {} re-plans, wrote {}",
        info.steps,
        info.plans,
        info.replans,
        out.display()
    );
    match &info.violation {
        Some(v) => {
            eprintln!("safety violation: {v}");
            Ok(EXIT_SAFETY)
        }
        None => Ok(0),
    }
}

fn montecarlo(config: &Path, runs: usize, alphas: &[f64], out: &Path) -> Result<u8, SimError> {
    let cfg = load_config(config)?;
    let results = monte_carlo(&cfg, runs, alphas)?;
    let batches: Vec<_> = results
        .iter()
        .map(|(s, eps)| (s.clone(), eps.iter().map(episode_info).collect::<Vec<_>>()))
        .collect();
    write_batch(out, &batches)?;
    let mut violations = 0;
    for (s, _) in &batches {
        println!(
            "alpha {}: {} runs, {} collisions, {} re-plans, aggregate Y variance {:.6e}",
            s.alpha, s.runs, s.collision_count, s.replan_count, s.aggregate_y_variance
        );
        violations += s.safety_violations;
    }
    Ok(if violations > 0 { EXIT_SAFETY } else { 0 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Plan { config, seed } => plan(config, *seed),
        Command::Simulate { config, seed, out } => simulate(config, *seed, out),
        Command::Montecarlo {
            config,
            runs,
            alphas,
            out,
        } => montecarlo(config, *runs, alphas, out),
        Command::Bound { epsilon, beta, nq } => match sample_bound(*epsilon, *beta, *nq) {
            Ok(n) => {
                println!("{n}");
                Ok(0)
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

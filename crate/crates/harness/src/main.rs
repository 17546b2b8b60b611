use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use bbm_harness::criteria;
use bbm_harness::{emit_report, load_config, run_scenario, Stages};

#[derive(Parser)]
#[command(name = "bbm-harness", version, about = "Branching Brownian motion with singular branching rates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Principal eigenvalue, speed and rate function only.
    Spectral(RunArgs),
    /// Spectral data and the particle simulation.
    Simulate(RunArgs),
    /// Spectral data and Feynman–Kac values.
    Fk(RunArgs),
    /// Spectral data and the FKPP front.
    Pde(RunArgs),
    /// Every stage the configuration asks for.
    Report(RunArgs),
    /// Runs the acceptance criteria and prints one line each.
    Selftest {
        /// Comma-separated criterion numbers; all when absent.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    /// Output directory; overrides `out` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the report as JSON instead of one line per check.
    #[arg(long)]
    json: bool,
}

fn run(args: RunArgs, stages: Stages) -> Result<bool> {
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.sim.seed = seed;
    }
    if let Some(n) = args.replicas {
        anyhow::ensure!(n > 0, "--replicas must be positive");
        cfg.sim.replicas = n;
    }
    let out = args.out.or_else(|| cfg.out.clone());
    let outcome = run_scenario(&cfg, stages)?;
    let report = &outcome.report;
    if args.json {
        println!("{}", report.to_json());
    } else {
        let sp = &report.lambda;
        println!("{} d={} λ={:.6} ({}) speed={:.6}", report.scenario, report.dimension, sp.lambda, sp.selected, sp.speed);
        if let Some(sim) = &report.sim {
            println!("{} replicas, {} capped, {} discarded by the burn-in rule", sim.replicas, sim.capped, sim.discarded);
        }
        for c in &report.criteria {
            println!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.summary());
        }
    }
    if let Some(dir) = out {
        let ens = outcome.ensemble.as_ref().map(|e| (e, cfg.directions.len(), cfg.deltas.len()));
        for path in emit_report(report, ens, &dir)? {
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(report.pass())
}

fn selftest(only: &[u8]) -> bool {
    let mut ok = true;
    for c in criteria::all().iter().filter(|c| only.is_empty() || only.contains(&c.id)) {
        let outcome = criteria::evaluate(c);
        println!("{}", outcome.line());
        ok &= outcome.pass();
    }
    ok
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Spectral(a) => run(a, Stages::SPECTRAL),
        Command::Simulate(a) => run(a, Stages { sim: true, fk: false, pde: false }),
        Command::Fk(a) => run(a, Stages { sim: false, fk: true, pde: false }),
        Command::Pde(a) => run(a, Stages { sim: false, fk: false, pde: true }),
        Command::Report(a) => run(a, Stages::ALL),
        Command::Selftest { only } => Ok(selftest(&only)),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bidtrack::mckp::{brute_force, solve_dp};
use bidtrack::sim::{run_campaign, write_outputs, AuctionScenario, Scenario};
use bidtrack::MckpInstance;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "bidtrack",
    version,
    about = "Auction-based bit allocation for target tracking"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo campaign and write CSV results
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Network lifetime for several residual-energy exponents
    Lifetime {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated exponents, e.g. 0,3,15
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<f64>,
        /// Dead fraction that ends the lifetime; defaults to the config value
        #[arg(long)]
        alpha: Option<f64>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Allocate and price a single auction round
    Auction {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Solve a multiple-choice knapsack instance
    Mckp {
        #[arg(long)]
        instance: PathBuf,
        /// Also run exhaustive enumeration and report whether it agrees
        #[arg(long)]
        check: bool,
    },
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    particles: Option<usize>,
}

impl Overrides {
    fn apply(&self, sc: &mut Scenario) {
        if let Some(s) = self.seed {
            sc.seed = s;
        }
        if let Some(t) = self.trials {
            sc.trials = t;
        }
        if let Some(p) = self.particles {
            sc.particles = p;
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_scenario(path: &Path, overrides: &Overrides) -> Result<Scenario> {
    let mut sc: Scenario =
        serde_json::from_str(&read(path)?).with_context(|| format!("invalid config {}", path.display()))?;
    overrides.apply(&mut sc);
    sc.validate()
        .with_context(|| format!("invalid config {}", path.display()))?;
    Ok(sc)
}

fn print_json(value: serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(&value)?;
    match writeln!(io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn simulate(config: &Path, out: &Path, overrides: &Overrides) -> Result<()> {
    let sc = load_scenario(config, overrides)?;
    let result = run_campaign(&sc)?;
    write_outputs(&result, out)?;
    let steps = sc.steps;
    print_json(json!({
        "trials": sc.trials,
        "steps": steps,
        "mean_mse": result.mean_mse(1, steps),
        "final_mse": result.aggregate.last().map(|a| a.mse),
        "lifetime": result.lifetime(sc.alpha),
        "out": out,
    }))
}

fn lifetime(config: &Path, ks: &[f64], alpha: Option<f64>, overrides: &Overrides) -> Result<()> {
    let mut sc = load_scenario(config, overrides)?;
    if let Some(a) = alpha {
        sc.alpha = a;
    }
    let mut rows = Vec::new();
    for &k in ks {
        let run = Scenario {
            energy_exponent: k,
            ..sc.clone()
        };
        run.validate().context("invalid --k or --alpha")?;
        let result = run_campaign(&run)?;
        rows.push(json!({
            "k": k,
            "lifetime": result.lifetime(run.alpha),
            "dead_fraction": result.aggregate.iter().map(|a| a.dead_fraction).collect::<Vec<_>>(),
            "mean_mse": result.mean_mse(1, run.steps),
        }));
    }
    print_json(json!({ "alpha": sc.alpha, "steps": sc.steps, "results": rows }))
}

fn auction(path: &Path) -> Result<()> {
    let sc: AuctionScenario =
        serde_json::from_str(&read(path)?).with_context(|| format!("invalid scenario {}", path.display()))?;
    print_json(serde_json::to_value(sc.run()?)?)
}

fn mckp(path: &Path, check: bool) -> Result<()> {
    let inst: MckpInstance =
        serde_json::from_str(&read(path)?).with_context(|| format!("invalid instance {}", path.display()))?;
    inst.validate()?;
    let sol = solve_dp(&inst)?;
    if check {
        let oracle = brute_force(&inst)?;
        if oracle != sol {
            bail!("dynamic program {sol:?} disagrees with enumeration {oracle:?}");
        }
    }
    print_json(serde_json::to_value(sol)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate { config, out, overrides } => simulate(config, out, overrides),
        Command::Lifetime {
            config,
            k,
            alpha,
            overrides,
        } => lifetime(config, k, *alpha, overrides),
        Command::Auction { scenario } => auction(scenario),
        Command::Mckp { instance, check } => mckp(instance, *check),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand as ClapSubcommand};
use nlkg_core::scenario::{parse_override, parse_scenario_with, run, Subcommand};

#[derive(Parser)]
#[command(name = "nlkg", version, about = "Small-solution dynamics of 1D nonlinear Klein-Gordon equations with a trapping potential")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(ClapSubcommand)]
enum Command {
    /// Discrete spectrum of the linearized operator
    Spectrum(Common),
    /// Resonance tables of the discrete frequencies
    Indices(Common),
    /// Darboux chain and the repulsiveness check
    Darboux(Common),
    /// Refined profile and Fermi Golden Rule coefficients
    Profile(Common),
    /// Trajectory with per-sample diagnostics
    Simulate(Common),
    /// Acceptance suite on the scenario
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; each subcommand writes into its own subdirectory
    #[arg(long)]
    out: PathBuf,
    /// Seed for the random parts of the initial data
    #[arg(long)]
    seed: Option<u64>,
    /// Dotted KEY=VALUE override, repeatable
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn execute(sub: Subcommand, args: &Common) -> anyhow::Result<i32> {
    let text = std::fs::read_to_string(&args.scenario).with_context(|| format!("reading {}", args.scenario.display()))?;
    let mut overrides = args.overrides.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>, _>>()?;
    if let Some(seed) = args.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    let scenario = parse_scenario_with(&text, &overrides).with_context(|| format!("in {}", args.scenario.display()))?;
    let outcome = run(sub, &scenario, &args.out)?;
    for line in &outcome.lines {
        println!("{line}");
    }
    for w in &outcome.manifest.run.warnings {
        eprintln!("warning: {w}");
    }
    let a = &outcome.manifest.assumptions;
    println!("assumptions: generic {:?}, fgr {:?}, repulsive {:?}", a.generic, a.fgr, a.repulsive);
    println!("manifest: {}", outcome.dir.join("manifest.toml").display());
    Ok(outcome.status)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (sub, args) = match &cli.command {
        Command::Spectrum(a) => (Subcommand::Spectrum, a),
        Command::Indices(a) => (Subcommand::Indices, a),
        Command::Darboux(a) => (Subcommand::Darboux, a),
        Command::Profile(a) => (Subcommand::Profile, a),
        Command::Simulate(a) => (Subcommand::Simulate, a),
        Command::Verify(a) => (Subcommand::Verify, a),
    };
    match execute(sub, args) {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            let assumption = e.downcast_ref::<nlkg_core::Error>().is_some_and(|e| matches!(e, nlkg_core::Error::Assumption(_)));
            ExitCode::from(if assumption { 2 } else { 1 })
        }
    }
}

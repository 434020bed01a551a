use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cqepi::config::{bundled, list_scenarios, ScenarioConfig};
use cqepi::runner::{run_sweep, run_verify, RunReport, SweepQuantity};
use cqepi::Result;

/// Check conditioned entropy power and Stam inequalities on discretized scenarios.
#[derive(Parser)]
#[command(name = "cqepi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the point count of both grid axes.
    #[arg(long, global = true)]
    grid_points: Option<usize>,
    /// Override the entropy tolerance, in nats.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the report or table here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run the states of a scenario concurrently.
    #[arg(long, global = true)]
    parallel: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run every check listed in a scenario file.
    Verify { config: PathBuf },
    /// Tabulate a quantity along the heat flow as CSV.
    Sweep {
        config: PathBuf,
        /// entropy_flow, fisher_flow or phi.
        #[arg(long)]
        quantity: SweepQuantity,
        /// Comma-separated times.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        t: Vec<f64>,
    },
    /// Run a bundled scenario by name.
    Demo { name: String },
    /// List the bundled scenarios.
    List,
}

impl Cli {
    fn apply(&self, mut cfg: ScenarioConfig) -> Result<ScenarioConfig> {
        if let Some(points) = self.grid_points {
            cfg = cfg.with_grid_points(points)?;
        }
        if let Some(tol) = self.tolerance {
            cfg.tolerances.entropy = tol;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => std::fs::write(path, text)?,
            None => print!("{text}"),
        }
        Ok(())
    }
}

fn summary_line(report: &RunReport) -> String {
    let s = &report.summary;
    format!(
        "{}: {} pass, {} inconclusive, {} fail, {} errors in {:.1}s",
        report.scenario.name, s.pass, s.inconclusive, s.fail, s.errors, report.wall_clock_seconds
    )
}

fn verify(cli: &Cli, cfg: ScenarioConfig) -> Result<u8> {
    let cfg = cli.apply(cfg)?;
    let report = run_verify(&cfg, cli.parallel)?;
    cli.emit(&format!("{}\n", report.to_json()))?;
    eprintln!("{}", summary_line(&report));
    for st in &report.states {
        for r in st.checks.iter().filter(|r| r.verdict != cqepi::inequality::Verdict::Pass) {
            eprintln!("  {} {}: {:?} (deficit {:.3e})", st.id, r.name, r.verdict, r.deficit);
        }
        for e in &st.errors {
            eprintln!("  {} {}: error: {}", st.id, e.check, e.error);
        }
    }
    Ok(report.exit_code() as u8)
}

fn load(path: &Path) -> Result<ScenarioConfig> {
    ScenarioConfig::load(path)
}

fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Verify { config } => verify(cli, load(config)?),
        Command::Demo { name } => verify(cli, bundled(name)?),
        Command::Sweep { config, quantity, t } => {
            let cfg = cli.apply(load(config)?)?;
            let table = run_sweep(&cfg, *quantity, t)?;
            cli.emit(&table.to_csv())?;
            Ok(0)
        }
        Command::List => {
            let width = list_scenarios().iter().map(|b| b.name.len()).max().unwrap_or(0);
            let text: String = list_scenarios()
                .iter()
                .map(|b| format!("{:width$}  {}\n", b.name, b.summary))
                .collect();
            cli.emit(&text)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

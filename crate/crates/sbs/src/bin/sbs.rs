//! Batch CLI: validate scenario files, sweep the bound chain over time
//! grids, run discrimination reports, and expose the brute-force oracles.
//!
//! Exit codes: 0 success, 1 validation or I/O failure, 2 numerical
//! invariant violation (a measured distance exceeded its bound by more
//! than the tolerance).

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sbs::error::SbsError;
use sbs::oracles;
use sbs::scenario::{EnsembleSpec, Scenario};
use sbs::sweep::{fmt_float, run_discrimination, run_sweep, SweepOptions};

#[derive(Parser)]
#[command(name = "sbs", version, about = "Spectrum broadcast structure toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct CommonOpts {
    /// Cap on assembled (full product space) dimensions.
    #[arg(long, global = true, default_value_t = sbs::DEFAULT_DIM_CAP)]
    cap: usize,
    /// Slack tolerance for the bound-chain inequalities.
    #[arg(
        long,
        global = true,
        default_value_t = 1e-8,
        allow_negative_numbers = true
    )]
    tol: f64,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override the scenario seed for randomized presets.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a scenario file, printing model warnings.
    Validate { scenario: PathBuf },
    /// Sweep the bound chain over the scenario's time grid.
    Sweep {
        scenario: PathBuf,
        /// Output directory for the CSV and JSON summary.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Discrimination-bound report for an ensemble file.
    Discriminate {
        ensemble: PathBuf,
        /// Output directory for the JSON report.
        #[arg(short, long)]
        output: PathBuf,
        /// Polar resolution of the qubit grid oracle.
        #[arg(long, default_value_t = oracles::DEFAULT_GRID_RESOLUTION)]
        resolution: usize,
    },
    /// Brute-force references.
    Oracle {
        #[command(subcommand)]
        command: OracleCommand,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Exhaustive rank-one PVM search for two qubit states.
    GridSearch {
        ensemble: PathBuf,
        #[arg(long, default_value_t = oracles::DEFAULT_GRID_RESOLUTION)]
        resolution: usize,
    },
    /// Full product-space evolution, traced to system plus observed
    /// environments; prints the state as JSON.
    Evolve {
        scenario: PathBuf,
        /// Evolution time.
        #[arg(long)]
        time: f64,
        /// Write the JSON state here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn options(common: &CommonOpts, resolution: Option<usize>) -> SweepOptions {
    let defaults = SweepOptions::default();
    SweepOptions {
        cap: common.cap,
        tol: common.tol,
        threads: common.threads,
        seed: common.seed,
        grid_resolution: resolution.unwrap_or(defaults.grid_resolution),
    }
}

fn run(cli: Cli) -> Result<ExitCode, SbsError> {
    match cli.command {
        Command::Validate { scenario } => {
            let scenario = Scenario::from_json(&fs::read_to_string(&scenario)?)?;
            let model = scenario.build_model(cli.common.seed)?;
            scenario.strategy()?;
            let points = scenario.time_points()?;
            println!(
                "ok: scenario {:?} ({} branches, {} environments, {} observed, {} time points)",
                scenario.name,
                model.system_dim(),
                model.n_envs(),
                model.observed(),
                points.len()
            );
            for warning in model.warnings() {
                println!("warning: {warning}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { scenario, output } => {
            let scenario = Scenario::from_json(&fs::read_to_string(&scenario)?)?;
            let outcome = run_sweep(&scenario, &output, &options(&cli.common, None))?;
            if let Some(path) = &outcome.csv_path {
                println!("wrote {}", path.display());
            }
            if let Some(path) = &outcome.summary_path {
                println!("wrote {}", path.display());
            }
            println!(
                "{} of {} points computed; max slack {}",
                outcome.summary.points_computed,
                outcome.summary.points_requested,
                outcome
                    .summary
                    .max_violation_slack
                    .map(fmt_float)
                    .unwrap_or_else(|| "n/a".into())
            );
            if outcome.violation {
                eprintln!("error: bound chain violated beyond tolerance");
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Discriminate {
            ensemble,
            output,
            resolution,
        } => {
            let spec = EnsembleSpec::from_json(&fs::read_to_string(&ensemble)?)?;
            let (path, report) =
                run_discrimination(&spec, &output, &options(&cli.common, Some(resolution)))?;
            println!("wrote {}", path.display());
            println!(
                "lower {} / achieved {} / upper {}",
                fmt_float(report.montanaro_lower),
                fmt_float(report.achieved_gram_pvm),
                fmt_float(report.knill_barnum_upper)
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { command } => match command {
            OracleCommand::GridSearch {
                ensemble,
                resolution,
            } => {
                let spec = EnsembleSpec::from_json(&fs::read_to_string(&ensemble)?)?;
                let result = oracles::qubit_pvm_grid_search(&spec.to_ensemble()?, resolution)?;
                println!(
                    "minimum {} at (theta, phi) = ({}, {}); resolution {}, grid slack {}",
                    fmt_float(result.value),
                    fmt_float(result.argmin[0]),
                    fmt_float(result.argmin[1]),
                    result.resolution,
                    fmt_float(result.grid_slack)
                );
                Ok(ExitCode::SUCCESS)
            }
            OracleCommand::Evolve {
                scenario,
                time,
                output,
            } => {
                let scenario = Scenario::from_json(&fs::read_to_string(&scenario)?)?;
                let model = scenario.build_model(cli.common.seed)?;
                let state = oracles::full_evolution_oracle(&model, time, cli.common.cap)?;
                let n = state.dim();
                let rows: Vec<Vec<[f64; 2]>> = (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|j| {
                                let z = state.matrix()[(i, j)];
                                [z.re, z.im]
                            })
                            .collect()
                    })
                    .collect();
                let value = serde_json::json!({
                    "scenario": scenario.name,
                    "t": time,
                    "dim": n,
                    "rows": rows,
                });
                let text = serde_json::to_string_pretty(&value)?;
                match output {
                    Some(path) => fs::write(path, text + "\n")?,
                    None => println!("{text}"),
                }
                Ok(ExitCode::SUCCESS)
            }
        },
    }
}

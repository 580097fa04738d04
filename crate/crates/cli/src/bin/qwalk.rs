use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qwalk_cli::config::ScenarioConfig;
use qwalk_cli::report::VerificationReport;
use qwalk_cli::{checks, output_root, scenario, CliError};

/// Numerical laboratory for Szegedy-type quantum walks on the half line.
#[derive(Parser)]
#[command(name = "qwalk", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the recurrence of the configured walk.
    Classify { config: PathBuf },
    /// Eigensolve, lift, and export spectral summaries.
    Spectrum { config: PathBuf },
    /// Run the time-averaged measures and the scenario's named checks.
    Measure { config: PathBuf },
    /// Direct-vs-spectral convergence over the (n, t) grid.
    Sweep { config: PathBuf },
    /// Run the acceptance criteria.
    Verify {
        /// Restrict to one module's criteria.
        #[arg(long)]
        filter: Option<String>,
        /// List check names without running anything.
        #[arg(long)]
        list: bool,
    },
}

fn load(path: &Path) -> Result<ScenarioConfig, CliError> {
    ScenarioConfig::load(path)
}

fn run() -> Result<bool, CliError> {
    let cli = Cli::parse();
    let root = output_root();
    match cli.command {
        Command::Classify { config } => {
            let config = load(&config)?;
            print!("{}", scenario::classify_scenario(&config)?);
            Ok(true)
        }
        Command::Spectrum { config } => {
            let config = load(&config)?;
            let outcome = scenario::run_spectrum_scenario(&config, &root)?;
            for path in &outcome.artifacts {
                println!("wrote {}", path.display());
            }
            Ok(true)
        }
        Command::Measure { config } => {
            let config = load(&config)?;
            let outcome = scenario::run_measure_scenario(&config, &root)?;
            for path in &outcome.artifacts {
                println!("wrote {}", path.display());
            }
            let report = VerificationReport {
                records: outcome.records,
            };
            print!("{}", report.render_console());
            let report_path = root.join(&config.output.dir).join("report.txt");
            std::fs::write(&report_path, report.render_file())?;
            println!("wrote {}", report_path.display());
            Ok(report.all_passed())
        }
        Command::Sweep { config } => {
            let config = load(&config)?;
            let outcome = scenario::run_sweep_scenario(&config, &root)?;
            for path in &outcome.artifacts {
                println!("wrote {}", path.display());
            }
            Ok(true)
        }
        Command::Verify { filter, list } => {
            if list {
                for (name, module) in checks::criterion_catalog() {
                    println!("{name:<32} [{module}]");
                }
                return Ok(true);
            }
            let verify_root = root.join("verify");
            let report = checks::verify_all(filter.as_deref(), &verify_root)?;
            print!("{}", report.render_console());
            println!("report at {}", verify_root.join("report.txt").display());
            if !report.all_passed() {
                eprintln!("failing checks:");
                for r in report.failing() {
                    eprintln!("  {}", r.name);
                }
            }
            Ok(report.all_passed())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

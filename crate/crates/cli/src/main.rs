use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use clap::{Parser, Subcommand};

use toric_seaqt::checks::{self, Fault, Status};
use toric_seaqt::config::ScenarioConfig;
use toric_seaqt::runner::worker_count;
use toric_seaqt::scenario::{gibbs_curve_command, run_command, RunOptions};

#[derive(Parser)]
#[command(name = "toric-seaqt", version, about = "Steepest-entropy-ascent relaxation of small toric codes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (p_x, isolated/reservoir) trajectory of a configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; `TORIC_SEAQT_THREADS` caps this value.
        #[arg(long)]
        threads: Option<usize>,
        /// Perturbation seed (overrides `perturbation.seed`).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the reduced-scale validation suite; exits non-zero on any failure.
    Validate {
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, hide = true)]
        inject_fault: Option<Fault>,
    },
    /// Write the canonical (β, energy, entropy) curve of a configuration's lattice.
    GibbsCurve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, out, threads, seed } => {
            let config = ScenarioConfig::load(&config)?;
            let summary = run_command(&config, &RunOptions { out_dir: out, threads, seed })?;
            for file in &summary.files {
                println!("wrote {}", file.display());
            }
            println!("wrote {}", summary.manifest.display());
            if !summary.all_checks_passed {
                eprintln!("warning: some trajectories exceeded the per-step tolerances; see the manifest");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { threads, inject_fault } => {
            let start = Instant::now();
            let outcomes = checks::validate(worker_count(threads), inject_fault, |msg| eprintln!("{msg}"))?;
            let mut failed = 0;
            for outcome in &outcomes {
                println!("{}", outcome.line());
                if outcome.status == Status::Fail {
                    failed += 1;
                }
            }
            println!(
                "{} of {} criteria passed in {:.1} s",
                outcomes.len() - failed,
                outcomes.len(),
                start.elapsed().as_secs_f64()
            );
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::GibbsCurve { config, out } => {
            let config = ScenarioConfig::load(&config)?;
            let path = gibbs_curve_command(&config, &RunOptions { out_dir: out, ..RunOptions::default() })?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

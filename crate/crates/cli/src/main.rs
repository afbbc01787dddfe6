//! `mipdc`: spectral-power and connectivity analysis of two-class
//! motor-imagery recordings.
//!
//! Exit codes: 0 success, 1 invalid configuration or analysis contract
//! violation, 2 I/O failure.

mod config;
mod error;
mod run;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{RawConfig, Settings};
use error::Failure;
use run::Command;

#[derive(Parser)]
#[command(name = "mipdc", version, about = "Motor-imagery power and connectivity pipeline")]
struct Cli {
    /// INI configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set svm.c=256`. Repeatable.
    #[arg(long = "set", global = true, value_name = "K=V")]
    overrides: Vec<String>,
    /// Worker threads (0 uses every core).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Seed of the synthetic scenario and of the CV splits.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Write the synthetic two-class dataset and its ground truth.
    Synth,
    /// Burg PSD, r² map, feature selection and SVM accuracy.
    Power,
    /// Per-epoch MVAR and PDC, edge screening and flow maps.
    Connectivity,
    /// Both tracks; without an input signal the synthetic dataset is written first.
    All,
    /// Print the default configuration as an INI file.
    Defaults,
}

fn resolve(cli: &Cli) -> Result<(RawConfig, Settings), Failure> {
    let mut raw = RawConfig::default();
    if let Some(path) = &cli.config {
        raw.merge_file(path)?;
    }
    for o in &cli.overrides {
        raw.apply_override(o)?;
    }
    if let Some(seed) = cli.seed {
        raw.set("seed", &seed.to_string())?;
    }
    if let Some(jobs) = cli.jobs {
        raw.set("jobs", &jobs.to_string())?;
    }
    if let Some(out) = &cli.out {
        raw.set("output.dir", &out.to_string_lossy())?;
    }
    let settings = Settings::from_raw(&raw)?;
    Ok((raw, settings))
}

fn main_inner(cli: Cli) -> Result<(), Failure> {
    let command = match cli.command {
        Sub::Synth => Command::Synth,
        Sub::Power => Command::Power,
        Sub::Connectivity => Command::Connectivity,
        Sub::All => Command::All,
        Sub::Defaults => {
            print!("{}", config::default_ini());
            return Ok(());
        }
    };
    let (raw, settings) = resolve(&cli)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(settings.jobs)
        .build_global()
        .map_err(|e| Failure::contract("config", format!("cannot start worker pool: {e}")))?;
    for path in run::execute(command, &raw, &settings)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error [{}] {}", f.stage, f.message);
            ExitCode::from(f.exit_code() as u8)
        }
    }
}

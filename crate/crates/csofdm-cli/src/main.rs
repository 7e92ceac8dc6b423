//! Command-line front end: run experiment presets or spec files, list
//! presets, validate specs.
//!
//! Exit codes: 0 success, 2 config/schema error, 3 numeric failure.

use clap::{Parser, Subcommand};
use csofdm::harness::{preset, preset_names, run_sweep, ExperimentSpec};
use csofdm::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "csofdm", version, about = "Compressed-sensing OFDM channel estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a preset or a spec file.
    Run {
        /// Preset name (see `csofdm presets`).
        #[arg(long, conflicts_with = "spec")]
        preset: Option<String>,
        /// TOML or JSON experiment spec.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Override the trial count.
        #[arg(long)]
        trials: Option<usize>,
        /// Shortcut for `--trials 50`.
        #[arg(long, conflicts_with = "trials")]
        smoke: bool,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the available presets.
    Presets,
    /// Validate a spec file without running it.
    Validate {
        #[arg(long)]
        spec: PathBuf,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Schema { .. } | Error::InvalidArgument(_) => 2,
        Error::Io(_) => 1,
        _ => 3,
    }
}

fn load_spec(
    preset_name: Option<&str>,
    spec_path: Option<&PathBuf>,
) -> Result<ExperimentSpec, Error> {
    match (preset_name, spec_path) {
        (Some(name), None) => preset(name),
        (None, Some(path)) => ExperimentSpec::from_path(path),
        _ => Err(Error::InvalidArgument(
            "pass exactly one of --preset or --spec".into(),
        )),
    }
}

fn configure_workers() {
    if let Ok(value) = std::env::var("CSOFDM_WORKERS") {
        if let Ok(workers) = value.parse::<usize>() {
            if workers > 0 {
                // ignore failure: the global pool may already be running
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build_global();
            }
        }
    }
}

fn run() -> Result<(), Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Presets => {
            for name in preset_names() {
                println!("{name}");
            }
            Ok(())
        }
        Command::Validate { spec } => {
            let spec = ExperimentSpec::from_path(&spec)?;
            spec.validate()?;
            println!("ok: `{}` is a valid experiment spec", spec.name);
            Ok(())
        }
        Command::Run {
            preset,
            spec,
            trials,
            smoke,
            seed,
            out,
        } => {
            configure_workers();
            let mut experiment = load_spec(preset.as_deref(), spec.as_ref())?;
            if smoke {
                experiment.trials = 50;
            }
            if let Some(trials) = trials {
                experiment.trials = trials;
            }
            if let Some(seed) = seed {
                experiment.seed = seed;
            }
            if let Some(out) = out {
                experiment.outputs = out;
            }
            let summary = run_sweep(&experiment)?;
            for file in &summary.files {
                println!("wrote {}", file.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

//! Experiment runner for stair-circuit state preparation.
//!
//! Exit codes: 0 success, 2 argument/config error, 3 numerical abort,
//! 4 capacity guard.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stairprep::experiment::{
    cmd_batch, cmd_build_target, cmd_eval, cmd_report, cmd_train, load_config, render_json,
    ExperimentConfig,
};
use stairprep::{Error, Result};

#[derive(Parser)]
#[command(
    name = "stairprep",
    version,
    about = "Synthesize shallow stair circuits that prepare a target MPS from |0...0>",
    long_about = None
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Config-field overrides shared by `build-target` and `train`.
#[derive(Args, Clone, Default)]
struct Overrides {
    /// Override the run id from the config file.
    #[arg(long)]
    run_id: Option<String>,
    /// Override the output root directory.
    #[arg(long)]
    output_root: Option<PathBuf>,
    /// Override the training seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the final layer count.
    #[arg(long)]
    n_layers: Option<usize>,
    /// Override the per-stage epoch budget.
    #[arg(long)]
    epochs_per_stage: Option<usize>,
}

impl Overrides {
    fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(run_id) = &self.run_id {
            config.run_id = run_id.clone();
        }
        if let Some(root) = &self.output_root {
            config.output_dir = Some(root.clone());
        }
        if let Some(seed) = self.seed {
            config.train.seed = seed;
        }
        if let Some(n_layers) = self.n_layers {
            config.train.n_layers = n_layers;
        }
        if let Some(epochs) = self.epochs_per_stage {
            config.train.epochs_per_stage = epochs;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build the target state declared in a config and write it with its
    /// metadata into the run directory.
    BuildTarget {
        /// Experiment config (TOML).
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train a stair circuit against a previously built target.
    Train {
        /// Experiment config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Target MPS file; defaults to `<run dir>/target.mps.json`.
        #[arg(long)]
        target: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Evaluate a checkpoint against a target state.
    Eval {
        /// Circuit checkpoint (JSON).
        #[arg(long)]
        checkpoint: PathBuf,
        /// Target MPS file (JSON).
        #[arg(long)]
        target: PathBuf,
        /// Evolution bond cap; defaults to twice the target bond dimension.
        #[arg(long)]
        chi_evolve: Option<usize>,
        /// Also write the report JSON to this path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate all runs under a directory into plot-ready CSV tables.
    Report {
        /// Directory containing run directories.
        #[arg(long)]
        dir: PathBuf,
    },
    /// Build and train each config in sequence, continuing past failures.
    Batch {
        /// Experiment configs (TOML), run in the order given.
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
}

fn load_with_overrides(path: &PathBuf, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut config = load_config(path)?;
    overrides.apply(&mut config);
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BuildTarget { config, overrides } => {
            let config = load_with_overrides(&config, &overrides)?;
            let (path, meta) = cmd_build_target(&config)?;
            eprintln!("target written to {}", path.display());
            println!("{}", render_json(&meta)?);
            Ok(())
        }
        Command::Train {
            config,
            target,
            overrides,
        } => {
            let config = load_with_overrides(&config, &overrides)?;
            let summary = cmd_train(&config, target.as_deref())?;
            println!("{}", render_json(&summary)?);
            Ok(())
        }
        Command::Eval {
            checkpoint,
            target,
            chi_evolve,
            out,
        } => {
            let report = cmd_eval(&checkpoint, &target, chi_evolve, out.as_deref())?;
            println!("{}", render_json(&report)?);
            Ok(())
        }
        Command::Report { dir } => {
            let summary = cmd_report(&dir)?;
            println!("{}", render_json(&summary)?);
            Ok(())
        }
        Command::Batch { configs } => {
            let outcomes = cmd_batch(&configs);
            let mut first_failure: Option<i32> = None;
            for outcome in &outcomes {
                match &outcome.result {
                    Ok(summary) => eprintln!(
                        "{}: ok (final F {:.6e})",
                        outcome.config_path.display(),
                        summary.final_f
                    ),
                    Err(e) => {
                        eprintln!("{}: {e}", outcome.config_path.display());
                        first_failure.get_or_insert(e.exit_code());
                    }
                }
            }
            match first_failure {
                None => Ok(()),
                Some(3) => Err(Error::Numerical("batch had failing runs".into())),
                Some(4) => Err(Error::Capacity("batch had failing runs".into())),
                Some(_) => Err(Error::Argument("batch had failing runs".into())),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

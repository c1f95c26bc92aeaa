use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use trustal_cli::commands;
use trustal_cli::UsageError;

#[derive(Parser)]
#[command(name = "trustal", version, about = "Consistency-aware active-learning lab")]
struct Cli {
    /// Print extra progress detail.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the configured run for every seed.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output root (default: $TRUSTAL_OUT or ./runs).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dotted-key overrides, e.g. --override train.alpha=0.3
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run the cartesian product of the config's sweep axes and seeds.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Acquisition-quality metrics for one finished run directory.
    Analyze {
        #[arg(long)]
        run: PathBuf,
    },
    /// Comparison table across finished run directories.
    Compare {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Index of the baseline run among the given directories.
        #[arg(long, default_value_t = 0)]
        baseline: usize,
        /// Fraction of the baseline plateau used for rounds-to-threshold.
        #[arg(long, default_value_t = 1.0)]
        threshold: f64,
        /// Run directories (each containing run.json).
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
    /// Write a synthetic dataset as a loadable CSV file.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, overrides } => {
            commands::cmd_run(&config, out, &overrides, cli.verbose)
        }
        Command::Sweep { config, out, overrides } => {
            commands::cmd_sweep(&config, out, &overrides, cli.verbose)
        }
        Command::Analyze { run } => commands::cmd_analyze(&run),
        Command::Compare { out, baseline, threshold, dirs } => {
            commands::cmd_compare(&dirs, out, baseline, threshold)
        }
        Command::Synth { config, out, overrides } => commands::cmd_synth(&config, out, &overrides),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error:#}");
            if error.chain().any(|cause| cause.downcast_ref::<UsageError>().is_some()) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

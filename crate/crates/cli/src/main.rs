use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use funnel_cbf_cli::{cmd_compare, cmd_export, cmd_simulate, cmd_verify, Overrides};

/// Model-free safety filters from funnel control: run benchmark scenarios,
/// compare controllers, and verify the barrier-admissibility properties.
#[derive(Parser)]
#[command(name = "funnel-cbf", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonFlags {
    /// Seed for the verification samplers.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the scenario's integration grid step.
    #[arg(long)]
    step: Option<f64>,
    /// Override the scenario's horizon.
    #[arg(long)]
    horizon: Option<f64>,
    /// Write artifacts here instead of the scenario's output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Skip SVG rendering.
    #[arg(long)]
    no_plot: bool,
}

impl CommonFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            step: self.step,
            horizon: self.horizon,
            out_dir: self
                .out_dir
                .as_ref()
                .map(|p| p.to_string_lossy().into_owned()),
            no_plot: self.no_plot,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario; write trajectory CSV, metrics, and a plot.
    Simulate {
        scenario: PathBuf,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Run two scenarios sharing plant/funnel/reference and report the
    /// input-MSE reduction of the second against the first.
    Compare {
        scenario_a: PathBuf,
        scenario_b: PathBuf,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Run the structural, inclusion, witness, and containment checks.
    Verify {
        scenario: PathBuf,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Re-render the tube plot from a stored trajectory CSV.
    Export {
        scenario: PathBuf,
        /// Trajectory CSV produced by `simulate`.
        #[arg(long)]
        from: PathBuf,
        /// Output SVG path.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        flags: CommonFlags,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { scenario, flags } => cmd_simulate(scenario, &flags.overrides()),
        Command::Compare {
            scenario_a,
            scenario_b,
            flags,
        } => cmd_compare(scenario_a, scenario_b, &flags.overrides()),
        Command::Verify { scenario, flags } => cmd_verify(scenario, &flags.overrides()),
        Command::Export {
            scenario,
            from,
            out,
            flags,
        } => cmd_export(scenario, from, out, &flags.overrides()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use consensus_cli::commands::{
    cmd_simulate, cmd_sweep, cmd_synth, cmd_validate, SimulateOptions, SweepOptions,
};
use consensus_cli::{Overrides, EXIT_OK, EXIT_PARSE};
use consensus_core::model::ControlMode;

#[derive(Parser)]
#[command(name = "consensus", version, about = "Robust consensus tracking: controller synthesis and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    State,
    Output,
}

impl From<Mode> for ControlMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::State => ControlMode::State,
            Mode::Output => ControlMode::Output,
        }
    }
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        Ok(x) => Err(format!("must be positive and finite, got {x}")),
        Err(e) => Err(e.to_string()),
    }
}

fn tolerance(s: &str) -> Result<(String, f64), String> {
    let (key, value) = s.split_once('=').ok_or("expected KEY=VALUE")?;
    Ok((key.trim().to_string(), positive(value.trim())?))
}

/// Comma-separated numbers; an empty string is an empty list.
#[derive(Clone, Debug)]
struct NumberList(Vec<f64>);

fn number_list(s: &str) -> Result<NumberList, String> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
        .collect::<Result<_, _>>()
        .map(NumberList)
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Control law; defaults to the scenario's `synthesis.mode`.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Tolerance override, e.g. `--tol rank=1e-8`; repeatable.
    #[arg(long = "tol", alias = "tol-overrides", value_name = "KEY=VALUE", value_parser = tolerance)]
    tol: Vec<(String, f64)>,
}

#[derive(Args)]
struct Horizon {
    /// Simulation horizon in seconds.
    #[arg(long, value_parser = positive)]
    t_end: Option<f64>,
    /// Integration step in seconds.
    #[arg(long, value_parser = positive)]
    dt: Option<f64>,
    /// Start of the tail window for error metrics; defaults to 2/3 of the horizon.
    #[arg(long, value_parser = positive)]
    tail_start: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check every standing assumption and print an itemized report.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Synthesize the controller bank and print its certificates.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Write the bank to this file.
        #[arg(long)]
        bank: Option<PathBuf>,
    },
    /// Simulate the closed loop and report convergence metrics.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        horizon: Horizon,
        /// Load the controller bank from this file instead of synthesizing.
        #[arg(long)]
        bank: Option<PathBuf>,
        /// Comma-separated epsilon values replacing the scenario's.
        #[arg(long, allow_hyphen_values = true, value_parser = number_list)]
        epsilon: Option<NumberList>,
        /// Write the sampled trajectory as CSV.
        #[arg(long)]
        csv_out: Option<PathBuf>,
        /// Write one `t,value` file per series into this directory.
        #[arg(long)]
        plot_dir: Option<PathBuf>,
        /// Maximum number of emitted rows.
        #[arg(long, default_value_t = consensus_cli::output::MAX_ROWS)]
        max_rows: usize,
    },
    /// Simulate a grid of epsilon values with controllers from the nominal plants.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        horizon: Horizon,
        /// Comma-separated values taken by each epsilon component; may be empty.
        #[arg(long, allow_hyphen_values = true, value_parser = number_list)]
        grid: NumberList,
        /// Only points with every component equal.
        #[arg(long)]
        diagonal: bool,
        /// Write the table here instead of standard output.
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
}

fn overrides(common: &Common, horizon: Option<&Horizon>, epsilon: Option<Vec<f64>>) -> Overrides {
    Overrides {
        epsilon,
        t_end: horizon.and_then(|h| h.t_end),
        dt: horizon.and_then(|h| h.dt),
        mode: common.mode.map(Into::into),
        tolerances: common.tol.clone(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Validate { common } => cmd_validate(&common.scenario, &overrides(&common, None, None)),
        Command::Synth { common, bank } => {
            cmd_synth(&common.scenario, &overrides(&common, None, None), bank.as_deref())
        }
        Command::Simulate {
            common,
            horizon,
            bank,
            epsilon,
            csv_out,
            plot_dir,
            max_rows,
        } => cmd_simulate(
            &common.scenario,
            &overrides(&common, Some(&horizon), epsilon.map(|e| e.0)),
            &SimulateOptions {
                bank,
                csv_out,
                plot_dir,
                tail_start: horizon.tail_start,
                max_rows: Some(max_rows),
            },
        ),
        Command::Sweep {
            common,
            horizon,
            grid,
            diagonal,
            csv_out,
        } => cmd_sweep(
            &common.scenario,
            &overrides(&common, Some(&horizon), None),
            &SweepOptions {
                grid: grid.0,
                diagonal,
                csv_out,
                tail_start: horizon.tail_start,
            },
        ),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::from(EXIT_OK)
        }
        Err(e) => {
            if let consensus_cli::CliError::Validation(report) = &e {
                print!("{report}");
            }
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

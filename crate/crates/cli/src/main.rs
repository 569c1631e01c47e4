use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use igo_cli::commands::{self, Outcome};
use igo_cli::config::{Config, Overrides, BUNDLED};
use igo_cli::CliError;
use igo_core::Execution;

/// Impulsive Goodwin's oscillator: fixed points, stability, simulation and slope design.
#[derive(Parser)]
#[command(name = "igo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON config file; the bundled atracurium example when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long = "T", global = true, allow_negative_numbers = true)]
    period: Option<f64>,
    #[arg(long = "Fp", global = true, allow_negative_numbers = true)]
    f_slope: Option<f64>,
    #[arg(long = "Phip", global = true, allow_negative_numbers = true)]
    phi_slope: Option<f64>,
    /// Output directory; defaults to the config value, then IGO_OUT_DIR.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Evaluate grids on one thread.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic 1-cycle fixed point.
    FixedPoint,
    /// Jacobian, multipliers and stability verdicts at the configured slopes.
    Stability,
    /// Continuous-time trajectory and firing events.
    Simulate,
    /// Spectral radius and verdicts over the slope grid.
    Sweep,
    /// Modulation realizing the target cycle, plus minimal-radius slopes.
    Design,
    /// Print the bundled example config.
    #[command(hide = true)]
    ExampleConfig,
}

fn load(common: &Common) -> Result<Config, CliError> {
    let text = match &common.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        None => BUNDLED.to_string(),
    };
    let mut cfg = Config::parse(&text).map_err(CliError::Invalid)?;
    cfg.apply(&Overrides {
        lambda: common.lambda,
        period: common.period,
        f_slope: common.f_slope,
        phi_slope: common.phi_slope,
        out: common.out.clone(),
    })
    .map_err(CliError::Invalid)?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Option<Outcome>, CliError> {
    if let Command::ExampleConfig = cli.command {
        print!("{BUNDLED}");
        return Ok(None);
    }
    let cfg = load(&cli.common)?;
    let exec = if cli.common.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let out = commands::output_dir(&cfg, std::env::var_os("IGO_OUT_DIR").map(PathBuf::from));
    let outcome = match cli.command {
        Command::FixedPoint => commands::fixed_point(&cfg)?,
        Command::Stability => commands::stability(&cfg)?,
        Command::Simulate => commands::simulate_cmd(&cfg, &out)?,
        Command::Sweep => commands::sweep(&cfg, &out, exec)?,
        Command::Design => commands::design(&cfg, exec)?,
        Command::ExampleConfig => unreachable!(),
    };
    Ok(Some(outcome))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Some(outcome)) => {
            println!("{}", outcome.render_json());
            eprintln!("{}", outcome.summary);
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("igo: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Command-line front end: run a preset or a JSON scenario and emit CSV
//! files plus a machine-readable manifest.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use nmtraj::error::Error;
use nmtraj::scenario::{preset, run, Scenario, PRESET_NAMES};

#[derive(Parser, Debug)]
#[command(
    name = "nmtraj",
    about = "Non-Markovian quantum trajectories: time-local master equations \
             and their jump-process unraveling",
    version
)]
struct Cli {
    /// Preset name (fig1_rates, fig1_population, fig1_strong, fig2_initials,
    /// fig3_detuned, fig4_gap)
    #[arg(long)]
    scenario: Option<String>,

    /// JSON file with a full scenario description; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,

    /// Number of Monte Carlo trajectories (0 disables the ensemble)
    #[arg(long)]
    trajectories: Option<u64>,

    /// Integration time step
    #[arg(long)]
    dt: Option<f64>,

    /// Base RNG seed
    #[arg(long)]
    seed: Option<u64>,

    /// Final time in model units
    #[arg(long, value_name = "TIME")]
    t_end: Option<f64>,

    /// Output directory for CSV files and manifest.json
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn load(cli: &Cli) -> Result<Scenario<f64>, Error> {
    let mut scenario: Scenario<f64> = match (&cli.scenario, &cli.config) {
        (Some(name), None) => preset(name)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str(&text)?
        }
        (Some(name), Some(path)) => {
            // preset as base, file overrides
            let _ = preset::<f64>(name)?;
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str(&text)?
        }
        (None, None) => {
            return Err(Error::UnknownPreset(format!(
                "no scenario given; use --scenario with one of {:?} or --config FILE",
                PRESET_NAMES
            )))
        }
    };
    if let Some(n) = cli.trajectories {
        scenario.n_traj = n;
    }
    if let Some(dt) = cli.dt {
        scenario.dt = dt;
    }
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    if let Some(t_end) = cli.t_end {
        scenario.t_end = t_end;
    }
    Ok(scenario)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let scenario = match load(&cli) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error (configuration): {e}");
            return ExitCode::from(2);
        }
    };
    match run(&scenario, &cli.out) {
        Ok(()) => {
            println!(
                "wrote scenario '{}' to {}",
                scenario.name,
                cli.out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e @ Error::Io(_)) => {
            eprintln!("error (io): {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error (computation): {e}");
            ExitCode::from(1)
        }
    }
}

//! Command-line front end: one subcommand per scenario, each driven by a
//! TOML config file.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ghz_decoherence::scenario::{run_scenario, ExperimentConfig, ScenarioKind};
use ghz_decoherence::Error;

#[derive(Parser, Debug)]
#[command(version, about = "Seeded GHZ decoherence scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Populations, coherence, fidelity and entanglement criteria of one state.
    Characterize(RunArgs),
    /// Coherence against waiting time.
    Decay(RunArgs),
    /// Error-probability ratio against register size and its power-law fit.
    Scaling(RunArgs),
    /// GHZ state against the decoherence-free-subspace state.
    Dfs(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Scenario config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report exact model values without sampling.
    #[arg(long)]
    analytic: bool,
}

impl Command {
    fn split(self) -> (ScenarioKind, RunArgs) {
        match self {
            Command::Characterize(a) => (ScenarioKind::GhzCharacterize, a),
            Command::Decay(a) => (ScenarioKind::GhzDecay, a),
            Command::Scaling(a) => (ScenarioKind::ScalingStudy, a),
            Command::Dfs(a) => (ScenarioKind::DfsContrast, a),
        }
    }
}

fn run(kind: ScenarioKind, args: RunArgs) -> Result<PathBuf, Error> {
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if cfg.scenario != kind {
        return Err(Error::Config {
            field: "scenario".into(),
            message: format!("config describes {:?} but the subcommand runs {kind:?}", cfg.scenario),
        });
    }
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    if args.analytic {
        cfg.analytic = true;
    }
    let out = args
        .out
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Error::Config {
            field: "output_dir".into(),
            message: "give --out or set output_dir".into(),
        })?;
    let artifacts = run_scenario(&cfg)?;
    artifacts.write_to(&out)?;
    for name in artifacts.files.keys() {
        println!("{}", out.join(name).display());
    }
    Ok(out)
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::InvalidArgument(_) | Error::UnsupportedConfiguration(_) => 2,
        Error::FitFailure(_) => 3,
        Error::Io(_) | Error::Internal(_) => 1,
    }
}

fn main() -> ExitCode {
    let (kind, args) = Cli::parse().command.split();
    match run(kind, args) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use monosde::{Engine, WORKERS_ENV};
use monosde_cli::config::{parse_config, Experiment, ExperimentConfig};
use monosde_cli::run::{run, write_artifacts, RunError, RunOutput};
use monosde_cli::verify::Outcome;

#[derive(Parser, Debug)]
#[command(name = "monosde", version, about = "SDEs with monotone drift: simulation, variational processes and Malliavin diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; never changes results.
    #[arg(long, global = true, env = WORKERS_ENV, default_value_t = 0)]
    workers: usize,
    /// Artifact directory (default: `output` from the config, else `.`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Sample paths: path,t,x_0..x_{d-1}.
    Simulate,
    /// Jacobian flow and inverse: path,t,row,col,j,k; Wronskian diagnostics.
    Jacobian,
    /// Malliavin field: path,s,t,row,col,value; Malliavin matrix at T.
    Malliavin,
    /// Gateaux difference-quotient ladder: one row per (epsilon, delta).
    Ladder,
    /// Cameron-Martin identity and Doleans-Dade mean.
    CameronMartin,
    /// BEL and finite-difference sensitivities side by side.
    Greeks,
    /// Acceptance suite: criterion,name,passed,detail.
    Verify,
}

impl Command {
    fn experiment(self) -> Experiment {
        match self {
            Command::Simulate => Experiment::Simulate,
            Command::Jacobian => Experiment::Jacobian,
            Command::Malliavin => Experiment::Malliavin,
            Command::Ladder => Experiment::Ladder,
            Command::CameronMartin => Experiment::CameronMartin,
            Command::Greeks => Experiment::Greeks,
            Command::Verify => Experiment::Verify,
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, RunError> {
    let experiment = cli.command.experiment();
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| RunError::Invalid(format!("cannot read {}: {e}", path.display())))?;
            parse_config(&text)?
        }
        None if experiment == Experiment::Verify => ExperimentConfig::new(Experiment::Verify),
        None => return Err(RunError::Invalid(format!("{} needs --config", experiment.name()))),
    };
    if cfg.experiment != experiment {
        return Err(RunError::Invalid(format!(
            "config declares experiment `{}` but the subcommand is `{}`",
            cfg.experiment.name(),
            experiment.name()
        )));
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn print_table(outcomes: &[Outcome]) {
    for o in outcomes {
        println!(
            "{:>2} {:<26} {}  {}",
            o.id,
            o.name,
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
    }
}

fn finish(cli: &Cli, cfg: &ExperimentConfig, output: &RunOutput) -> Result<(), RunError> {
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    write_artifacts(&dir, cfg, output)?;
    print_table(&output.outcomes);
    for a in &output.artifacts {
        eprintln!("wrote {}", dir.join(&a.name).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load(&cli).and_then(|cfg| {
        let engine = Engine::parallel(cli.workers);
        match run(&cfg, &engine) {
            Ok(output) => finish(&cli, &cfg, &output),
            Err(RunError::VerifyFailed { failed, output }) => {
                finish(&cli, &cfg, &output)?;
                Err(RunError::VerifyFailed { failed, output })
            }
            Err(e) => Err(e),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

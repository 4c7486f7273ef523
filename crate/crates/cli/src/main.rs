use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use groundsim::env::{EnvConfig, Preset, Task};

mod output;
mod rollout;
mod scene;
mod serve;
mod train;

#[derive(Parser)]
#[command(name = "groundsim", version, about = "Headless ground-vehicle simulator for RL experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a PPO policy and write policy.json, returns.csv and config.json.
    Train(train::TrainArgs),
    /// Run greedy episodes with a trained policy and log trajectories.
    Rollout(rollout::RolloutArgs),
    /// Serve the environment over the framed JSON protocol.
    Serve(serve::ServeArgs),
    /// Scene file tools.
    #[command(subcommand)]
    Scene(scene::SceneCommand),
}

/// Environment selection shared by train, rollout and serve. Explicit flags
/// take precedence over values from `--config`.
#[derive(Args, Debug, Clone)]
struct EnvArgs {
    /// World preset: outdoor20, outdoor50, urban20, urban50 or oval.
    #[arg(long = "env", value_name = "PRESET")]
    preset: Option<Preset>,
    /// Reward/termination task: search or racing.
    #[arg(long)]
    task: Option<Task>,
    /// JSON environment config; missing fields take defaults.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Episode step cap.
    #[arg(long)]
    max_steps: Option<usize>,
}

impl EnvArgs {
    fn resolve(&self) -> anyhow::Result<EnvConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
                EnvConfig::from_json(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?
            }
            None => EnvConfig::default(),
        };
        if let Some(p) = self.preset {
            cfg.preset = p;
        }
        if let Some(t) = self.task {
            cfg.task = t;
        }
        if let Some(n) = self.max_steps {
            cfg.max_steps = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_target(false)
        .init();
    let result = match cli.command {
        Command::Train(a) => train::run(a),
        Command::Rollout(a) => rollout::run(a),
        Command::Serve(a) => serve::run(a),
        Command::Scene(c) => scene::run(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use groundsim::env::{Env, EnvConfig};
use groundsim::trainer::{train_with, PpoConfig};
use serde::Serialize;

use crate::output::{write_atomic, write_string};
use crate::EnvArgs;

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    env: EnvArgs,
    /// Total environment steps (rounded up to whole rollouts).
    #[arg(long, default_value_t = 200_000)]
    steps: usize,
    /// Seeds the scene, the spawns, the network initialization and sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// JSON trainer config; missing fields take defaults.
    #[arg(long, value_name = "FILE")]
    ppo_config: Option<PathBuf>,
    /// Parallel environment workers (changes results, stays reproducible).
    #[arg(long)]
    n_envs: Option<usize>,
}

#[derive(Serialize)]
struct RunConfig<'a> {
    env: &'a EnvConfig,
    ppo: &'a PpoConfig,
}

pub fn run(a: TrainArgs) -> anyhow::Result<()> {
    let mut env_cfg = a.env.resolve()?;
    env_cfg.seed = a.seed;
    let mut ppo = match &a.ppo_config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("invalid trainer config {}", path.display()))?
        }
        None => PpoConfig::default(),
    };
    ppo.total_steps = a.steps;
    ppo.seed = a.seed;
    if let Some(n) = a.n_envs {
        ppo.n_envs = n;
    }
    ppo.validate()?;
    Env::new(env_cfg.clone())?;

    tracing::info!(
        preset = %env_cfg.preset,
        task = env_cfg.task.name(),
        steps = ppo.total_steps,
        updates = ppo.updates(),
        "training"
    );
    let (policy, log) = train_with(
        |_| Env::new(env_cfg.clone()),
        &ppo,
        |u| {
            if u.update % 10 == 0 || u.update == u.updates {
                tracing::info!(
                    "update {}/{} steps {} episodes {} recent return {} kl {:.4}",
                    u.update,
                    u.updates,
                    u.env_steps,
                    u.episodes,
                    u.recent_return.map_or("-".to_string(), |r| format!("{r:.1}")),
                    u.stats.approx_kl
                );
            }
        },
    )?;

    write_string(&a.out.join("policy.json"), &policy.to_json())?;
    write_atomic(&a.out.join("returns.csv"), |w| log.write_csv(w))?;
    let snapshot = serde_json::to_string_pretty(&RunConfig {
        env: &env_cfg,
        ppo: &ppo,
    })?;
    write_string(&a.out.join("config.json"), &snapshot)?;
    match log.return_windows(ppo.ma_order) {
        Some((first, last)) => println!(
            "{} episodes, {} updates; mean return first window {first:.2}, final window {last:.2}",
            log.episodes(),
            log.updates
        ),
        None => println!("{} episodes, {} updates", log.episodes(), log.updates),
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use groundsim::env::{Env, EpisodeStats, TrajectoryRow, TrajectoryWriter};
use groundsim::trainer::{run_episode, PolicyParams};
use groundsim::vehicle::Action;
use groundsim_client::RemoteEnv;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::output::write_atomic;
use crate::EnvArgs;

#[derive(Args)]
pub struct RolloutArgs {
    /// policy.json written by `train`
    #[arg(long)]
    policy: PathBuf,
    #[command(flatten)]
    env: EnvArgs,
    /// Number of episodes, each from its own seeded spawn
    #[arg(long, default_value_t = 10)]
    episodes: usize,
    /// Seeds the scene and the per-episode spawns.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for episode_NNN.csv files and summary.csv.
    #[arg(long)]
    out: PathBuf,
    /// Drive an environment server at HOST:PORT instead of a local env.
    #[arg(long, value_name = "HOST:PORT")]
    remote: Option<String>,
}

struct Episode {
    seed: u64,
    rows: Vec<TrajectoryRow>,
    stats: EpisodeStats,
}

pub fn run(a: RolloutArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&a.policy).with_context(|| format!("cannot read policy {}", a.policy.display()))?;
    let policy =
        PolicyParams::from_json(&text).with_context(|| format!("corrupt policy file {}", a.policy.display()))?;
    let mut spawn_rng = ChaCha8Rng::seed_from_u64(a.seed);
    let seeds: Vec<u64> = (0..a.episodes).map(|_| spawn_rng.random()).collect();

    let episodes = match &a.remote {
        Some(addr) => remote_episodes(addr, &policy, &seeds)?,
        None => {
            let mut cfg = a.env.resolve()?;
            cfg.seed = a.seed;
            if cfg.obs_dim() != policy.obs_dim() {
                anyhow::bail!(
                    "policy expects {} observation components but the environment produces {}",
                    policy.obs_dim(),
                    cfg.obs_dim()
                );
            }
            let mut env = Env::new(cfg)?;
            let dt = env.config().vehicle.sample_time;
            seeds
                .iter()
                .map(|&seed| {
                    let mut rows = Vec::new();
                    let stats = run_episode(&mut env, &policy, seed, None, |act, r| {
                        rows.push(TrajectoryRow::new(act, r, dt))
                    })?;
                    Ok(Episode { seed, rows, stats })
                })
                .collect::<anyhow::Result<Vec<_>>>()?
        }
    };

    write_outputs(&a.out, &episodes)?;
    let ok = episodes.iter().filter(|e| !e.stats.collided).count();
    let mean_len = episodes.iter().map(|e| e.stats.length as f64).sum::<f64>() / episodes.len().max(1) as f64;
    println!(
        "{} episodes, {ok} without collision, mean length {mean_len:.1}; wrote {}",
        episodes.len(),
        a.out.display()
    );
    Ok(())
}

fn remote_episodes(addr: &str, policy: &PolicyParams, seeds: &[u64]) -> anyhow::Result<Vec<Episode>> {
    let mut env = RemoteEnv::connect(addr).with_context(|| format!("cannot connect to {addr}"))?;
    let spec = env.spec().clone();
    if spec.obs_dim != policy.obs_dim() {
        anyhow::bail!(
            "policy expects {} observation components but the server produces {}",
            policy.obs_dim(),
            spec.obs_dim
        );
    }
    let mut out = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut obs = env.reset(Some(seed))?;
        let mut rows = Vec::new();
        let mut stats = EpisodeStats::default();
        loop {
            let mean = policy.forward(&obs)?.mean;
            let action = Action::new(mean[0], mean[1])?;
            let r = env.step([action.throttle(), action.steer()])?;
            let i = &r.info;
            rows.push(TrajectoryRow {
                step: i.step,
                t: i.step as f64 * spec.sample_time,
                x: i.x,
                y: i.y,
                psi: i.psi,
                v_joint: i.v_joint,
                a_throttle: action.throttle(),
                a_steer: action.steer(),
                throttle: i.throttle,
                steer: i.steer,
                r_m: i.r_m,
                reward: r.reward,
                terminated: r.terminated,
                truncated: r.truncated,
            });
            stats.episode_return += r.reward;
            stats.length = i.step;
            stats.collided |= r.terminated;
            if r.terminated || r.truncated {
                break;
            }
            obs = r.obs;
        }
        out.push(Episode { seed, rows, stats });
    }
    env.close()?;
    Ok(out)
}

fn write_outputs(dir: &Path, episodes: &[Episode]) -> anyhow::Result<()> {
    for (k, ep) in episodes.iter().enumerate() {
        write_atomic(&dir.join(format!("episode_{k:03}.csv")), |w| {
            let mut t = TrajectoryWriter::new(w)?;
            for row in &ep.rows {
                t.write(row)?;
            }
            t.finish().map(|_| ())
        })?;
    }
    write_atomic(&dir.join("summary.csv"), |w| {
        writeln!(w, "episode,seed,return,length,collided")?;
        for (k, ep) in episodes.iter().enumerate() {
            writeln!(
                w,
                "{k},{},{},{},{}",
                ep.seed, ep.stats.episode_return, ep.stats.length, ep.stats.collided
            )?;
        }
        Ok(())
    })
}

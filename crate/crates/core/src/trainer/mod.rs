//! Desk-scale PPO: tanh MLP policy and value networks with analytic
//! gradients, GAE, clipped-surrogate updates and Adam.

mod mlp;
mod policy;
mod ppo;

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Env, EnvError, EpisodeStats, StepResult};
use crate::vehicle::{Action, VehicleError};

pub use mlp::Layer;
pub use policy::{Arch, PolicyOutput, PolicyParams, ACT_DIM, POLICY_VERSION};
pub use ppo::{
    check_gradients, clip_grad_norm, gae, GradCheck, loss_and_grad, normalize, ppo_update, Adam, LossCoeffs, LossStats, Minibatch,
    RolloutBuffer, Transition, UpdateStats,
};

pub const TRAIN_LOG_HEADER: &str = "episode,steps,return,moving_avg";

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Action(#[from] VehicleError),
    #[error("observation has {found} components, policy expects {expected}")]
    Shape { expected: usize, found: usize },
    #[error("invalid policy: {0}")]
    Policy(String),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("rollout buffer is full (capacity {0})")]
    BufferFull(usize),
    #[error("rollout buffer holds {len} of {capacity} steps; advantages need a full buffer")]
    BufferNotFull { len: usize, capacity: usize },
    #[error(
        "non-finite loss in epoch {epoch}, minibatch {minibatch} \
         (policy {policy}, value {value}, entropy {entropy})"
    )]
    NonFinite {
        epoch: usize,
        minibatch: usize,
        policy: f64,
        value: f64,
        entropy: f64,
    },
    #[error("training worker panicked")]
    Worker,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub horizon: usize,
    pub minibatch: usize,
    pub epochs: usize,
    pub clip: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub lr: f64,
    pub ent_coef: f64,
    pub vf_coef: f64,
    pub max_grad_norm: f64,
    pub total_steps: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub log_std_init: f64,
    /// Multiplies environment rewards before they enter the buffer; logged
    /// returns are unscaled.
    pub reward_scale: f64,
    /// Parallel environment workers. Results depend on this value but are
    /// reproducible for a fixed value.
    pub n_envs: usize,
    /// Order of the logged moving average.
    pub ma_order: usize,
    /// Decay the learning rate linearly to zero over the run.
    pub anneal_lr: bool,
    /// Stop an update's remaining epochs once the mean approximate KL of an
    /// epoch exceeds this.
    pub target_kl: Option<f64>,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            horizon: 2048,
            minibatch: 64,
            epochs: 10,
            clip: 0.2,
            gamma: 0.99,
            lambda: 0.95,
            lr: 3e-4,
            ent_coef: 0.0,
            vf_coef: 0.5,
            max_grad_norm: 0.5,
            total_steps: 200_000,
            seed: 0,
            hidden: vec![64, 64],
            log_std_init: 0.0,
            reward_scale: 0.1,
            n_envs: 1,
            ma_order: 1000,
            anneal_lr: true,
            target_kl: None,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.into()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must be in [0, 1]");
        }
        if self.clip.is_nan() || self.clip <= 0.0 {
            return bad("clip must be > 0");
        }
        if self.horizon == 0 || self.minibatch == 0 || self.epochs == 0 {
            return bad("horizon, minibatch and epochs must be positive");
        }
        if self.total_steps == 0 {
            return bad("total_steps must be positive");
        }
        if self.n_envs == 0 || !self.horizon.is_multiple_of(self.n_envs) {
            return bad("n_envs must be positive and divide horizon");
        }
        if self.ma_order == 0 {
            return bad("ma_order must be at least 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || self.max_grad_norm.is_nan() || self.max_grad_norm <= 0.0 {
            return bad("lr and max_grad_norm must be positive");
        }
        if self.target_kl.is_some_and(|k| k.is_nan() || k <= 0.0) {
            return bad("target_kl must be > 0");
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        for v in [self.ent_coef, self.vf_coef, self.log_std_init, self.reward_scale] {
            if !v.is_finite() {
                return bad("coefficients must be finite");
            }
        }
        Ok(())
    }

    pub fn updates(&self) -> usize {
        self.total_steps.div_ceil(self.horizon)
    }
}

/// Element `i` is the mean of the trailing window of `min(i + 1, order)`
/// values. The incremental mean keeps constant series exactly constant.
pub fn moving_average(series: &[f64], order: usize) -> Vec<f64> {
    assert!(order >= 1, "moving-average order must be at least 1");
    (0..series.len())
        .map(|i| {
            let start = (i + 1).saturating_sub(order);
            let mut m = 0.0;
            for (k, x) in series[start..=i].iter().enumerate() {
                m += (x - m) / (k + 1) as f64;
            }
            m
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainLog {
    pub returns: Vec<f64>,
    pub lengths: Vec<usize>,
    pub collided: Vec<bool>,
    pub order: usize,
    pub moving_avg: Vec<f64>,
    pub updates: usize,
    pub env_steps: usize,
}

impl TrainLog {
    pub fn new(order: usize) -> Self {
        Self {
            returns: Vec::new(),
            lengths: Vec::new(),
            collided: Vec::new(),
            order,
            moving_avg: Vec::new(),
            updates: 0,
            env_steps: 0,
        }
    }

    pub fn episodes(&self) -> usize {
        self.returns.len()
    }

    pub fn push(&mut self, ep: EpisodeStats) {
        self.returns.push(ep.episode_return);
        self.lengths.push(ep.length);
        self.collided.push(ep.collided);
    }

    fn finish(&mut self) {
        self.moving_avg = moving_average(&self.returns, self.order);
    }

    /// Size of the first and final comparison windows: the moving-average
    /// order, shrunk to half the episode count so the windows never overlap.
    pub fn window(&self, order: usize) -> usize {
        order.min(self.episodes() / 2)
    }

    /// Mean return over the first and the last `window(order)` episodes.
    pub fn return_windows(&self, order: usize) -> Option<(f64, f64)> {
        let w = self.window(order);
        (w > 0).then(|| {
            let n = self.returns.len();
            (mean(&self.returns[..w]), mean(&self.returns[n - w..]))
        })
    }

    /// Mean episode length over the first and the last `window(order)`
    /// episodes.
    pub fn length_windows(&self, order: usize) -> Option<(f64, f64)> {
        let w = self.window(order);
        let lens: Vec<f64> = self.lengths.iter().map(|&l| l as f64).collect();
        (w > 0).then(|| (mean(&lens[..w]), mean(&lens[lens.len() - w..])))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{TRAIN_LOG_HEADER}")?;
        for i in 0..self.returns.len() {
            writeln!(out, "{},{},{},{}", i + 1, self.lengths[i], self.returns[i], self.moving_avg[i])?;
        }
        out.flush()
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Progress report handed to the training callback after every update.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpdateReport {
    pub update: usize,
    pub updates: usize,
    pub env_steps: usize,
    pub episodes: usize,
    pub recent_return: Option<f64>,
    pub stats: UpdateStats,
}

struct Worker {
    env: Env,
    rng: ChaCha8Rng,
    obs: Vec<f64>,
}

impl Worker {
    fn collect(
        &mut self,
        p: &PolicyParams,
        steps: usize,
        cfg: &PpoConfig,
    ) -> Result<(RolloutBuffer, Vec<EpisodeStats>), TrainError> {
        let mut buf = RolloutBuffer::new(steps);
        let mut episodes = Vec::new();
        for _ in 0..steps {
            let out = p.forward(&self.obs)?;
            let raw = p.sample(&out.mean, &mut self.rng);
            let log_prob = p.log_prob(&out.mean, &raw);
            let r = self.env.step(Action::new(raw[0], raw[1])?)?;
            let mut reward = r.reward * cfg.reward_scale;
            let next = r.observation.to_vec();
            if r.truncated && !r.terminated {
                reward += cfg.gamma * p.forward(&next)?.value;
            }
            buf.push(Transition {
                obs: std::mem::replace(&mut self.obs, next),
                action: raw,
                log_prob,
                reward,
                value: out.value,
                terminated: r.terminated,
                truncated: r.truncated,
            })?;
            if r.done() {
                episodes.push(self.env.episode_stats());
                self.obs = self.env.reset(None)?.to_vec();
            }
        }
        let bootstrap = p.forward(&self.obs)?.value;
        buf.compute_advantages(bootstrap, cfg.gamma, cfg.lambda)?;
        Ok((buf, episodes))
    }
}

/// Trains from scratch. `make_env(i)` builds the environment for worker `i`.
pub fn train<F>(make_env: F, cfg: &PpoConfig) -> Result<(PolicyParams, TrainLog), TrainError>
where
    F: Fn(usize) -> Result<Env, EnvError>,
{
    train_with(make_env, cfg, |_| {})
}

pub fn train_with<F, C>(make_env: F, cfg: &PpoConfig, mut on_update: C) -> Result<(PolicyParams, TrainLog), TrainError>
where
    F: Fn(usize) -> Result<Env, EnvError>,
    C: FnMut(&UpdateReport),
{
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut workers = Vec::with_capacity(cfg.n_envs);
    for i in 0..cfg.n_envs {
        let mut env = make_env(i)?;
        let reset_seed = rng.random::<u64>();
        let obs = env.reset(Some(reset_seed))?.to_vec();
        workers.push(Worker {
            env,
            rng: ChaCha8Rng::seed_from_u64(rng.random()),
            obs,
        });
    }
    let obs_dim = workers[0].obs.len();
    let mut policy = PolicyParams::init(obs_dim, &cfg.hidden, cfg.log_std_init, &mut rng);
    let mut opt = Adam::new(policy.num_params(), cfg.lr);
    let mut log = TrainLog::new(cfg.ma_order);
    let segment = cfg.horizon / cfg.n_envs;
    let updates = cfg.updates();

    for update in 0..updates {
        if cfg.anneal_lr {
            opt.set_lr(cfg.lr * (1.0 - update as f64 / updates as f64));
        }
        let results = if workers.len() == 1 {
            vec![workers[0].collect(&policy, segment, cfg)]
        } else {
            let policy = &policy;
            std::thread::scope(|s| {
                let handles: Vec<_> = workers
                    .iter_mut()
                    .map(|w| s.spawn(move || w.collect(policy, segment, cfg)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().unwrap_or(Err(TrainError::Worker)))
                    .collect()
            })
        };
        let mut buf = RolloutBuffer::new(0);
        for r in results {
            let (b, eps) = r?;
            buf.extend(b);
            eps.into_iter().for_each(|e| log.push(e));
        }
        let stats = ppo_update(&buf, &mut policy, &mut opt, cfg, &mut rng)?;
        log.updates += 1;
        log.env_steps += buf.len();
        let recent = log.returns.len().min(20);
        on_update(&UpdateReport {
            update: update + 1,
            updates,
            env_steps: log.env_steps,
            episodes: log.episodes(),
            recent_return: (recent > 0).then(|| mean(&log.returns[log.returns.len() - recent..])),
            stats,
        });
    }
    log.finish();
    Ok((policy, log))
}

/// Runs one episode from `env.reset(Some(seed))`, acting greedily unless a
/// sampling rng is supplied, and calls `on_step` after every step.
pub fn run_episode<F>(
    env: &mut Env,
    policy: &PolicyParams,
    seed: u64,
    mut sample: Option<&mut ChaCha8Rng>,
    mut on_step: F,
) -> Result<EpisodeStats, TrainError>
where
    F: FnMut(Action, &StepResult),
{
    let mut obs = env.reset(Some(seed))?.to_vec();
    loop {
        let mean = policy.forward(&obs)?.mean;
        let raw = match sample.as_deref_mut() {
            Some(rng) => policy.sample(&mean, rng),
            None => mean,
        };
        let action = Action::new(raw[0], raw[1])?;
        let r = env.step(action)?;
        on_step(action, &r);
        if r.done() {
            return Ok(env.episode_stats());
        }
        obs = r.observation.to_vec();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_average_examples() {
        assert_eq!(moving_average(&[1.0, 2.0, 3.0, 4.0], 3), vec![1.0, 1.5, 2.0, 3.0]);
        let s = [0.3, -1.0, 7.5];
        assert_eq!(moving_average(&s, 1), s.to_vec());
        assert_eq!(moving_average(&[0.1; 50], 7), vec![0.1; 50]);
        assert!(moving_average(&[], 3).is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(PpoConfig::default().validate().is_ok());
        let bad = [
            PpoConfig { gamma: 0.0, ..Default::default() },
            PpoConfig { gamma: 1.5, ..Default::default() },
            PpoConfig { lambda: -0.1, ..Default::default() },
            PpoConfig { clip: 0.0, ..Default::default() },
            PpoConfig { n_envs: 3, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn update_count_rounds_up() {
        let c = PpoConfig { total_steps: 2049, ..Default::default() };
        assert_eq!(c.updates(), 2);
        let c = PpoConfig { total_steps: 2048, ..Default::default() };
        assert_eq!(c.updates(), 1);
    }

    #[test]
    fn windows_do_not_overlap() {
        let mut log = TrainLog::new(100);
        for i in 0..10 {
            log.push(EpisodeStats {
                episode_return: i as f64,
                length: i,
                collided: false,
            });
        }
        assert_eq!(log.window(100), 5);
        assert_eq!(log.return_windows(100), Some((2.0, 7.0)));
        assert_eq!(log.length_windows(3), Some((1.0, 8.0)));
    }
}

//! Episodic reset/step environment over the preset worlds.

mod presets;
pub mod reward;
mod trajectory;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec2;
use crate::scene::{Scene, SpatialIndex};
use crate::sensors::{
    gps_read, imu_read, lidar_scan, GpsReading, ImuReading, LidarConfig, LidarScan, SensorError,
    Velocities,
};
use crate::vehicle::{
    clamp_action, step_joint_speed, step_pose, Action, ControlInput, VehicleError, VehicleParams,
    VehicleState,
};

pub use presets::{build_preset, Preset, SpawnRegion, UnknownPreset};
pub use reward::{reward_racing, reward_search, reward_search_additive, RewardMode};
pub use trajectory::{TrajectoryRow, TrajectoryWriter, TRAJECTORY_HEADER};

/// Extra stream constant so the spawn sampler and the scene generator never
/// share a random sequence for the same seed.
const SPAWN_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;
/// Heading jitter for track spawns, rad.
const TRACK_HEADING_JITTER: f64 = 0.3;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error(transparent)]
    UnknownPreset(#[from] UnknownPreset),
    #[error(transparent)]
    Vehicle(#[from] VehicleError),
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("no collision-free spawn found after {0} attempts")]
    NoSpawn(u32),
    #[error("environment must be reset before stepping")]
    NotReset,
    #[error("episode is over; call reset before stepping again")]
    EpisodeOver,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    #[default]
    Search,
    Racing,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Search => "search",
            Task::Racing => "racing",
        }
    }

    /// Penalty radius of the task's reward, used as the default termination
    /// threshold.
    pub fn penalty_radius(&self) -> f64 {
        match self {
            Task::Search => reward::SEARCH_COLLISION_RADIUS,
            Task::Racing => reward::RACING_COLLISION_RADIUS,
        }
    }

    pub fn reward(&self, mode: RewardMode, r_m: f64, c: ControlInput) -> f64 {
        match (self, mode) {
            (Task::Search, RewardMode::Exclusive) => reward_search(r_m, c.throttle, c.steer),
            (Task::Search, RewardMode::Additive) => reward_search_additive(r_m, c.throttle, c.steer),
            (Task::Racing, _) => reward_racing(r_m, c.throttle, c.steer),
        }
    }
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "search" => Ok(Task::Search),
            "racing" => Ok(Task::Racing),
            other => Err(format!("unknown task '{other}' (expected search or racing)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub preset: Preset,
    pub task: Task,
    pub vehicle: VehicleParams,
    pub lidar: LidarConfig,
    pub max_steps: usize,
    /// Termination threshold on the minimum LiDAR range, m. Defaults to the
    /// task's penalty radius.
    pub collision_radius: Option<f64>,
    /// Seeds the procedural scene and the first spawn.
    pub seed: u64,
    pub reward_mode: RewardMode,
    /// Minimum spawn distance to any obstacle, m.
    pub spawn_clearance: f64,
    pub spawn_attempts: u32,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            preset: Preset::Outdoor20,
            task: Task::Search,
            vehicle: VehicleParams::default(),
            lidar: LidarConfig::default(),
            max_steps: 2000,
            collision_radius: None,
            seed: 0,
            reward_mode: RewardMode::Exclusive,
            spawn_clearance: 1.5,
            spawn_attempts: 1000,
        }
    }
}

impl EnvConfig {
    pub fn new(preset: Preset, task: Task) -> Self {
        Self {
            preset,
            task,
            ..Self::default()
        }
    }

    /// Parses a JSON configuration document. Missing fields take defaults;
    /// unknown fields are rejected.
    pub fn from_json(text: &str) -> Result<Self, EnvError> {
        let cfg: EnvConfig = serde_json::from_str(text).map_err(|e| EnvError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn collision_radius(&self) -> f64 {
        self.collision_radius.unwrap_or_else(|| self.task.penalty_radius())
    }

    pub fn obs_dim(&self) -> usize {
        self.lidar.n_rays + 3
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        self.vehicle.validate()?;
        self.lidar.validate()?;
        if self.max_steps == 0 {
            return Err(EnvError::Config("max_steps must be at least 1".into()));
        }
        let r = self.collision_radius();
        if !(r.is_finite() && r > 0.0) {
            return Err(EnvError::Config("collision_radius must be > 0".into()));
        }
        if !(self.spawn_clearance.is_finite() && self.spawn_clearance >= 0.0) {
            return Err(EnvError::Config("spawn_clearance must be >= 0".into()));
        }
        if self.vehicle.drag_coeff == 0.0 && self.vehicle.rolling_coeff == 0.0 {
            return Err(EnvError::Config(
                "drag_coeff or rolling_coeff must be positive to bound the speed".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// LiDAR ranges divided by `r_max`, in (0, 1].
    pub ranges_norm: Vec<f64>,
    /// Ground speed over the full-throttle steady-state speed, in [-1, 1].
    pub speed_norm: f64,
    pub prev_action: [f64; 2],
}

impl Observation {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.ranges_norm.len() + 3);
        v.extend_from_slice(&self.ranges_norm);
        v.push(self.speed_norm);
        v.extend_from_slice(&self.prev_action);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub r_m: f64,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub v_joint: f64,
    #[serde(rename = "T")]
    pub throttle: f64,
    #[serde(rename = "delta")]
    pub steer: f64,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    /// The minimum range fell below the collision radius.
    pub terminated: bool,
    /// The step cap was reached.
    pub truncated: bool,
    pub info: StepInfo,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeStats {
    #[serde(rename = "return")]
    pub episode_return: f64,
    pub length: usize,
    pub collided: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Fresh,
    Running,
    Done,
}

/// One simulated vehicle in one preset world.
///
/// An `Env` owns its episode state and is driven from a single thread;
/// independent instances share nothing.
#[derive(Debug, Clone)]
pub struct Env {
    cfg: EnvConfig,
    scene: Scene,
    index: SpatialIndex,
    spawn: SpawnRegion,
    rng: ChaCha8Rng,
    state: VehicleState,
    prev_velocities: Option<Velocities>,
    prev_action: Action,
    last_scan: Option<LidarScan>,
    steps: usize,
    status: Status,
    stats: EpisodeStats,
    speed_cap: f64,
}

pub fn make_env(cfg: EnvConfig) -> Result<Env, EnvError> {
    Env::new(cfg)
}

impl Env {
    pub fn new(cfg: EnvConfig) -> Result<Self, EnvError> {
        let (scene, spawn) = build_preset(cfg.preset, cfg.seed);
        Self::with_scene(cfg, scene, spawn)
    }

    /// Uses a caller-supplied scene instead of the preset.
    pub fn with_scene(cfg: EnvConfig, scene: Scene, spawn: SpawnRegion) -> Result<Self, EnvError> {
        cfg.validate()?;
        let speed_cap = cfg.vehicle.steady_state_joint_speed(1.0) * cfg.vehicle.wheel_radius;
        let origin = scene.bounds();
        let state = VehicleState::at_rest(
            (origin.xmin + origin.xmax) / 2.0,
            (origin.ymin + origin.ymax) / 2.0,
            0.0,
        );
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ SPAWN_STREAM),
            index: SpatialIndex::build(&scene),
            scene,
            spawn,
            state,
            prev_velocities: None,
            prev_action: Action::default(),
            last_scan: None,
            steps: 0,
            status: Status::Fresh,
            stats: EpisodeStats::default(),
            speed_cap,
            cfg,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn index(&self) -> &SpatialIndex {
        &self.index
    }

    pub fn state(&self) -> &VehicleState {
        &self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn obs_dim(&self) -> usize {
        self.cfg.obs_dim()
    }

    pub fn last_scan(&self) -> Option<&LidarScan> {
        self.last_scan.as_ref()
    }

    /// Return, length and collision flag of the current (or just finished)
    /// episode.
    pub fn episode_stats(&self) -> EpisodeStats {
        self.stats
    }

    pub fn is_done(&self) -> bool {
        self.status == Status::Done
    }

    pub fn gps(&self) -> GpsReading {
        gps_read(&self.state)
    }

    pub fn imu(&self) -> ImuReading {
        imu_read(&self.state, self.prev_velocities.as_ref(), self.cfg.vehicle.sample_time)
    }

    /// Starts a new episode from a random collision-free spawn. With `Some`
    /// seed the spawn is a pure function of that seed; with `None` the
    /// environment's own stream continues.
    pub fn reset(&mut self, seed: Option<u64>) -> Result<Observation, EnvError> {
        if let Some(seed) = seed {
            self.rng = ChaCha8Rng::seed_from_u64(seed);
        }
        let (state, scan) = self.sample_spawn()?;
        self.state = state;
        self.prev_velocities = None;
        self.prev_action = Action::default();
        self.steps = 0;
        self.status = Status::Running;
        self.stats = EpisodeStats::default();
        let obs = self.observe(&scan);
        self.last_scan = Some(scan);
        Ok(obs)
    }

    /// Resets to an explicit pose instead of sampling one.
    pub fn reset_to(&mut self, x: f64, y: f64, yaw: f64) -> Observation {
        self.state = VehicleState::at_rest(x, y, yaw);
        let scan = self.scan();
        self.prev_velocities = None;
        self.prev_action = Action::default();
        self.steps = 0;
        self.status = Status::Running;
        self.stats = EpisodeStats::default();
        let obs = self.observe(&scan);
        self.last_scan = Some(scan);
        obs
    }

    fn sample_spawn(&mut self) -> Result<(VehicleState, LidarScan), EnvError> {
        let b = self.scene.bounds();
        let clearance = self.cfg.spawn_clearance;
        let collision = self.cfg.collision_radius();
        for _ in 0..self.cfg.spawn_attempts {
            let (xlo, xhi) = (b.xmin + clearance, b.xmax - clearance);
            let (ylo, yhi) = (b.ymin + clearance, b.ymax - clearance);
            if xlo >= xhi || ylo >= yhi {
                break;
            }
            let p = Vec2::new(self.rng.random_range(xlo..xhi), self.rng.random_range(ylo..yhi));
            let jitter = self.rng.random_range(-1.0..1.0);
            let free_heading = self.rng.random_range(-PI..PI);
            if !self.spawn.contains(p) || self.scene.clearance(p) < clearance {
                continue;
            }
            let yaw = match self.spawn.heading(p) {
                Some(h) => h + TRACK_HEADING_JITTER * jitter,
                None => free_heading,
            };
            let state = VehicleState::at_rest(p.x, p.y, yaw);
            let scan = lidar_scan(&self.index, &state, &self.cfg.vehicle, &self.cfg.lidar);
            if scan.min_range > collision {
                return Ok((state, scan));
            }
        }
        Err(EnvError::NoSpawn(self.cfg.spawn_attempts))
    }

    fn scan(&self) -> LidarScan {
        lidar_scan(&self.index, &self.state, &self.cfg.vehicle, &self.cfg.lidar)
    }

    fn observe(&self, scan: &LidarScan) -> Observation {
        let r_max = self.cfg.lidar.r_max;
        let speed = self.state.ground_speed(&self.cfg.vehicle) / self.speed_cap;
        Observation {
            ranges_norm: scan.ranges.iter().map(|r| (r / r_max).max(f64::EPSILON)).collect(),
            speed_norm: speed.clamp(-1.0, 1.0),
            prev_action: [self.prev_action.throttle(), self.prev_action.steer()],
        }
    }

    /// Advances the simulation by exactly one sample period.
    pub fn step(&mut self, action: Action) -> Result<StepResult, EnvError> {
        match self.status {
            Status::Fresh => return Err(EnvError::NotReset),
            Status::Done => return Err(EnvError::EpisodeOver),
            Status::Running => {}
        }
        let p = &self.cfg.vehicle;
        let control = clamp_action(action, p);
        self.prev_velocities = Some(Velocities::from(&self.state));
        let mut state = self.state;
        state.joint_speed = step_joint_speed(state.joint_speed, control.throttle, p);
        self.state = step_pose(&state, control, p);
        self.prev_action = action;

        let scan = self.scan();
        let r_m = scan.min_range;
        let reward = self.cfg.task.reward(self.cfg.reward_mode, r_m, control);
        self.steps += 1;
        let terminated = r_m < self.cfg.collision_radius();
        let truncated = self.steps >= self.cfg.max_steps;
        if terminated || truncated {
            self.status = Status::Done;
        }
        self.stats.episode_return += reward;
        self.stats.length = self.steps;
        self.stats.collided |= terminated;

        let observation = self.observe(&scan);
        self.last_scan = Some(scan);
        Ok(StepResult {
            observation,
            reward,
            terminated,
            truncated,
            info: StepInfo {
                r_m,
                x: self.state.position[0],
                y: self.state.position[1],
                psi: self.state.yaw(),
                v_joint: self.state.joint_speed,
                throttle: control.throttle,
                steer: control.steer,
                step: self.steps,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(preset: Preset, task: Task) -> Env {
        Env::new(EnvConfig::new(preset, task)).unwrap()
    }

    #[test]
    fn reset_is_deterministic_per_seed() {
        let mut a = env(Preset::Outdoor20, Task::Search);
        let mut b = env(Preset::Outdoor20, Task::Search);
        assert_eq!(a.reset(Some(7)).unwrap(), b.reset(Some(7)).unwrap());
        assert_eq!(a.reset(Some(7)).unwrap(), b.reset(Some(7)).unwrap());
        assert_ne!(a.reset(Some(8)).unwrap(), b.reset(Some(7)).unwrap());
    }

    #[test]
    fn reset_starts_at_rest_and_clear() {
        for preset in Preset::ALL {
            let mut e = env(preset, Task::Search);
            for seed in 0..20 {
                let obs = e.reset(Some(seed)).unwrap();
                assert_eq!(obs.speed_norm, 0.0);
                assert_eq!(obs.prev_action, [0.0, 0.0]);
                assert!(e.last_scan().unwrap().min_range > e.config().collision_radius());
                assert!(e.scene().clearance(Vec2::new(e.state().position[0], e.state().position[1])) >= 1.5);
            }
        }
    }

    #[test]
    fn step_requires_reset() {
        let mut e = env(Preset::Outdoor20, Task::Search);
        assert!(matches!(e.step(Action::default()), Err(EnvError::NotReset)));
    }

    #[test]
    fn first_full_throttle_step_advances_by_closed_form() {
        let mut e = env(Preset::Outdoor20, Task::Racing);
        e.reset(Some(3)).unwrap();
        let start = *e.state();
        let r = e.step(Action::new(1.0, 0.0).unwrap()).unwrap();
        let p = VehicleParams::default();
        let expected = p.sample_time * p.sample_time * p.throttle_coeff * p.wheel_radius;
        let moved = (r.info.x - start.position[0]).hypot(r.info.y - start.position[1]);
        assert!((moved - expected).abs() < 1e-15);
        assert_eq!(r.info.psi, start.yaw());
        assert_eq!(r.reward, reward_racing(r.info.r_m, 1.0, 0.0));
        assert!(!r.terminated && !r.truncated);
    }

    #[test]
    fn collision_terminates_with_penalty() {
        let mut e = env(Preset::Oval, Task::Racing);
        e.reset(Some(1)).unwrap();
        // Full throttle straight ahead eventually meets a barrier.
        let mut last = None;
        for _ in 0..5000 {
            let r = e.step(Action::new(1.0, 0.0).unwrap()).unwrap();
            if r.done() {
                last = Some(r);
                break;
            }
        }
        let r = last.expect("a wall is reached");
        assert!(r.terminated);
        assert_eq!(r.reward, -50.0);
        assert!(r.info.r_m < 0.8);
        assert!(matches!(e.step(Action::default()), Err(EnvError::EpisodeOver)));
        assert!(e.episode_stats().collided);
    }

    #[test]
    fn step_cap_truncates() {
        let cfg = EnvConfig {
            max_steps: 5,
            ..EnvConfig::new(Preset::Outdoor20, Task::Search)
        };
        let mut e = Env::new(cfg).unwrap();
        e.reset(Some(0)).unwrap();
        for i in 1..=5 {
            let r = e.step(Action::default()).unwrap();
            assert_eq!(r.truncated, i == 5);
            assert!(!r.terminated);
        }
        assert_eq!(e.episode_stats().length, 5);
    }

    #[test]
    fn config_json_rejects_unknown_keys() {
        assert!(EnvConfig::from_json(r#"{"preset":"oval","bogus":1}"#).is_err());
        let cfg = EnvConfig::from_json(r#"{"preset":"urban50","task":"racing","max_steps":10}"#).unwrap();
        assert_eq!(cfg.preset, Preset::Urban50);
        assert_eq!(cfg.collision_radius(), 0.8);
        assert_eq!(cfg.max_steps, 10);
        assert!(EnvConfig::from_json(r#"{"preset":"nosuch"}"#).is_err());
        assert!(EnvConfig::from_json(r#"{"max_steps":0}"#).is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = EnvConfig::new(Preset::Oval, Task::Racing);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(EnvConfig::from_json(&text).unwrap(), cfg);
    }
}

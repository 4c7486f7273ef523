//! Headless ground-vehicle simulation for reinforcement-learning research.
//!
//! The crate is layered bottom-up:
//!
//! * [`scene`] holds planar world geometry and the ray-cast primitive.
//! * [`vehicle`] converts normalized actions into Ackermann control inputs and
//!   integrates joint speed and pose.
//! * [`sensors`] reads GPS, IMU, LiDAR and a ray-traced camera off the state.
//! * [`env`] wires the above into an episodic reset/step environment with the
//!   search and racing rewards.
//! * [`trainer`] is a small on-policy PPO implementation with hand-written
//!   backpropagation.
//! * [`wire`] defines the framed JSON protocol used by the network server.

pub mod env;
pub mod geom;
pub mod scene;
pub mod sensors;
pub mod trainer;
pub mod vehicle;
pub mod wire;

pub use env::{Env, EnvConfig, EnvError, Observation, Preset, StepResult, Task};
pub use geom::Vec2;
pub use scene::{Hit, Obstacle, Ray, RayCaster, Scene, SceneError, Shape, SpatialIndex};

pub use vehicle::{Action, ControlInput, VehicleParams, VehicleState};

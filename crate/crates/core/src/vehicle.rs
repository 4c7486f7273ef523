//! Ackermann actuation and planar motion.
//!
//! Normalized policy outputs are clamped into throttle and steering angle,
//! the shared drive-joint speed follows a throttle/resistance model
//! integrated with explicit Euler, and the pose follows the kinematic bicycle
//! model with the same step.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::wrap_angle;

#[derive(Debug, Error, PartialEq)]
pub enum VehicleError {
    #[error("action component {0} is not finite")]
    NonFiniteAction(&'static str),
    #[error("invalid vehicle parameter `{field}`: {reason}")]
    InvalidParam {
        field: &'static str,
        reason: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleParams {
    /// Distance between axles, m.
    pub wheelbase: f64,
    /// Drive wheel radius, m.
    pub wheel_radius: f64,
    /// Quadratic drag constant, 1/m.
    pub drag_coeff: f64,
    /// Rolling resistance constant, 1/s.
    pub rolling_coeff: f64,
    /// Joint acceleration at full throttle.
    pub throttle_coeff: f64,
    /// Integration step, s.
    pub sample_time: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    /// LiDAR position in the body frame `(x, y, z)`, m.
    pub lidar_mount: [f64; 3],
    /// LiDAR fan orientation offset, rad.
    pub lidar_mount_yaw: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            wheelbase: 0.32,
            wheel_radius: 0.05,
            drag_coeff: 0.01,
            rolling_coeff: 0.1,
            throttle_coeff: 20.0,
            sample_time: 0.01,
            delta_min: -0.6,
            delta_max: 0.6,
            lidar_mount: [0.15, 0.0, 0.1],
            lidar_mount_yaw: std::f64::consts::FRAC_PI_4,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), VehicleError> {
        let positive = [
            ("wheelbase", self.wheelbase),
            ("wheel_radius", self.wheel_radius),
            ("throttle_coeff", self.throttle_coeff),
            ("sample_time", self.sample_time),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(VehicleError::InvalidParam {
                    field,
                    reason: "must be finite and > 0",
                });
            }
        }
        for (field, v) in [("drag_coeff", self.drag_coeff), ("rolling_coeff", self.rolling_coeff)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(VehicleError::InvalidParam {
                    field,
                    reason: "must be finite and >= 0",
                });
            }
        }
        if !(self.delta_min.is_finite() && self.delta_min < 0.0) {
            return Err(VehicleError::InvalidParam {
                field: "delta_min",
                reason: "must be finite and < 0",
            });
        }
        if !(self.delta_max.is_finite() && self.delta_max > 0.0) {
            return Err(VehicleError::InvalidParam {
                field: "delta_max",
                reason: "must be finite and > 0",
            });
        }
        if !(self.lidar_mount.iter().all(|v| v.is_finite()) && self.lidar_mount_yaw.is_finite()) {
            return Err(VehicleError::InvalidParam {
                field: "lidar_mount",
                reason: "must be finite",
            });
        }
        Ok(())
    }

    /// Joint speed at which throttle `t` balances resistance: the positive
    /// root of `C_d v^2 + C_r v - C_T t = 0`.
    pub fn steady_state_joint_speed(&self, throttle: f64) -> f64 {
        let drive = self.throttle_coeff * throttle;
        if self.drag_coeff == 0.0 {
            if self.rolling_coeff == 0.0 {
                return f64::INFINITY;
            }
            return drive / self.rolling_coeff;
        }
        let c_r = self.rolling_coeff;
        (-c_r + (c_r * c_r + 4.0 * self.drag_coeff * drive).sqrt()) / (2.0 * self.drag_coeff)
    }
}

/// Normalized policy output, each component clamped into `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    throttle: f64,
    steer: f64,
}

impl Action {
    pub fn new(throttle: f64, steer: f64) -> Result<Self, VehicleError> {
        if !throttle.is_finite() {
            return Err(VehicleError::NonFiniteAction("throttle"));
        }
        if !steer.is_finite() {
            return Err(VehicleError::NonFiniteAction("steer"));
        }
        Ok(Self {
            throttle: throttle.clamp(-1.0, 1.0),
            steer: steer.clamp(-1.0, 1.0),
        })
    }

    pub fn throttle(&self) -> f64 {
        self.throttle
    }

    pub fn steer(&self) -> f64 {
        self.steer
    }
}

/// Throttle in `[0, 1]` and steering angle in `[delta_min, delta_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub throttle: f64,
    pub steer: f64,
}

/// Converts a normalized action into control inputs. The steering component
/// is read directly as radians before clamping to the steering limits.
pub fn clamp_action(a: Action, p: &VehicleParams) -> ControlInput {
    ControlInput {
        throttle: a.throttle.clamp(0.0, 1.0),
        steer: a.steer.min(p.delta_max).max(p.delta_min),
    }
}

/// Resistive deceleration for the previous joint speed.
pub fn friction(v_prev: f64, p: &VehicleParams) -> f64 {
    v_prev * (v_prev * p.drag_coeff + p.rolling_coeff)
}

/// One explicit-Euler step of the shared drive-joint speed.
pub fn step_joint_speed(v_prev: f64, throttle: f64, p: &VehicleParams) -> f64 {
    let accel = p.throttle_coeff * throttle - friction(v_prev, p);
    v_prev + p.sample_time * accel
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        x: 0.0,
        y: 0.0,
        z: 0.0,
        w: 1.0,
    };

    /// Intrinsic Z-Y-X composition: yaw, then pitch, then roll.
    pub fn from_euler(e: Euler) -> Self {
        let (sr, cr) = (e.roll / 2.0).sin_cos();
        let (sp, cp) = (e.pitch / 2.0).sin_cos();
        let (sy, cy) = (e.yaw / 2.0).sin_cos();
        Self {
            x: sr * cp * cy - cr * sp * sy,
            y: cr * sp * cy + sr * cp * sy,
            z: cr * cp * sy - sr * sp * cy,
            w: cr * cp * cy + sr * sp * sy,
        }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z + self.w * self.w).sqrt()
    }
}

/// Roll, pitch, yaw in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Euler {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    /// Rear-axle reference point in the world frame, m.
    pub position: [f64; 3],
    pub orientation: Quaternion,
    pub euler: Euler,
    pub lin_vel: [f64; 3],
    pub ang_vel: [f64; 3],
    /// Shared speed of the driven joints, rad/s.
    pub joint_speed: f64,
}

impl VehicleState {
    /// A resting vehicle on the ground plane at `(x, y)` with heading `yaw`.
    pub fn at_rest(x: f64, y: f64, yaw: f64) -> Self {
        let euler = Euler {
            roll: 0.0,
            pitch: 0.0,
            yaw: wrap_angle(yaw),
        };
        Self {
            position: [x, y, 0.0],
            orientation: Quaternion::from_euler(euler),
            euler,
            lin_vel: [0.0; 3],
            ang_vel: [0.0; 3],
            joint_speed: 0.0,
        }
    }

    pub fn yaw(&self) -> f64 {
        self.euler.yaw
    }

    pub fn ground_speed(&self, p: &VehicleParams) -> f64 {
        self.joint_speed * p.wheel_radius
    }
}

/// Advances the pose one step with the kinematic bicycle model using the
/// state's current joint speed. Roll, pitch and height are left untouched.
pub fn step_pose(s: &VehicleState, c: ControlInput, p: &VehicleParams) -> VehicleState {
    let dt = p.sample_time;
    let v = s.joint_speed * p.wheel_radius;
    let yaw = s.euler.yaw;
    let (sin_y, cos_y) = yaw.sin_cos();
    let x = s.position[0] + dt * v * cos_y;
    let y = s.position[1] + dt * v * sin_y;
    let yaw_step = dt * v * c.steer.tan() / p.wheelbase;
    let euler = Euler {
        yaw: wrap_angle(yaw + yaw_step),
        ..s.euler
    };
    VehicleState {
        position: [x, y, s.position[2]],
        orientation: Quaternion::from_euler(euler),
        euler,
        lin_vel: [(x - s.position[0]) / dt, (y - s.position[1]) / dt, 0.0],
        ang_vel: [0.0, 0.0, yaw_step / dt],
        joint_speed: s.joint_speed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> VehicleParams {
        VehicleParams::default()
    }

    #[test]
    fn throttle_clamp() {
        let p = params();
        let c = clamp_action(Action::new(-0.5, 0.0).unwrap(), &p);
        assert_eq!(c.throttle, 0.0);
        let c = clamp_action(Action::new(0.7, 0.0).unwrap(), &p);
        assert_eq!(c.throttle, 0.7);
    }

    #[test]
    fn steering_clamp() {
        let p = params();
        assert_eq!(p.delta_max, 0.6);
        let c = clamp_action(Action::new(0.0, 1.0).unwrap(), &p);
        assert_eq!(c.steer, 0.6);
        let c = clamp_action(Action::new(0.0, -3.0).unwrap(), &p);
        assert_eq!(c.steer, -0.6);
        let c = clamp_action(Action::new(0.0, 0.25).unwrap(), &p);
        assert_eq!(c.steer, 0.25);
    }

    #[test]
    fn non_finite_action_rejected() {
        assert_eq!(
            Action::new(f64::NAN, 0.0),
            Err(VehicleError::NonFiniteAction("throttle"))
        );
        assert_eq!(
            Action::new(0.0, f64::INFINITY),
            Err(VehicleError::NonFiniteAction("steer"))
        );
    }

    #[test]
    fn friction_values() {
        let p = params();
        assert_eq!(friction(0.0, &p), 0.0);
        assert!((friction(2.0, &p) - 0.24).abs() < 1e-15);
        assert!((friction(-1.0, &p) + 0.09).abs() < 1e-15);
    }

    #[test]
    fn joint_speed_steps() {
        let p = params();
        assert_eq!(step_joint_speed(0.0, 0.0, &p), 0.0);
        assert!((step_joint_speed(0.0, 1.0, &p) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn joint_speed_reaches_steady_state() {
        let p = params();
        let mut v = 0.0;
        loop {
            let next = step_joint_speed(v, 0.5, &p);
            if (next - v).abs() < 1e-9 {
                v = next;
                break;
            }
            v = next;
        }
        let expected = (-0.1 + (0.1f64 * 0.1 + 4.0 * 0.01 * 10.0).sqrt()) / (2.0 * 0.01);
        assert!((expected - 27.0156).abs() < 1e-4);
        assert!((v - expected).abs() < 1e-6);
        assert!((p.steady_state_joint_speed(0.5) - expected).abs() < 1e-12);
    }

    #[test]
    fn straight_line_step() {
        let mut p = params();
        p.sample_time = 0.1;
        let mut s = VehicleState::at_rest(0.0, 0.0, 0.0);
        s.joint_speed = 1.0 / p.wheel_radius;
        let next = step_pose(&s, ControlInput { throttle: 0.0, steer: 0.0 }, &p);
        assert!((next.position[0] - 0.1).abs() < 1e-15);
        assert_eq!(next.position[1], 0.0);
        assert_eq!(next.yaw(), 0.0);
    }

    #[test]
    fn zero_speed_is_identity() {
        let p = params();
        let s = VehicleState::at_rest(1.5, -2.0, 0.7);
        let next = step_pose(&s, ControlInput { throttle: 0.0, steer: 0.4 }, &p);
        assert_eq!(next.position, s.position);
        assert_eq!(next.yaw(), s.yaw());
    }

    #[test]
    fn constant_steer_traces_turning_circle() {
        let delta: f64 = 0.3;
        let radius = 0.32 / delta.tan();
        assert!((radius - 1.0345).abs() < 1e-4);
        let mut deviations = Vec::new();
        for dt in [1e-2, 1e-3] {
            let p = VehicleParams {
                sample_time: dt,
                ..params()
            };
            let mut s = VehicleState::at_rest(0.0, 0.0, 0.0);
            s.joint_speed = 1.0 / p.wheel_radius;
            let center = (0.0, radius);
            let steps = (2.0 * std::f64::consts::PI * radius / dt).ceil() as usize;
            let mut worst = 0.0f64;
            for _ in 0..steps {
                s = step_pose(&s, ControlInput { throttle: 0.0, steer: delta }, &p);
                let r = (s.position[0] - center.0).hypot(s.position[1] - center.1);
                worst = worst.max((r - radius).abs());
            }
            deviations.push(worst);
        }
        assert!(deviations[0] < 0.02, "{deviations:?}");
        assert!(deviations[1] < deviations[0] / 5.0, "{deviations:?}");
    }

    #[test]
    fn half_steps_converge_at_second_order() {
        // Two half steps vs one full step differ by O(dt^2); estimate the order
        // from the ratio of discrepancies at successive step halvings.
        let base = params();
        let gap = |dt: f64| {
            let full = VehicleParams { sample_time: dt, ..base.clone() };
            let half = VehicleParams { sample_time: dt / 2.0, ..base.clone() };
            let v0 = 5.0;
            let one = step_joint_speed(v0, 0.8, &full);
            let two = step_joint_speed(step_joint_speed(v0, 0.8, &half), 0.8, &half);
            (one - two).abs()
        };
        let order = (gap(0.02) / gap(0.01)).log2();
        assert!(order >= 1.9, "measured order {order}");
    }

    proptest! {
        #[test]
        fn control_ranges_hold(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            let p = params();
            let c = clamp_action(Action::new(a, b).unwrap(), &p);
            prop_assert!((0.0..=1.0).contains(&c.throttle));
            prop_assert!((p.delta_min..=p.delta_max).contains(&c.steer));
        }

        #[test]
        fn clamp_is_idempotent(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            let p = params();
            let once = clamp_action(Action::new(a, b).unwrap(), &p);
            let twice = clamp_action(Action::new(once.throttle, once.steer).unwrap(), &p);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn straight_steps_keep_heading(yaw in -3.1f64..3.1, v in 0.0f64..50.0) {
            let p = params();
            let mut s = VehicleState::at_rest(0.3, -0.2, yaw);
            s.joint_speed = v;
            let next = step_pose(&s, ControlInput { throttle: 1.0, steer: 0.0 }, &p);
            prop_assert_eq!(next.yaw(), s.yaw());
        }

        #[test]
        fn steady_state_convergence_is_monotone(
            c_d in 0.001f64..0.05, c_r in 0.0f64..0.5, c_t in 1.0f64..40.0, t in 0.05f64..1.0,
        ) {
            let p = VehicleParams {
                drag_coeff: c_d, rolling_coeff: c_r, throttle_coeff: c_t, ..params()
            };
            let target = p.steady_state_joint_speed(t);
            prop_assume!(p.sample_time * (c_r + 2.0 * c_d * target) < 1.0);
            let mut v = 0.0;
            for _ in 0..200_000 {
                let next = step_joint_speed(v, t, &p);
                prop_assert!(next >= v);
                if next == v { break; }
                v = next;
            }
            prop_assert!((v - target).abs() < 1e-6);
        }
    }
}

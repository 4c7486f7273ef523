//! Ideal (noise-free) sensors read off the vehicle state and the scene.

mod camera;
mod lidar;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vehicle::{Euler, Quaternion, VehicleState};

pub use camera::{camera_render, Camera, CameraConfig, CameraFrame};
pub use lidar::{
    fan_offsets, lidar_ray_endpoints, lidar_ray_origin, lidar_scan, LidarConfig, LidarMode, LidarScan,
};

#[derive(Debug, Error, PartialEq)]
pub enum SensorError {
    #[error("quaternion norm {0} is not within 1e-6 of 1")]
    NonUnitQuaternion(f64),
    #[error("invalid camera config: {0}")]
    Camera(&'static str),
    #[error("invalid lidar config: {0}")]
    Lidar(&'static str),
}

const UNIT_TOLERANCE: f64 = 1e-6;

/// Intrinsic Z-Y-X Euler angles of a unit quaternion. Yaw lies in
/// (-pi, pi] and pitch in [-pi/2, pi/2].
pub fn quat_to_euler(q: Quaternion) -> Result<Euler, SensorError> {
    let n = q.norm();
    if n.is_nan() || (n - 1.0).abs() > UNIT_TOLERANCE {
        return Err(SensorError::NonUnitQuaternion(n));
    }
    let Quaternion { x, y, z, w } = q;
    let roll = (2.0 * (w * x + y * z)).atan2(1.0 - 2.0 * (x * x + y * y));
    let pitch = (2.0 * (w * y - z * x)).clamp(-1.0, 1.0).asin();
    let mut yaw = (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z));
    if yaw == -std::f64::consts::PI {
        yaw = std::f64::consts::PI;
    }
    Ok(Euler { roll, pitch, yaw })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsReading {
    pub position: [f64; 3],
    pub orientation: Quaternion,
    pub euler: Euler,
}

pub fn gps_read(s: &VehicleState) -> GpsReading {
    GpsReading {
        position: s.position,
        orientation: s.orientation,
        euler: quat_to_euler(s.orientation).expect("vehicle orientation is kept unit-norm"),
    }
}

/// Linear and angular velocities of one step, kept to difference against.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Velocities {
    pub lin: [f64; 3],
    pub ang: [f64; 3],
}

impl From<&VehicleState> for Velocities {
    fn from(s: &VehicleState) -> Self {
        Self {
            lin: s.lin_vel,
            ang: s.ang_vel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuReading {
    pub lin_vel: [f64; 3],
    pub ang_vel: [f64; 3],
    pub lin_acc: [f64; 3],
    pub ang_acc: [f64; 3],
}

/// Velocities plus accelerations finite-differenced against the previous
/// step. With no previous step the accelerations are zero.
pub fn imu_read(s: &VehicleState, prev: Option<&Velocities>, sample_time: f64) -> ImuReading {
    let diff = |cur: [f64; 3], old: [f64; 3]| std::array::from_fn(|i| (cur[i] - old[i]) / sample_time);
    let (lin_acc, ang_acc) = match prev {
        Some(p) => (diff(s.lin_vel, p.lin), diff(s.ang_vel, p.ang)),
        None => ([0.0; 3], [0.0; 3]),
    };
    ImuReading {
        lin_vel: s.lin_vel,
        ang_vel: s.ang_vel,
        lin_acc,
        ang_acc,
    }
}

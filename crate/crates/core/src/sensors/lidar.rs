use serde::{Deserialize, Serialize};

use super::SensorError;
use crate::geom::Vec2;
use crate::scene::{Hit, Ray, RayCaster};
use crate::vehicle::{VehicleParams, VehicleState};

/// How the body-frame LiDAR mount offset is carried into the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LidarMode {
    /// `x = x_A + x_L cos(psi)`, `y = y_A + y_L sin(psi)`: each mount
    /// coordinate is scaled by one trigonometric factor.
    #[default]
    PaperLiteral,
    /// Planar rotation of the mount offset by the heading.
    RigidTransform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LidarConfig {
    pub n_rays: usize,
    /// Angle spanned by the fan, rad.
    pub fov: f64,
    pub r_max: f64,
    pub mode: LidarMode,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self {
            n_rays: 36,
            fov: std::f64::consts::FRAC_PI_2,
            r_max: 10.0,
            mode: LidarMode::PaperLiteral,
        }
    }
}

impl LidarConfig {
    pub fn validate(&self) -> Result<(), SensorError> {
        if self.n_rays == 0 {
            return Err(SensorError::Lidar("n_rays must be at least 1"));
        }
        if !(self.fov > 0.0 && self.fov <= std::f64::consts::TAU) {
            return Err(SensorError::Lidar("fov must lie in (0, 2*pi]"));
        }
        if !(self.r_max.is_finite() && self.r_max > 0.0) {
            return Err(SensorError::Lidar("r_max must be finite and > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LidarScan {
    pub origin: [f64; 3],
    pub ranges: Vec<f64>,
    pub hits: Vec<Option<Hit>>,
    /// Smallest range; misses count as `r_max`.
    pub min_range: f64,
}

/// World position of the ray origin for the given mount offset.
pub fn lidar_ray_origin(s: &VehicleState, p: &VehicleParams, mode: LidarMode) -> [f64; 3] {
    let [mx, my, mz] = p.lidar_mount;
    let [x, y, z] = s.position;
    let (sin_y, cos_y) = s.yaw().sin_cos();
    match mode {
        LidarMode::PaperLiteral => [mx * cos_y + x, my * sin_y + y, mz + z],
        LidarMode::RigidTransform => [
            x + mx * cos_y - my * sin_y,
            y + mx * sin_y + my * cos_y,
            mz + z,
        ],
    }
}

/// Endpoint offsets of the fan relative to the ray origin. Ray `k` (1-based)
/// points along bearing `(beta - yaw) + fov * k / n`, measured so that the
/// offset is `r_max * (sin b, cos b)`.
pub fn fan_offsets(yaw: f64, cfg: &LidarConfig, mount_yaw: f64) -> Vec<Vec2> {
    let n = cfg.n_rays as f64;
    (1..=cfg.n_rays)
        .map(|k| {
            let bearing = (mount_yaw - yaw) + cfg.fov * (k as f64 / n);
            let (s, c) = bearing.sin_cos();
            Vec2::new(cfg.r_max * s, cfg.r_max * c)
        })
        .collect()
}

/// World endpoints of the `n` rays, fanned out from the ray origin.
pub fn lidar_ray_endpoints(s: &VehicleState, p: &VehicleParams, cfg: &LidarConfig) -> Vec<Vec2> {
    let [ox, oy, _] = lidar_ray_origin(s, p, cfg.mode);
    let origin = Vec2::new(ox, oy);
    fan_offsets(s.yaw(), cfg, p.lidar_mount_yaw)
        .into_iter()
        .map(|off| origin + off)
        .collect()
}

pub fn lidar_scan<C: RayCaster + ?Sized>(
    caster: &C,
    s: &VehicleState,
    p: &VehicleParams,
    cfg: &LidarConfig,
) -> LidarScan {
    let origin3 = lidar_ray_origin(s, p, cfg.mode);
    let origin = Vec2::new(origin3[0], origin3[1]);
    let mut ranges = Vec::with_capacity(cfg.n_rays);
    let mut hits = Vec::with_capacity(cfg.n_rays);
    for off in fan_offsets(s.yaw(), cfg, p.lidar_mount_yaw) {
        let hit = Ray::new(origin, origin + off).and_then(|ray| caster.cast(&ray));
        let range = match hit {
            Some(h) => {
                let (dx, dy) = (h.position.x - origin.x, h.position.y - origin.y);
                (dx * dx + dy * dy).sqrt().min(cfg.r_max)
            }
            None => cfg.r_max,
        };
        ranges.push(range);
        hits.push(hit);
    }
    let min_range = ranges.iter().copied().fold(cfg.r_max, f64::min);
    LidarScan {
        origin: origin3,
        ranges,
        hits,
        min_range,
    }
}

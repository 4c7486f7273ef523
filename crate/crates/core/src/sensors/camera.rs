use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::SensorError;
use crate::scene::{cast_3d, Ray3, Scene};
use crate::vehicle::VehicleState;

pub const BACKGROUND_RGB: [f64; 3] = [0.53, 0.81, 0.92];

type Mat4 = [[f64; 4]; 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraConfig {
    /// Eye position in the body frame, m.
    pub eye_offset: [f64; 3],
    /// Vertical field of view, rad.
    pub fov_y: f64,
    pub aspect: f64,
    pub near: f64,
    pub far: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            eye_offset: [0.1, 0.0, 0.2],
            fov_y: std::f64::consts::FRAC_PI_3,
            aspect: 1.0,
            near: 0.05,
            far: 50.0,
            width: 64,
            height: 64,
        }
    }
}

impl CameraConfig {
    pub fn validate(&self) -> Result<(), SensorError> {
        if self.width == 0 || self.height == 0 {
            return Err(SensorError::Camera("resolution must be non-zero"));
        }
        if !(self.near > 0.0 && self.near < self.far && self.far.is_finite()) {
            return Err(SensorError::Camera("need 0 < near < far"));
        }
        if !(self.fov_y > 0.0 && self.fov_y < std::f64::consts::PI) {
            return Err(SensorError::Camera("fov_y must lie in (0, pi)"));
        }
        if !(self.aspect.is_finite() && self.aspect > 0.0) {
            return Err(SensorError::Camera("aspect must be > 0"));
        }
        if !self.eye_offset.iter().all(|v| v.is_finite()) {
            return Err(SensorError::Camera("eye offset must be finite"));
        }
        Ok(())
    }
}

/// A pinhole camera rigidly mounted on the vehicle, looking along the
/// heading with +z up.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    cfg: CameraConfig,
    eye: [f64; 3],
    view: Mat4,
    projection: Mat4,
}

impl Camera {
    pub fn new(cfg: &CameraConfig, s: &VehicleState) -> Result<Self, SensorError> {
        cfg.validate()?;
        let yaw = s.yaw();
        let (sin_y, cos_y) = yaw.sin_cos();
        let [ox, oy, oz] = cfg.eye_offset;
        let eye = [
            s.position[0] + ox * cos_y - oy * sin_y,
            s.position[1] + ox * sin_y + oy * cos_y,
            s.position[2] + oz,
        ];
        let target = [eye[0] + cos_y, eye[1] + sin_y, eye[2]];
        Ok(Self {
            cfg: cfg.clone(),
            eye,
            view: look_at(eye, target, [0.0, 0.0, 1.0]),
            projection: perspective(cfg.fov_y, cfg.aspect, cfg.near, cfg.far),
        })
    }

    pub fn eye(&self) -> [f64; 3] {
        self.eye
    }

    pub fn view_matrix(&self) -> Mat4 {
        self.view
    }

    pub fn projection_matrix(&self) -> Mat4 {
        self.projection
    }

    /// World-space ray through the centre of pixel `(col, row)`, row 0 at the
    /// top, obtained by unprojecting the pixel's near-plane point.
    pub fn pixel_ray(&self, col: usize, row: usize) -> Ray3 {
        let w = self.cfg.width as f64;
        let h = self.cfg.height as f64;
        let ndc_x = 2.0 * (col as f64 + 0.5) / w - 1.0;
        let ndc_y = 1.0 - 2.0 * (row as f64 + 0.5) / h;
        let near = self.cfg.near;
        let eye_dir = [
            ndc_x * near / self.projection[0][0],
            ndc_y * near / self.projection[1][1],
            -near,
        ];
        // The view rotation is orthonormal: its transpose maps eye to world.
        let v = &self.view;
        let mut dir = [0.0; 3];
        for (i, d) in dir.iter_mut().enumerate() {
            *d = v[0][i] * eye_dir[0] + v[1][i] * eye_dir[1] + v[2][i] * eye_dir[2];
        }
        let len = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        Ray3 {
            origin: self.eye,
            dir: dir.map(|c| c / len),
            t_min: self.cfg.near,
            t_max: self.cfg.far,
        }
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = dot(a, a).sqrt();
    a.map(|c| c / n)
}

/// Right-handed look-at view matrix (camera looks down its -z axis).
fn look_at(eye: [f64; 3], target: [f64; 3], up: [f64; 3]) -> Mat4 {
    let f = normalize(sub(target, eye));
    let s = normalize(cross(f, up));
    let u = cross(s, f);
    [
        [s[0], s[1], s[2], -dot(s, eye)],
        [u[0], u[1], u[2], -dot(u, eye)],
        [-f[0], -f[1], -f[2], dot(f, eye)],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

fn perspective(fov_y: f64, aspect: f64, near: f64, far: f64) -> Mat4 {
    let f = 1.0 / (fov_y / 2.0).tan();
    [
        [f / aspect, 0.0, 0.0, 0.0],
        [0.0, f, 0.0, 0.0],
        [0.0, 0.0, (far + near) / (near - far), 2.0 * far * near / (near - far)],
        [0.0, 0.0, -1.0, 0.0],
    ]
}

/// Row-major image buffers, top row first.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraFrame {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<[f64; 3]>,
    /// Distance along each pixel ray to the first surface; `far` when
    /// nothing is hit.
    pub depth: Vec<f64>,
    /// Obstacle id per pixel, 0 for background.
    pub seg: Vec<u32>,
}

impl CameraFrame {
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    /// Binary PPM (P6), 8 bits per channel.
    pub fn write_ppm<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self
            .rgb
            .iter()
            .flat_map(|px| px.map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8))
            .collect();
        w.write_all(&bytes)
    }

    pub fn write_depth_csv<W: Write>(&self, w: W) -> io::Result<()> {
        write_grid(w, self.width, &self.depth)
    }

    pub fn write_seg_csv<W: Write>(&self, w: W) -> io::Result<()> {
        write_grid(w, self.width, &self.seg)
    }
}

fn write_grid<W: Write, T: std::fmt::Display>(mut w: W, width: usize, values: &[T]) -> io::Result<()> {
    for row in values.chunks(width) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Renders RGB, depth and segmentation by casting one ray per pixel against
/// the obstacles extruded to their heights. Obstacles are drawn in flat
/// color.
pub fn camera_render(scene: &Scene, s: &VehicleState, cfg: &CameraConfig) -> Result<CameraFrame, SensorError> {
    let camera = Camera::new(cfg, s)?;
    let n = cfg.width * cfg.height;
    let mut frame = CameraFrame {
        width: cfg.width,
        height: cfg.height,
        rgb: Vec::with_capacity(n),
        depth: Vec::with_capacity(n),
        seg: Vec::with_capacity(n),
    };
    for row in 0..cfg.height {
        for col in 0..cfg.width {
            match cast_3d(scene, &camera.pixel_ray(col, row)) {
                Some(hit) => {
                    let color = scene
                        .obstacle(hit.obstacle_id)
                        .map(|o| o.color)
                        .unwrap_or(BACKGROUND_RGB);
                    frame.rgb.push(color);
                    frame.depth.push(hit.t);
                    frame.seg.push(hit.obstacle_id);
                }
                None => {
                    frame.rgb.push(BACKGROUND_RGB);
                    frame.depth.push(cfg.far);
                    frame.seg.push(0);
                }
            }
        }
    }
    Ok(frame)
}

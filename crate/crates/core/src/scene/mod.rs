//! Planar world geometry.
//!
//! A [`Scene`] is a rectangle of ground enclosed by four boundary walls and
//! populated with cylinders and oriented boxes. Every obstacle is extruded
//! vertically from the ground to its `height`; the planar ray caster ignores
//! height while the camera uses it.

mod bvh;
mod cast;
mod document;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec2;

pub use bvh::SpatialIndex;
pub use cast::{cast_3d, ray_cast, Hit, Ray, Ray3, RayCaster, SolidHit};
pub use document::parse_scene;

/// Half thickness of the synthesized boundary walls.
pub const BOUNDARY_WALL_HALF_THICKNESS: f64 = 0.1;
pub const BOUNDARY_WALL_HEIGHT: f64 = 1.0;
pub const BOUNDARY_TAG: &str = "boundary";

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("obstacle {index}: {message}")]
    Field { index: usize, message: String },
    #[error("duplicate obstacle id {0}")]
    DuplicateId(u32),
    #[error("obstacle id 0 is reserved for background")]
    ReservedId,
    #[error("obstacle {id}: {field} must be strictly positive, got {value}")]
    NonPositive {
        id: u32,
        field: &'static str,
        value: f64,
    },
    #[error("obstacle {id}: {field} must be finite")]
    NonFinite { id: u32, field: &'static str },
    #[error("obstacle {id}: color components must lie in [0, 1]")]
    Color { id: u32 },
    #[error("inverted bounds: need xmin < xmax and ymin < ymax")]
    InvertedBounds,
    #[error("scene has too many obstacles to assign boundary wall ids")]
    IdOverflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Bounds {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Self {
        Self {
            xmin,
            xmax,
            ymin,
            ymax,
        }
    }

    /// Square bounds centered on the origin with the given side length.
    pub fn square(side: f64) -> Self {
        let h = side / 2.0;
        Self::new(-h, h, -h, h)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x > self.xmin && p.x < self.xmax && p.y > self.ymin && p.y < self.ymax
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn depth(&self) -> f64 {
        self.ymax - self.ymin
    }

    fn validate(&self) -> Result<(), SceneError> {
        let finite = [self.xmin, self.xmax, self.ymin, self.ymax]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.xmin >= self.xmax || self.ymin >= self.ymax {
            return Err(SceneError::InvertedBounds);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Cylinder { radius: f64 },
    /// Oriented box; `yaw` rotates the local x axis counter-clockwise.
    Box { half_extents: Vec2, yaw: f64 },
    Wall { half_extents: Vec2, yaw: f64 },
}

impl Shape {
    pub fn kind(&self) -> &'static str {
        match self {
            Shape::Cylinder { .. } => "cylinder",
            Shape::Box { .. } => "box",
            Shape::Wall { .. } => "wall",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub id: u32,
    pub shape: Shape,
    pub center: Vec2,
    pub height: f64,
    pub tag: String,
    pub color: [f64; 3],
}

impl Obstacle {
    pub fn cylinder(id: u32, center: Vec2, radius: f64, height: f64) -> Self {
        Self {
            id,
            shape: Shape::Cylinder { radius },
            center,
            height,
            tag: String::new(),
            color: [0.5, 0.5, 0.5],
        }
    }

    pub fn oriented_box(id: u32, center: Vec2, half_extents: Vec2, yaw: f64, height: f64) -> Self {
        Self {
            id,
            shape: Shape::Box { half_extents, yaw },
            center,
            height,
            tag: String::new(),
            color: [0.5, 0.5, 0.5],
        }
    }

    pub fn wall(id: u32, center: Vec2, half_extents: Vec2, yaw: f64, height: f64) -> Self {
        Self {
            id,
            shape: Shape::Wall { half_extents, yaw },
            center,
            height,
            tag: String::new(),
            color: [0.5, 0.5, 0.5],
        }
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = tag.into();
        self
    }

    pub fn with_color(mut self, color: [f64; 3]) -> Self {
        self.color = color;
        self
    }

    /// Signed distance from `p` to the obstacle footprint boundary; negative
    /// inside.
    pub fn signed_distance(&self, p: Vec2) -> f64 {
        match self.shape {
            Shape::Cylinder { radius } => (p - self.center).norm() - radius,
            Shape::Box { half_extents, yaw } | Shape::Wall { half_extents, yaw } => {
                let local = (p - self.center).rotated(-yaw);
                let qx = local.x.abs() - half_extents.x;
                let qy = local.y.abs() - half_extents.y;
                let outside = Vec2::new(qx.max(0.0), qy.max(0.0)).norm();
                outside + qx.max(qy).min(0.0)
            }
        }
    }

    /// Axis-aligned bounding box of the footprint as `(min, max)`.
    pub fn aabb(&self) -> (Vec2, Vec2) {
        let ext = match self.shape {
            Shape::Cylinder { radius } => Vec2::new(radius, radius),
            Shape::Box { half_extents, yaw } | Shape::Wall { half_extents, yaw } => {
                let (s, c) = yaw.sin_cos();
                Vec2::new(
                    c.abs() * half_extents.x + s.abs() * half_extents.y,
                    s.abs() * half_extents.x + c.abs() * half_extents.y,
                )
            }
        };
        (self.center - ext, self.center + ext)
    }

    fn validate(&self) -> Result<(), SceneError> {
        let id = self.id;
        if id == 0 {
            return Err(SceneError::ReservedId);
        }
        if !self.center.is_finite() {
            return Err(SceneError::NonFinite { id, field: "center" });
        }
        let positive = |field: &'static str, value: f64| {
            if !value.is_finite() {
                Err(SceneError::NonFinite { id, field })
            } else if value <= 0.0 {
                Err(SceneError::NonPositive { id, field, value })
            } else {
                Ok(())
            }
        };
        match self.shape {
            Shape::Cylinder { radius } => positive("radius", radius)?,
            Shape::Box { half_extents, yaw } | Shape::Wall { half_extents, yaw } => {
                positive("sx", half_extents.x)?;
                positive("sy", half_extents.y)?;
                if !yaw.is_finite() {
                    return Err(SceneError::NonFinite { id, field: "yaw" });
                }
            }
        }
        positive("height", self.height)?;
        if !self
            .color
            .iter()
            .all(|c| c.is_finite() && (0.0..=1.0).contains(c))
        {
            return Err(SceneError::Color { id });
        }
        Ok(())
    }
}

/// A validated, enclosed planar world.
///
/// The obstacle list holds the caller's obstacles in their original order,
/// followed by the four synthesized boundary walls (west, east, south, north)
/// whose ids continue after the largest caller id.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    name: String,
    bounds: Bounds,
    obstacles: Vec<Obstacle>,
    user_count: usize,
}

impl Scene {
    pub fn new(
        name: impl Into<String>,
        bounds: Bounds,
        obstacles: Vec<Obstacle>,
    ) -> Result<Self, SceneError> {
        bounds.validate()?;
        let mut seen = std::collections::HashSet::with_capacity(obstacles.len());
        for o in &obstacles {
            o.validate()?;
            if !seen.insert(o.id) {
                return Err(SceneError::DuplicateId(o.id));
            }
        }
        let max_id = obstacles.iter().map(|o| o.id).max().unwrap_or(0);
        if max_id > u32::MAX - 4 {
            return Err(SceneError::IdOverflow);
        }
        let user_count = obstacles.len();
        let mut obstacles = obstacles;
        obstacles.extend(boundary_walls(&bounds, max_id + 1));
        Ok(Self {
            name: name.into(),
            bounds,
            obstacles,
            user_count,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    /// All obstacles including the boundary walls.
    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    /// Obstacles supplied at construction, without the boundary walls.
    pub fn user_obstacles(&self) -> &[Obstacle] {
        &self.obstacles[..self.user_count]
    }

    pub fn obstacle(&self, id: u32) -> Option<&Obstacle> {
        self.obstacles.iter().find(|o| o.id == id)
    }

    /// Distance from `p` to the nearest obstacle boundary (negative when `p`
    /// is inside some obstacle).
    pub fn clearance(&self, p: Vec2) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.signed_distance(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Returns a copy of this scene shifted by `offset`.
    pub fn translated(&self, offset: Vec2) -> Scene {
        let b = self.bounds;
        let bounds = Bounds::new(
            b.xmin + offset.x,
            b.xmax + offset.x,
            b.ymin + offset.y,
            b.ymax + offset.y,
        );
        let obstacles = self
            .user_obstacles()
            .iter()
            .cloned()
            .map(|mut o| {
                o.center = o.center + offset;
                o
            })
            .collect();
        Scene::new(self.name.clone(), bounds, obstacles).expect("translation preserves validity")
    }

    /// Returns a copy rotated counter-clockwise about the origin.
    pub fn rotated(&self, angle: f64) -> Scene {
        let obstacles = self
            .user_obstacles()
            .iter()
            .cloned()
            .map(|mut o| {
                o.center = o.center.rotated(angle);
                o.shape = match o.shape {
                    Shape::Box { half_extents, yaw } => Shape::Box {
                        half_extents,
                        yaw: yaw + angle,
                    },
                    Shape::Wall { half_extents, yaw } => Shape::Wall {
                        half_extents,
                        yaw: yaw + angle,
                    },
                    c => c,
                };
                o
            })
            .collect();
        // Axis-aligned boundary walls cannot follow a rotation, so grow the
        // bounds to cover the rotated rectangle.
        let b = self.bounds;
        let corners = [
            Vec2::new(b.xmin, b.ymin),
            Vec2::new(b.xmax, b.ymin),
            Vec2::new(b.xmin, b.ymax),
            Vec2::new(b.xmax, b.ymax),
        ]
        .map(|c| c.rotated(angle));
        let xs = corners.iter().map(|c| c.x);
        let ys = corners.iter().map(|c| c.y);
        let bounds = Bounds::new(
            xs.clone().fold(f64::INFINITY, f64::min),
            xs.fold(f64::NEG_INFINITY, f64::max),
            ys.clone().fold(f64::INFINITY, f64::min),
            ys.fold(f64::NEG_INFINITY, f64::max),
        );
        Scene::new(self.name.clone(), bounds, obstacles).expect("rotation preserves validity")
    }
}

fn boundary_walls(b: &Bounds, first_id: u32) -> [Obstacle; 4] {
    let t = BOUNDARY_WALL_HALF_THICKNESS;
    let cx = (b.xmin + b.xmax) / 2.0;
    let cy = (b.ymin + b.ymax) / 2.0;
    let half_w = b.width() / 2.0 + 2.0 * t;
    let half_d = b.depth() / 2.0 + 2.0 * t;
    let wall = |offset: u32, center: Vec2, half_extents: Vec2| {
        Obstacle::wall(first_id + offset, center, half_extents, 0.0, BOUNDARY_WALL_HEIGHT)
            .with_tag(BOUNDARY_TAG)
            .with_color([0.6, 0.6, 0.6])
    };
    [
        wall(0, Vec2::new(b.xmin - t, cy), Vec2::new(t, half_d)),
        wall(1, Vec2::new(b.xmax + t, cy), Vec2::new(t, half_d)),
        wall(2, Vec2::new(cx, b.ymin - t), Vec2::new(half_w, t)),
        wall(3, Vec2::new(cx, b.ymax + t), Vec2::new(half_w, t)),
    ]
}

use crate::geom::Vec2;

use super::{Obstacle, Scene, Shape};

/// A finite segment from `origin` to `endpoint`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    origin: Vec2,
    endpoint: Vec2,
}

impl Ray {
    /// Returns `None` when the endpoints coincide or are not finite.
    pub fn new(origin: Vec2, endpoint: Vec2) -> Option<Self> {
        (origin.is_finite() && endpoint.is_finite() && origin != endpoint)
            .then_some(Self { origin, endpoint })
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    pub fn endpoint(&self) -> Vec2 {
        self.endpoint
    }

    pub fn direction(&self) -> Vec2 {
        self.endpoint - self.origin
    }

    pub fn translated(&self, offset: Vec2) -> Ray {
        Ray {
            origin: self.origin + offset,
            endpoint: self.endpoint + offset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub position: Vec2,
    pub obstacle_id: u32,
    /// Euclidean distance from the ray origin to `position`.
    pub distance: f64,
}

/// Anything that can answer nearest-hit queries against a scene.
pub trait RayCaster {
    fn cast(&self, ray: &Ray) -> Option<Hit>;
}

impl RayCaster for Scene {
    fn cast(&self, ray: &Ray) -> Option<Hit> {
        ray_cast(self, ray)
    }
}

/// Nearest intersection of the segment with any obstacle boundary, scanning
/// every obstacle. Equal distances resolve to the lowest id.
pub fn ray_cast(scene: &Scene, ray: &Ray) -> Option<Hit> {
    let mut best = Candidate::NONE;
    for o in scene.obstacles() {
        best.offer(o, ray);
    }
    best.into_hit(ray)
}

/// Running best hit while scanning obstacles.
#[derive(Clone, Copy)]
pub(super) struct Candidate {
    pub(super) t: f64,
    id: u32,
}

impl Candidate {
    pub(super) const NONE: Candidate = Candidate {
        t: f64::INFINITY,
        id: 0,
    };

    pub(super) fn offer(&mut self, o: &Obstacle, ray: &Ray) {
        if let Some(t) = segment_param(o, ray.origin, ray.direction()) {
            if t < self.t || (t == self.t && o.id < self.id) {
                self.t = t;
                self.id = o.id;
            }
        }
    }

    pub(super) fn into_hit(self, ray: &Ray) -> Option<Hit> {
        if self.id == 0 {
            return None;
        }
        let position = ray.origin + ray.direction() * self.t;
        let d = position - ray.origin;
        Some(Hit {
            position,
            obstacle_id: self.id,
            distance: (d.x * d.x + d.y * d.y).sqrt(),
        })
    }
}

/// Parameter in `[0, 1]` of the first boundary crossing of the segment
/// `origin + t * dir`, if any. A segment starting inside the footprint
/// reports its exit point.
fn segment_param(o: &Obstacle, origin: Vec2, dir: Vec2) -> Option<f64> {
    let (enter, exit) = footprint_interval(o, origin, dir)?;
    let t = if enter >= 0.0 { enter } else { exit };
    (0.0..=1.0).contains(&t).then_some(t)
}

/// Closed parameter interval over which the infinite line `origin + t * dir`
/// lies inside the obstacle footprint.
pub(super) fn footprint_interval(o: &Obstacle, origin: Vec2, dir: Vec2) -> Option<(f64, f64)> {
    match o.shape {
        Shape::Cylinder { radius } => circle_interval(o.center, radius, origin, dir),
        Shape::Box { half_extents, yaw } | Shape::Wall { half_extents, yaw } => {
            box_interval(o.center, half_extents, yaw, origin, dir)
        }
    }
}

fn circle_interval(center: Vec2, radius: f64, origin: Vec2, dir: Vec2) -> Option<(f64, f64)> {
    let oc = origin - center;
    let a = dir.norm_sq();
    if a == 0.0 {
        return (oc.norm_sq() <= radius * radius).then_some((f64::NEG_INFINITY, f64::INFINITY));
    }
    let half_b = oc.dot(dir);
    let c = oc.norm_sq() - radius * radius;
    let disc = half_b * half_b - a * c;
    // Tangent rays (disc == 0) count as hits.
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    // Cancellation-free pair of roots.
    let q = if half_b >= 0.0 { -(half_b + sq) } else { -half_b + sq };
    if q == 0.0 {
        // Origin on the circle with the ray tangent to it.
        return Some((0.0, 0.0));
    }
    let (t1, t2) = (q / a, c / q);
    Some((t1.min(t2), t1.max(t2)))
}

fn box_interval(
    center: Vec2,
    half: Vec2,
    yaw: f64,
    origin: Vec2,
    dir: Vec2,
) -> Option<(f64, f64)> {
    let p = (origin - center).rotated(-yaw);
    let d = dir.rotated(-yaw);
    let mut enter = f64::NEG_INFINITY;
    let mut exit = f64::INFINITY;
    for (pi, di, hi) in [(p.x, d.x, half.x), (p.y, d.y, half.y)] {
        if di == 0.0 {
            if pi.abs() > hi {
                return None;
            }
            continue;
        }
        let mut t0 = (-hi - pi) / di;
        let mut t1 = (hi - pi) / di;
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        enter = enter.max(t0);
        exit = exit.min(t1);
    }
    (enter <= exit).then_some((enter, exit))
}

/// A ray in 3-D with a unit direction, clipped to `[t_min, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray3 {
    pub origin: [f64; 3],
    pub dir: [f64; 3],
    pub t_min: f64,
    pub t_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolidHit {
    pub t: f64,
    pub obstacle_id: u32,
}

/// First surface hit of a 3-D ray against the obstacles extruded from the
/// ground plane (z = 0) up to their heights. Brute force over all obstacles.
pub fn cast_3d(scene: &Scene, ray: &Ray3) -> Option<SolidHit> {
    let origin = Vec2::new(ray.origin[0], ray.origin[1]);
    let dir = Vec2::new(ray.dir[0], ray.dir[1]);
    let mut best: Option<SolidHit> = None;
    for o in scene.obstacles() {
        let Some((xy_in, xy_out)) = footprint_interval(o, origin, dir) else {
            continue;
        };
        let Some((z_in, z_out)) = slab_interval(ray.origin[2], ray.dir[2], 0.0, o.height) else {
            continue;
        };
        let enter = xy_in.max(z_in);
        let exit = xy_out.min(z_out);
        if enter > exit {
            continue;
        }
        let t = if enter >= ray.t_min { enter } else { exit };
        if t < ray.t_min || t > ray.t_max {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => t < b.t || (t == b.t && o.id < b.obstacle_id),
        };
        if better {
            best = Some(SolidHit {
                t,
                obstacle_id: o.id,
            });
        }
    }
    best
}

fn slab_interval(p: f64, d: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    if d == 0.0 {
        return (lo..=hi)
            .contains(&p)
            .then_some((f64::NEG_INFINITY, f64::INFINITY));
    }
    let t0 = (lo - p) / d;
    let t1 = (hi - p) / d;
    Some((t0.min(t1), t0.max(t1)))
}

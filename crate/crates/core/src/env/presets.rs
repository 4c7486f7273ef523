//! Procedurally generated preset worlds.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geom::Vec2;
use crate::scene::{Bounds, Obstacle, Scene};

/// Radius around the origin kept free of generated obstacles.
const SPAWN_DISC_RADIUS: f64 = 2.5;
const MIN_GAP: f64 = 1.0;
const PLACEMENT_ATTEMPTS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    #[default]
    Outdoor20,
    Outdoor50,
    Urban20,
    Urban50,
    Oval,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Outdoor20,
        Preset::Outdoor50,
        Preset::Urban20,
        Preset::Urban50,
        Preset::Oval,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Outdoor20 => "outdoor20",
            Preset::Outdoor50 => "outdoor50",
            Preset::Urban20 => "urban20",
            Preset::Urban50 => "urban50",
            Preset::Oval => "oval",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown preset '{0}' (expected one of outdoor20, outdoor50, urban20, urban50, oval)")]
pub struct UnknownPreset(pub String);

impl FromStr for Preset {
    type Err = UnknownPreset;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| UnknownPreset(s.to_string()))
    }
}

/// Where spawn poses may be drawn and how they are oriented.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpawnRegion {
    /// Anywhere with enough clearance, uniformly random heading.
    Free,
    /// Inside a rounded-rectangle annulus: points whose distance to the core
    /// rectangle `[-hx, hx] x [-hy, hy]` lies strictly between `inner` and
    /// `outer`. Headings follow the counter-clockwise direction of travel.
    Track {
        core_half: Vec2,
        inner: f64,
        outer: f64,
    },
}

impl SpawnRegion {
    pub fn contains(&self, p: Vec2) -> bool {
        match *self {
            SpawnRegion::Free => true,
            SpawnRegion::Track {
                core_half,
                inner,
                outer,
            } => {
                let d = (p - clamp_to_core(p, core_half)).norm();
                d > inner && d < outer
            }
        }
    }

    /// Nominal heading at `p`, or `None` when the heading is free.
    pub fn heading(&self, p: Vec2) -> Option<f64> {
        match *self {
            SpawnRegion::Free => None,
            SpawnRegion::Track { core_half, .. } => {
                let n = p - clamp_to_core(p, core_half);
                Some(n.y.atan2(n.x) + FRAC_PI_2)
            }
        }
    }
}

fn clamp_to_core(p: Vec2, half: Vec2) -> Vec2 {
    Vec2::new(p.x.clamp(-half.x, half.x), p.y.clamp(-half.y, half.y))
}

/// Builds the preset world for `seed`. The same pair always yields the same
/// scene.
pub fn build_preset(preset: Preset, seed: u64) -> (Scene, SpawnRegion) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match preset {
        Preset::Outdoor20 => (outdoor(preset, 20.0, 14, &mut rng), SpawnRegion::Free),
        Preset::Outdoor50 => (outdoor(preset, 50.0, 80, &mut rng), SpawnRegion::Free),
        Preset::Urban20 => (urban(preset, 20.0, 4, 5, &mut rng), SpawnRegion::Free),
        Preset::Urban50 => (urban(preset, 50.0, 22, 30, &mut rng), SpawnRegion::Free),
        Preset::Oval => oval(),
    }
}

/// Rejection placement of discs: keeps generated obstacles clear of the spawn
/// disc, the boundary and each other.
struct Placer {
    bounds: Bounds,
    placed: Vec<(Vec2, f64)>,
}

impl Placer {
    fn try_place(&mut self, rng: &mut ChaCha8Rng, radius: f64) -> Option<Vec2> {
        let b = self.bounds;
        let margin = radius + MIN_GAP;
        let c = Vec2::new(
            rng.random_range(b.xmin + margin..b.xmax - margin),
            rng.random_range(b.ymin + margin..b.ymax - margin),
        );
        if c.norm() < SPAWN_DISC_RADIUS + radius {
            return None;
        }
        if self
            .placed
            .iter()
            .any(|&(p, r)| (p - c).norm() < r + radius + MIN_GAP)
        {
            return None;
        }
        self.placed.push((c, radius));
        Some(c)
    }
}

fn outdoor(preset: Preset, side: f64, count: usize, rng: &mut ChaCha8Rng) -> Scene {
    let bounds = Bounds::square(side);
    let mut placer = Placer {
        bounds,
        placed: Vec::new(),
    };
    let mut obstacles = Vec::with_capacity(count);
    for _ in 0..PLACEMENT_ATTEMPTS {
        if obstacles.len() == count {
            break;
        }
        let tree = rng.random_bool(0.6);
        let (radius, height, tag, color) = if tree {
            let g = rng.random_range(0.35..0.6);
            (
                rng.random_range(0.15..0.35),
                rng.random_range(3.0..6.0),
                "tree",
                [0.15, g, 0.12],
            )
        } else {
            let v = rng.random_range(0.35..0.55);
            (
                rng.random_range(0.4..1.0),
                rng.random_range(0.3..1.2),
                "boulder",
                [v, v, v * 0.95],
            )
        };
        if let Some(c) = placer.try_place(rng, radius) {
            let id = obstacles.len() as u32 + 1;
            obstacles.push(
                Obstacle::cylinder(id, c, radius, height)
                    .with_tag(tag)
                    .with_color(color),
            );
        }
    }
    Scene::new(preset.name(), bounds, obstacles).expect("generated scenes are valid")
}

fn urban(preset: Preset, side: f64, buildings: usize, vehicles: usize, rng: &mut ChaCha8Rng) -> Scene {
    let bounds = Bounds::square(side);
    let mut placer = Placer {
        bounds,
        placed: Vec::new(),
    };
    let mut obstacles = Vec::with_capacity(buildings + vehicles);
    let mut next_id = 1u32;
    let mut placed_buildings = 0;
    for _ in 0..PLACEMENT_ATTEMPTS {
        if placed_buildings == buildings {
            break;
        }
        let half = Vec2::new(rng.random_range(1.0..2.5), rng.random_range(1.0..2.5));
        let height = rng.random_range(4.0..12.0);
        let tint = rng.random_range(0.55..0.8);
        if let Some(c) = placer.try_place(rng, half.norm()) {
            obstacles.push(
                Obstacle::oriented_box(next_id, c, half, 0.0, height)
                    .with_tag("building")
                    .with_color([tint, tint * 0.9, tint * 0.75]),
            );
            next_id += 1;
            placed_buildings += 1;
        }
    }
    let mut placed_vehicles = 0;
    for _ in 0..PLACEMENT_ATTEMPTS {
        if placed_vehicles == vehicles {
            break;
        }
        let scale = rng.random_range(0.9..1.1);
        let half = Vec2::new(0.9 * scale, 0.4 * scale);
        let yaw = rng.random_range(-PI..PI);
        let color = [
            rng.random_range(0.1..0.9),
            rng.random_range(0.1..0.9),
            rng.random_range(0.1..0.9),
        ];
        if let Some(c) = placer.try_place(rng, half.norm()) {
            obstacles.push(
                Obstacle::oriented_box(next_id, c, half, yaw, 1.4)
                    .with_tag("vehicle")
                    .with_color(color),
            );
            next_id += 1;
            placed_vehicles += 1;
        }
    }
    Scene::new(preset.name(), bounds, obstacles).expect("generated scenes are valid")
}

pub const OVAL_CORE_HALF: Vec2 = Vec2::new(6.0, 1.0);
pub const OVAL_INNER_RADIUS: f64 = 2.0;
pub const OVAL_OUTER_RADIUS: f64 = 6.0;
const OVAL_WALL_HALF_THICKNESS: f64 = 0.1;
const OVAL_ARC_SEGMENTS: usize = 8;

/// Two concentric rounded rectangles, both offsets of the same core
/// rectangle, forming a closed 4 m wide track.
fn oval() -> (Scene, SpawnRegion) {
    let mut obstacles = Vec::new();
    let outer = rounded_rect_walls(OVAL_CORE_HALF, OVAL_OUTER_RADIUS);
    let inner = rounded_rect_walls(OVAL_CORE_HALF, OVAL_INNER_RADIUS);
    for (center, half_len, yaw) in outer {
        let id = obstacles.len() as u32 + 1;
        obstacles.push(
            Obstacle::wall(id, center, Vec2::new(half_len, OVAL_WALL_HALF_THICKNESS), yaw, 0.5)
                .with_tag("barrier")
                .with_color([0.8, 0.1, 0.1]),
        );
    }
    for (center, half_len, yaw) in inner {
        let id = obstacles.len() as u32 + 1;
        obstacles.push(
            Obstacle::wall(id, center, Vec2::new(half_len, OVAL_WALL_HALF_THICKNESS), yaw, 0.5)
                .with_tag("barrier")
                .with_color([0.95, 0.95, 0.95]),
        );
    }
    let bounds = Bounds::new(-13.0, 13.0, -8.0, 8.0);
    let scene = Scene::new(Preset::Oval.name(), bounds, obstacles).expect("oval preset is valid");
    let region = SpawnRegion::Track {
        core_half: OVAL_CORE_HALF,
        inner: OVAL_INNER_RADIUS,
        outer: OVAL_OUTER_RADIUS,
    };
    (scene, region)
}

/// Wall segments `(center, half_length, yaw)` approximating the boundary of
/// the core rectangle grown by `radius`.
fn rounded_rect_walls(half: Vec2, radius: f64) -> Vec<(Vec2, f64, f64)> {
    let mut walls = Vec::new();
    let overlap = OVAL_WALL_HALF_THICKNESS;
    // Straights: top, left, bottom, right.
    walls.push((Vec2::new(0.0, half.y + radius), half.x + overlap, 0.0));
    walls.push((Vec2::new(-half.x - radius, 0.0), half.y + overlap, FRAC_PI_2));
    walls.push((Vec2::new(0.0, -half.y - radius), half.x + overlap, 0.0));
    walls.push((Vec2::new(half.x + radius, 0.0), half.y + overlap, FRAC_PI_2));
    let corners = [
        (Vec2::new(half.x, half.y), 0.0),
        (Vec2::new(-half.x, half.y), FRAC_PI_2),
        (Vec2::new(-half.x, -half.y), PI),
        (Vec2::new(half.x, -half.y), 3.0 * FRAC_PI_2),
    ];
    for (c, start) in corners {
        let step = FRAC_PI_2 / OVAL_ARC_SEGMENTS as f64;
        for k in 0..OVAL_ARC_SEGMENTS {
            let a0 = start + step * k as f64;
            let a1 = a0 + step;
            let p0 = c + Vec2::new(a0.cos(), a0.sin()) * radius;
            let p1 = c + Vec2::new(a1.cos(), a1.sin()) * radius;
            let chord = p1 - p0;
            walls.push((
                (p0 + p1) * 0.5,
                chord.norm() / 2.0 + overlap,
                chord.y.atan2(chord.x),
            ));
        }
    }
    walls
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Shape;

    #[test]
    fn presets_are_deterministic() {
        for p in Preset::ALL {
            assert_eq!(build_preset(p, 42).0, build_preset(p, 42).0, "{p}");
        }
        assert_ne!(
            build_preset(Preset::Outdoor20, 1).0,
            build_preset(Preset::Outdoor20, 2).0
        );
    }

    #[test]
    fn preset_bounds() {
        assert_eq!(build_preset(Preset::Outdoor20, 42).0.bounds(), Bounds::new(-10.0, 10.0, -10.0, 10.0));
        assert_eq!(build_preset(Preset::Outdoor50, 42).0.bounds(), Bounds::new(-25.0, 25.0, -25.0, 25.0));
        assert_eq!(build_preset(Preset::Urban20, 42).0.bounds(), Bounds::square(20.0));
        assert_eq!(build_preset(Preset::Urban50, 42).0.bounds(), Bounds::square(50.0));
    }

    #[test]
    fn generated_obstacles_respect_spawn_disc_and_tags() {
        let (s, _) = build_preset(Preset::Outdoor20, 7);
        assert_eq!(s.user_obstacles().len(), 14);
        for o in s.user_obstacles() {
            assert!(o.tag == "tree" || o.tag == "boulder");
            assert!(o.signed_distance(Vec2::ZERO) > SPAWN_DISC_RADIUS - 1e-9);
        }
        let (s, _) = build_preset(Preset::Urban50, 7);
        assert!(s.user_obstacles().iter().any(|o| o.tag == "building"));
        assert!(s.user_obstacles().iter().any(|o| o.tag == "vehicle"));
    }

    #[test]
    fn oval_inner_loop_inside_outer() {
        let (scene, region) = build_preset(Preset::Oval, 0);
        let walls = scene.user_obstacles();
        let n = walls.len() / 2;
        let corners = |o: &Obstacle| {
            let Shape::Wall { half_extents: h, yaw } = o.shape else {
                panic!("oval is built from walls")
            };
            [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)]
                .map(|(sx, sy)| o.center + Vec2::new(sx * h.x, sy * h.y).rotated(yaw))
        };
        let core_dist = |p: Vec2| (p - clamp_to_core(p, OVAL_CORE_HALF)).norm();
        let outer_min = walls[..n]
            .iter()
            .flat_map(corners)
            .map(core_dist)
            .fold(f64::INFINITY, f64::min);
        let inner_max = walls[n..]
            .iter()
            .flat_map(corners)
            .map(core_dist)
            .fold(0.0, f64::max);
        assert!(inner_max < outer_min, "{inner_max} vs {outer_min}");
        // Track centre line is in the spawn region with clearance to spare.
        let centre = Vec2::new(0.0, 1.0 + 4.0);
        assert!(region.contains(centre));
        assert!(scene.clearance(centre) > 1.5);
        assert!(!region.contains(Vec2::ZERO));
    }

    #[test]
    fn track_heading_is_counter_clockwise() {
        let (_, region) = build_preset(Preset::Oval, 0);
        // Top straight: travel towards -x.
        let h = region.heading(Vec2::new(0.0, 5.0)).unwrap();
        assert!((h - PI).abs() < 1e-12);
        // Right straight: travel towards +y.
        let h = region.heading(Vec2::new(10.0, 0.0)).unwrap();
        assert!((h - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn unknown_preset_name() {
        let err = "nosuch".parse::<Preset>().unwrap_err();
        assert!(err.to_string().contains("unknown preset"));
        assert_eq!("urban50".parse::<Preset>().unwrap(), Preset::Urban50);
    }
}

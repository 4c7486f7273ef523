use crate::geom::Vec2;

use super::cast::{Candidate, Hit, Ray, RayCaster};
use super::{Obstacle, Scene};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    min: Vec2,
    max: Vec2,
    kind: NodeKind,
}

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf { start: usize, end: usize },
    Inner { left: usize, right: usize },
}

/// Bounding-volume hierarchy over obstacle footprints.
///
/// Casts through the index test exactly the per-obstacle intersection used by
/// [`super::ray_cast`] and apply the same (distance, id) ordering, so results
/// are bitwise identical to the brute-force scan.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    obstacles: Vec<Obstacle>,
    nodes: Vec<Node>,
}

impl SpatialIndex {
    pub fn build(scene: &Scene) -> Self {
        let mut obstacles = scene.obstacles().to_vec();
        let mut nodes = Vec::new();
        if !obstacles.is_empty() {
            let n = obstacles.len();
            build_node(&mut obstacles, 0, n, &mut nodes);
        }
        Self { obstacles, nodes }
    }

    pub fn len(&self) -> usize {
        self.obstacles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obstacles.is_empty()
    }
}

impl RayCaster for SpatialIndex {
    fn cast(&self, ray: &Ray) -> Option<Hit> {
        if self.nodes.is_empty() {
            return None;
        }
        let origin = ray.origin();
        let dir = ray.direction();
        let inv = Vec2::new(1.0 / dir.x, 1.0 / dir.y);
        let mut best = Candidate::NONE;
        let mut stack = vec![0usize];
        while let Some(idx) = stack.pop() {
            let node = &self.nodes[idx];
            match slab_entry(node.min, node.max, origin, inv) {
                // Keep nodes whose entry equals the best distance: they may
                // hold an equally near obstacle with a lower id.
                Some(t) if t <= best.t => {}
                _ => continue,
            }
            match node.kind {
                NodeKind::Leaf { start, end } => {
                    for o in &self.obstacles[start..end] {
                        best.offer(o, ray);
                    }
                }
                NodeKind::Inner { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        best.into_hit(ray)
    }
}

/// Entry parameter of the segment `origin + t * dir`, `t` in `[0, 1]`, into an
/// axis-aligned box, or `None` when they do not meet.
fn slab_entry(min: Vec2, max: Vec2, origin: Vec2, inv: Vec2) -> Option<f64> {
    let mut enter = 0.0f64;
    let mut exit = 1.0f64;
    for (o, inv_d, lo, hi) in [(origin.x, inv.x, min.x, max.x), (origin.y, inv.y, min.y, max.y)] {
        if inv_d.is_infinite() {
            if o < lo || o > hi {
                return None;
            }
            continue;
        }
        let t0 = (lo - o) * inv_d;
        let t1 = (hi - o) * inv_d;
        enter = enter.max(t0.min(t1));
        exit = exit.min(t0.max(t1));
    }
    // The footprint test is exact while the box test rounds; pad so a
    // boundary-grazing obstacle is never culled.
    (enter <= exit + 1e-9).then_some((enter - 1e-9).max(0.0))
}

fn build_node(obstacles: &mut [Obstacle], start: usize, end: usize, nodes: &mut Vec<Node>) -> usize {
    let (mut min, mut max) = (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for o in &obstacles[start..end] {
        let (lo, hi) = o.aabb();
        min = Vec2::new(min.x.min(lo.x), min.y.min(lo.y));
        max = Vec2::new(max.x.max(hi.x), max.y.max(hi.y));
    }
    // Inflate slightly so rounding in the aabb never excludes a boundary hit.
    let pad = 1e-9 * (1.0 + min.x.abs().max(min.y.abs()).max(max.x.abs()).max(max.y.abs()));
    let min = min - Vec2::new(pad, pad);
    let max = max + Vec2::new(pad, pad);

    let idx = nodes.len();
    nodes.push(Node {
        min,
        max,
        kind: NodeKind::Leaf { start, end },
    });
    if end - start <= LEAF_SIZE {
        return idx;
    }

    let slice = &mut obstacles[start..end];
    let extent = max - min;
    let axis_x = extent.x >= extent.y;
    let key = |o: &Obstacle| if axis_x { o.center.x } else { o.center.y };
    slice.sort_by(|a, b| key(a).total_cmp(&key(b)).then(a.id.cmp(&b.id)));
    let mid = start + (end - start) / 2;
    let left = build_node(obstacles, start, mid, nodes);
    let right = build_node(obstacles, mid, end, nodes);
    nodes[idx].kind = NodeKind::Inner { left, right };
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{ray_cast, Bounds};

    #[test]
    fn empty_index_misses() {
        let index = SpatialIndex {
            obstacles: vec![],
            nodes: vec![],
        };
        let ray = Ray::new(Vec2::ZERO, Vec2::new(1.0, 1.0)).unwrap();
        assert!(index.cast(&ray).is_none());
    }

    #[test]
    fn single_obstacle_matches_bruteforce_exactly() {
        let scene = Scene::new(
            "one",
            Bounds::square(40.0),
            vec![Obstacle::cylinder(1, Vec2::new(3.0, 4.0), 1.5, 1.0)],
        )
        .unwrap();
        let index = SpatialIndex::build(&scene);
        for k in 0..360 {
            let a = (k as f64).to_radians();
            let ray = Ray::new(Vec2::new(-1.0, 0.5), Vec2::new(-1.0, 0.5) + Vec2::new(a.cos(), a.sin()) * 30.0).unwrap();
            let (brute, fast) = (ray_cast(&scene, &ray), index.cast(&ray));
            assert_eq!(brute.map(|h| h.position.x.to_bits()), fast.map(|h| h.position.x.to_bits()));
            assert_eq!(brute.map(|h| h.position.y.to_bits()), fast.map(|h| h.position.y.to_bits()));
            assert_eq!(brute.map(|h| h.obstacle_id), fast.map(|h| h.obstacle_id));
        }
    }
}

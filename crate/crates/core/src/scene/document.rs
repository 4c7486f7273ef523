//! JSON scene documents.
//!
//! ```json
//! {
//!   "name": "yard",
//!   "bounds": {"xmin": -10, "xmax": 10, "ymin": -10, "ymax": 10},
//!   "obstacles": [
//!     {"id": 1, "kind": "cylinder", "x": 2, "y": 3, "radius": 0.5,
//!      "height": 4, "tag": "tree", "color": [0.1, 0.5, 0.1]}
//!   ]
//! }
//! ```
//!
//! Boxes and walls take `sx`, `sy` (half extents) and an optional `yaw`.
//! Boundary walls are implied by `bounds` and never written out.

use serde::{Deserialize, Serialize};

use super::{Bounds, Obstacle, Scene, SceneError, Shape};
use crate::geom::Vec2;

const DEFAULT_HEIGHT: f64 = 1.0;
const DEFAULT_COLOR: [f64; 3] = [0.5, 0.5, 0.5];

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDoc {
    name: String,
    bounds: Bounds,
    #[serde(default)]
    obstacles: Vec<ObstacleDoc>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum KindDoc {
    Cylinder,
    Box,
    Wall,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObstacleDoc {
    id: u32,
    kind: KindDoc,
    x: f64,
    y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    yaw: Option<f64>,
    #[serde(default)]
    height: Option<f64>,
    #[serde(default)]
    tag: Option<String>,
    #[serde(default)]
    color: Option<[f64; 3]>,
}

impl ObstacleDoc {
    fn into_obstacle(self, index: usize) -> Result<Obstacle, SceneError> {
        let field_err = |message: String| SceneError::Field { index, message };
        let shape = match self.kind {
            KindDoc::Cylinder => {
                for (name, v) in [("sx", self.sx), ("sy", self.sy), ("yaw", self.yaw)] {
                    if v.is_some() {
                        return Err(field_err(format!("field `{name}` is not valid for a cylinder")));
                    }
                }
                let radius = self
                    .radius
                    .ok_or_else(|| field_err("cylinder requires `radius`".into()))?;
                Shape::Cylinder { radius }
            }
            KindDoc::Box | KindDoc::Wall => {
                if self.radius.is_some() {
                    return Err(field_err("field `radius` is only valid for a cylinder".into()));
                }
                let (Some(sx), Some(sy)) = (self.sx, self.sy) else {
                    return Err(field_err("box and wall require `sx` and `sy`".into()));
                };
                let half_extents = Vec2::new(sx, sy);
                let yaw = self.yaw.unwrap_or(0.0);
                if matches!(self.kind, KindDoc::Box) {
                    Shape::Box { half_extents, yaw }
                } else {
                    Shape::Wall { half_extents, yaw }
                }
            }
        };
        Ok(Obstacle {
            id: self.id,
            shape,
            center: Vec2::new(self.x, self.y),
            height: self.height.unwrap_or(DEFAULT_HEIGHT),
            tag: self.tag.unwrap_or_default(),
            color: self.color.unwrap_or(DEFAULT_COLOR),
        })
    }

    fn from_obstacle(o: &Obstacle) -> Self {
        let (kind, radius, sx, sy, yaw) = match o.shape {
            Shape::Cylinder { radius } => (KindDoc::Cylinder, Some(radius), None, None, None),
            Shape::Box { half_extents, yaw } => (
                KindDoc::Box,
                None,
                Some(half_extents.x),
                Some(half_extents.y),
                Some(yaw),
            ),
            Shape::Wall { half_extents, yaw } => (
                KindDoc::Wall,
                None,
                Some(half_extents.x),
                Some(half_extents.y),
                Some(yaw),
            ),
        };
        Self {
            id: o.id,
            kind,
            x: o.center.x,
            y: o.center.y,
            radius,
            sx,
            sy,
            yaw,
            height: Some(o.height),
            tag: Some(o.tag.clone()),
            color: Some(o.color),
        }
    }
}

/// Parses and validates a scene document, synthesizing the boundary walls.
pub fn parse_scene(text: &str) -> Result<Scene, SceneError> {
    let doc: SceneDoc = serde_json::from_str(text).map_err(|e| SceneError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let obstacles = doc
        .obstacles
        .into_iter()
        .enumerate()
        .map(|(i, o)| o.into_obstacle(i))
        .collect::<Result<Vec<_>, _>>()?;
    Scene::new(doc.name, doc.bounds, obstacles)
}

impl Scene {
    /// Serializes the scene as a pretty-printed JSON document. Boundary walls
    /// are omitted; [`parse_scene`] recreates them from the bounds.
    pub fn to_document(&self) -> String {
        let doc = SceneDoc {
            name: self.name.clone(),
            bounds: self.bounds,
            obstacles: self
                .user_obstacles()
                .iter()
                .map(ObstacleDoc::from_obstacle)
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("scene documents always serialize");
        text.push('\n');
        text
    }
}

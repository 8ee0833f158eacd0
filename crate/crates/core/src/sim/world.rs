use serde::{Deserialize, Serialize};

use crate::geometry::{Aabb, Segment, Vec2};

/// Static obstacles: thin wall segments plus axis-aligned boxes, all inside `bounds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldGeometry {
    pub segments: Vec<Segment>,
    pub boxes: Vec<Aabb>,
    pub bounds: Aabb,
}

impl WorldGeometry {
    pub fn empty(bounds: Aabb) -> Self {
        Self {
            segments: Vec::new(),
            boxes: Vec::new(),
            bounds,
        }
    }

    /// A rectangular room whose four sides are wall segments on the bounds.
    pub fn walled_room(bounds: Aabb) -> Self {
        Self {
            segments: bounds.edges().to_vec(),
            boxes: Vec::new(),
            bounds,
        }
    }

    pub fn is_valid(&self) -> bool {
        let inside = |p: Vec2| p.is_finite() && self.bounds.contains(p);
        self.segments.iter().all(|s| inside(s.a) && inside(s.b))
            && self
                .boxes
                .iter()
                .all(|b| inside(b.min) && inside(b.max))
    }

    /// Distance from `p` to the nearest wall or box (zero inside a box).
    pub fn distance_to_point(&self, p: Vec2) -> f64 {
        let s = self
            .segments
            .iter()
            .map(|s| s.distance_to_point(p))
            .fold(f64::INFINITY, f64::min);
        self.boxes
            .iter()
            .map(|b| b.distance_to_point(p))
            .fold(s, f64::min)
    }

    /// Distance from a segment to the nearest wall or box.
    pub fn distance_to_segment(&self, seg: &Segment) -> f64 {
        let s = self
            .segments
            .iter()
            .map(|s| s.distance_to_segment(seg))
            .fold(f64::INFINITY, f64::min);
        self.boxes
            .iter()
            .map(|b| b.distance_to_segment(seg))
            .fold(s, f64::min)
    }
}

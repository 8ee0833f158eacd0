use serde::{Deserialize, Serialize};

use crate::geometry::{Segment, Vec2};

use super::PathPolyline;

/// Nearest point on the polyline: `(distance, arc length)`. Ties go to the larger arc length.
pub fn project_onto_path(path: &PathPolyline, p: Vec2) -> (f64, f64) {
    let pts = path.points();
    let cum = path.cumulative();
    if pts.len() == 1 {
        return (pts[0].distance(p), 0.0);
    }
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..pts.len() - 1 {
        let seg = Segment::new(pts[k], pts[k + 1]);
        let t = seg.project_param(p);
        let q = seg.a.lerp(seg.b, t);
        let d = q.distance(p);
        if d <= best.0 {
            best = (d, cum[k] + t * (cum[k + 1] - cum[k]));
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathMetrics {
    /// Change in distance from the path since the previous step.
    pub delta_deviation: f64,
    /// Change in arc-length progress since the previous step.
    pub delta_progress: f64,
    pub deviation: f64,
    pub progress: f64,
}

/// Per-episode memory of the previous deviation and progress.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathTracker {
    pub deviation: f64,
    pub progress: f64,
    pub ratchet: bool,
}

impl PathTracker {
    pub fn new(path: &PathPolyline, start: Vec2, ratchet: bool) -> Self {
        let (deviation, progress) = project_onto_path(path, start);
        Self {
            deviation,
            progress,
            ratchet,
        }
    }

    pub fn update(&mut self, path: &PathPolyline, ee: Vec2) -> PathMetrics {
        let (deviation, mut progress) = project_onto_path(path, ee);
        if self.ratchet {
            progress = progress.max(self.progress);
        }
        let m = PathMetrics {
            delta_deviation: deviation - self.deviation,
            delta_progress: progress - self.progress,
            deviation,
            progress,
        };
        self.deviation = deviation;
        self.progress = progress;
        m
    }
}

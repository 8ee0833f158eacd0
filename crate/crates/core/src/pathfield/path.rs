use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;

use super::{CellKind, GridField, PathError};

/// Polyline with cumulative arc length at each vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPolyline {
    points: Vec<Vec2>,
    cumulative: Vec<f64>,
}

impl PathPolyline {
    /// Builds the polyline, dropping consecutive duplicate points.
    pub fn new(points: Vec<Vec2>) -> Self {
        let mut kept: Vec<Vec2> = Vec::with_capacity(points.len());
        for p in points {
            if kept.last() != Some(&p) {
                kept.push(p);
            }
        }
        let mut cumulative = Vec::with_capacity(kept.len());
        let mut s = 0.0;
        for (k, p) in kept.iter().enumerate() {
            if k > 0 {
                s += kept[k - 1].distance(*p);
            }
            cumulative.push(s);
        }
        Self {
            points: kept,
            cumulative,
        }
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn total_length(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

const MAX_HALVINGS: usize = 8;
const STALL_RATIO: f64 = 1e-12;

/// Steepest descent on the bilinearly interpolated potential from `start`.
///
/// Steps are `h / 2` along the negative gradient and are accepted only if the
/// potential strictly drops, so sampled potentials along the path never
/// increase. A rejected step is halved; if that fails too, the path moves to
/// the lowest of the four surrounding cell centers, or else to the lowest
/// 4-neighbour of the current cell, which by the discrete maximum principle is
/// lower than the current point unless the field is flat.
/// The path ends at the goal cell center once it is within one cell of it.
pub fn extract_path(field: &GridField, start: Vec2) -> Result<PathPolyline, PathError> {
    let stalled = |p: Vec2| PathError::Stalled { x: p.x, y: p.y };
    let h = field.cell_size;
    let (gi, gj) = field.goal_cell;
    let goal = field.cell_center(gi, gj);
    let cap = 4.0 * 2.0 * h * (field.width + field.height) as f64;

    match field.cell_of(start) {
        Some((i, j)) if field.kind(i, j) != CellKind::Obstacle => {}
        _ => return Err(PathError::StartNotFree { x: start.x, y: start.y }),
    }

    let mut points = vec![start];
    let mut length = 0.0;
    let mut cur = start;
    let (mut value, _) = field.affinity_at(cur);
    if value <= 0.0 {
        return Err(stalled(cur));
    }

    loop {
        let (ci, cj) = field.cell_of(cur).ok_or(stalled(cur))?;
        if ci.abs_diff(gi) <= 1 && cj.abs_diff(gj) <= 1 {
            if cur != goal {
                points.push(goal);
            }
            break;
        }
        if length > cap {
            return Err(PathError::TooLong { cap });
        }

        let (_, grad) = field.affinity_at(cur);
        let g = grad.norm();
        let mut next = None;
        if g > STALL_RATIO * value {
            let dir = grad * (1.0 / g);
            let mut step = 0.5 * h;
            for _ in 0..=MAX_HALVINGS {
                let cand = cur + dir * step;
                if let Some((i, j)) = field.cell_of(cand) {
                    let (v, _) = field.affinity_at(cand);
                    if field.kind(i, j) != CellKind::Obstacle && v > value {
                        next = Some((cand, v));
                        break;
                    }
                }
                step *= 0.5;
            }
        } else if field
            .interpolation_corners(cur)
            .iter()
            .all(|&(i, j)| field.affinity(i, j) <= value)
        {
            // Flat neighbourhood: the far field underflowed.
            return Err(stalled(cur));
        }
        let (cand, v) = match next {
            Some(n) => n,
            None => {
                let best = |cells: &mut dyn Iterator<Item = (usize, usize)>| {
                    cells
                        .filter(|&(i, j)| field.kind(i, j) != CellKind::Obstacle)
                        .map(|(i, j)| (field.cell_center(i, j), field.affinity(i, j)))
                        .filter(|&(_, v)| v > value)
                        .max_by(|a, b| a.1.total_cmp(&b.1))
                };
                // In two-cell channels every corner can lie behind the descent.
                best(&mut field.interpolation_corners(cur).into_iter())
                    .or_else(|| best(&mut field.neighbors(ci, cj)))
                    .ok_or(stalled(cur))?
            }
        };
        length += cur.distance(cand);
        points.push(cand);
        cur = cand;
        value = v;
    }
    Ok(PathPolyline::new(points))
}

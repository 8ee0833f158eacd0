use crate::geometry::Vec2;
use crate::sim::WorldGeometry;

use super::PathError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Free,
    Obstacle,
    Goal,
}

/// Regular grid over the world, one ring of cells larger than the bounds on each side.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub origin: Vec2,
    pub cell_size: f64,
    pub width: usize,
    pub height: usize,
    pub kinds: Vec<CellKind>,
    /// `1 - potential`, row-major (`j * width + i`). Obstacles hold 0, the goal 1.
    pub(crate) affinity: Vec<f64>,
    pub goal_cell: (usize, usize),
}

impl GridField {
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    pub fn kind(&self, i: usize, j: usize) -> CellKind {
        self.kinds[self.index(i, j)]
    }

    /// Harmonic potential of a cell: 1 on obstacles, 0 at the goal.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        1.0 - self.affinity[self.index(i, j)]
    }

    pub fn values(&self) -> Vec<f64> {
        self.affinity.iter().map(|a| 1.0 - a).collect()
    }

    /// `1 - potential` at full relative precision.
    pub fn affinity(&self, i: usize, j: usize) -> f64 {
        self.affinity[self.index(i, j)]
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + (i as f64 + 0.5) * self.cell_size,
            self.origin.y + (j as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn cell_of(&self, p: Vec2) -> Option<(usize, usize)> {
        let fx = ((p.x - self.origin.x) / self.cell_size).floor();
        let fy = ((p.y - self.origin.y) / self.cell_size).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.width as f64 || fy >= self.height as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    pub fn free_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.height)
            .flat_map(move |j| (0..self.width).map(move |i| (i, j)))
            .filter(|&(i, j)| self.kind(i, j) == CellKind::Free)
    }

    /// 4-neighbours inside the grid.
    pub(crate) fn neighbors(&self, i: usize, j: usize) -> impl Iterator<Item = (usize, usize)> {
        let (w, h) = (self.width, self.height);
        [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)]
            .into_iter()
            .filter_map(move |(di, dj)| {
                let (ni, nj) = (i as i64 + di, j as i64 + dj);
                (ni >= 0 && nj >= 0 && (ni as usize) < w && (nj as usize) < h)
                    .then_some((ni as usize, nj as usize))
            })
    }

    /// Bilinear interpolation of the affinity over cell centers, with its gradient.
    pub(crate) fn affinity_at(&self, p: Vec2) -> (f64, Vec2) {
        let h = self.cell_size;
        let fx = (p.x - self.origin.x) / h - 0.5;
        let fy = (p.y - self.origin.y) / h - 0.5;
        let i0 = (fx.floor().max(0.0) as usize).min(self.width - 2);
        let j0 = (fy.floor().max(0.0) as usize).min(self.height - 2);
        let tx = (fx - i0 as f64).clamp(0.0, 1.0);
        let ty = (fy - j0 as f64).clamp(0.0, 1.0);
        let a = self.affinity(i0, j0);
        let b = self.affinity(i0 + 1, j0);
        let c = self.affinity(i0, j0 + 1);
        let d = self.affinity(i0 + 1, j0 + 1);
        let v = (1.0 - tx) * (1.0 - ty) * a + tx * (1.0 - ty) * b + (1.0 - tx) * ty * c + tx * ty * d;
        let gx = ((1.0 - ty) * (b - a) + ty * (d - c)) / h;
        let gy = ((1.0 - tx) * (c - a) + tx * (d - b)) / h;
        (v, Vec2::new(gx, gy))
    }

    /// The four cells whose centers surround `p`.
    pub(crate) fn interpolation_corners(&self, p: Vec2) -> [(usize, usize); 4] {
        let h = self.cell_size;
        let fx = (p.x - self.origin.x) / h - 0.5;
        let fy = (p.y - self.origin.y) / h - 0.5;
        let i0 = (fx.floor().max(0.0) as usize).min(self.width - 2);
        let j0 = (fy.floor().max(0.0) as usize).min(self.height - 2);
        [(i0, j0), (i0 + 1, j0), (i0, j0 + 1), (i0 + 1, j0 + 1)]
    }

    /// Potential at `p` by bilinear interpolation.
    pub fn potential_at(&self, p: Vec2) -> f64 {
        1.0 - self.affinity_at(p).0
    }
}

/// Marks cells whose centers lie within `inflation` of any wall or box as obstacles.
///
/// The grid extends one cell past the world bounds on every side and that
/// outer ring is always obstacle.
pub fn rasterize_world(
    world: &WorldGeometry,
    cell_size: f64,
    inflation: f64,
    goal: Vec2,
) -> Result<GridField, PathError> {
    if !(cell_size > 0.0 && cell_size.is_finite()) {
        return Err(PathError::InvalidCellSize(cell_size));
    }
    let b = world.bounds;
    let cells = |extent: f64| (extent / cell_size - 1e-9).ceil().max(1.0) as usize + 2;
    let width = cells(b.width());
    let height = cells(b.height());
    let origin = b.min - Vec2::new(cell_size, cell_size);

    let mut field = GridField {
        origin,
        cell_size,
        width,
        height,
        kinds: vec![CellKind::Obstacle; width * height],
        affinity: vec![0.0; width * height],
        goal_cell: (0, 0),
    };
    for j in 1..height - 1 {
        for i in 1..width - 1 {
            let c = field.cell_center(i, j);
            if world.distance_to_point(c) > inflation {
                let k = field.index(i, j);
                field.kinds[k] = CellKind::Free;
            }
        }
    }

    let (gi, gj) = field.cell_of(goal).ok_or(PathError::OutsideGrid {
        x: goal.x,
        y: goal.y,
    })?;
    if field.kind(gi, gj) == CellKind::Obstacle {
        return Err(PathError::GoalInObstacle {
            x: goal.x,
            y: goal.y,
        });
    }
    let k = field.index(gi, gj);
    field.kinds[k] = CellKind::Goal;
    field.affinity[k] = 1.0;
    field.goal_cell = (gi, gj);
    Ok(field)
}

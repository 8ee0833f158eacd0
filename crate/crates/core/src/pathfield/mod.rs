//! Harmonic potential field planning.
//!
//! The world is rasterized into free, obstacle and goal cells; Laplace's
//! equation is solved by successive over-relaxation with obstacles held at 1
//! and the goal at 0; the reference path is the steepest-descent streamline of
//! the bilinearly interpolated potential. [`PathTracker`] turns end-effector
//! motion into the per-step deviation and progress deltas used by the reward.
//!
//! Far from the goal a harmonic potential approaches 1 exponentially fast, so
//! the solver stores `1 - potential` (the "goal affinity"), which keeps full
//! relative precision where the potential itself would round to 1.

mod field;
mod path;
mod solver;
mod tracker;

pub use field::{rasterize_world, CellKind, GridField};
pub use path::{extract_path, PathPolyline};
pub use solver::{solve_harmonic, Convergence, SolveStats};
pub use tracker::{project_onto_path, PathMetrics, PathTracker};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;
use crate::sim::WorldGeometry;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("invalid cell size {0}")]
    InvalidCellSize(f64),
    #[error("goal ({x:.3}, {y:.3}) lies in an obstacle cell")]
    GoalInObstacle { x: f64, y: f64 },
    #[error("point ({x:.3}, {y:.3}) lies outside the grid")]
    OutsideGrid { x: f64, y: f64 },
    #[error("no free cell is adjacent to the goal")]
    GoalEnclosed,
    #[error("solver did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("start ({x:.3}, {y:.3}) is not in a free cell connected to the goal")]
    StartNotFree { x: f64, y: f64 },
    #[error("descent stalled at ({x:.3}, {y:.3}); re-solve at a tighter tolerance")]
    Stalled { x: f64, y: f64 },
    #[error("path exceeded the length cap of {cap:.1} m")]
    TooLong { cap: f64 },
}

/// Discretization and solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HpfConfig {
    pub cell_size: f64,
    /// SOR relaxation factor.
    pub omega: f64,
    pub tolerance: f64,
    pub max_iters: usize,
    /// Clamp progress to its running maximum (ablation switch).
    pub ratchet_progress: bool,
}

impl Default for HpfConfig {
    fn default() -> Self {
        Self {
            cell_size: 0.05,
            omega: 1.8,
            tolerance: 1e-10,
            max_iters: 200_000,
            ratchet_progress: false,
        }
    }
}

impl HpfConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.cell_size > 0.0) {
            v.push("cell_size: must be positive".into());
        }
        if !(self.omega > 0.0 && self.omega < 2.0) {
            v.push("omega: must lie in (0, 2)".into());
        }
        if !(self.tolerance > 0.0) {
            v.push("tolerance: must be positive".into());
        }
        if self.max_iters == 0 {
            v.push("max_iters: must be positive".into());
        }
        v
    }
}

/// Rasterize, solve and extract in one go.
///
/// A stalled descent means the far field was not resolved finely enough; the
/// field is then re-solved (warm-started, Gauss-Seidel) until every cell meets
/// a relative residual bound, which resolves it at any distance.
pub fn plan_path(
    world: &WorldGeometry,
    start: Vec2,
    goal: Vec2,
    inflation: f64,
    config: &HpfConfig,
) -> Result<PathPolyline, PathError> {
    let field = rasterize_world(world, config.cell_size, inflation, goal)?;
    let (field, _) = solve_harmonic(
        field,
        config.omega,
        Convergence::Absolute(config.tolerance),
        config.max_iters,
    )?;
    match extract_path(&field, start) {
        Err(PathError::Stalled { .. }) => {
            let (field, _) = solve_harmonic(
                field,
                1.0,
                Convergence::Relative(1e-6),
                config.max_iters,
            )?;
            extract_path(&field, start)
        }
        other => other,
    }
}

/// Whether the inflated free space connects `start` to `goal`.
///
/// A converged field has a descent path from every free cell connected to
/// the goal, so this is equivalent to planning succeeding, at flood-fill cost.
pub fn path_exists(
    world: &WorldGeometry,
    start: Vec2,
    goal: Vec2,
    inflation: f64,
    cell_size: f64,
) -> bool {
    let Ok(field) = rasterize_world(world, cell_size, inflation, goal) else {
        return false;
    };
    match field.cell_of(start) {
        Some(cell) => solver::connected(&field, cell),
        None => false,
    }
}

use std::collections::VecDeque;

use super::{CellKind, GridField, PathError};

/// Stopping rule on the 5-point Laplace residual of every free cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Convergence {
    /// `|mean(neighbours) - value| < tol`.
    Absolute(f64),
    /// `|mean(neighbours) - value| < tol * (1 - value)`; resolves the far field at any depth.
    ///
    /// Pair with plain Gauss-Seidel (`omega = 1`): over-relaxed sweeps keep
    /// rounding-level oscillations alive near the goal, and those swamp a far
    /// field that is many orders of magnitude smaller.
    Relative(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
    /// Free cells with no 4-connected route to the goal, turned into obstacles.
    pub sealed_cells: usize,
}

/// Successive over-relaxation with Dirichlet conditions (obstacles 1, goal 0).
///
/// Free cells that cannot reach the goal would otherwise sit at exactly 1;
/// they are reclassified as obstacles so every remaining free cell lies
/// strictly between 0 and 1. The returned field starts from whatever values
/// `field` holds, so an already-solved field is a valid warm start.
pub fn solve_harmonic(
    mut field: GridField,
    omega: f64,
    convergence: Convergence,
    max_iters: usize,
) -> Result<(GridField, SolveStats), PathError> {
    let (gi, gj) = field.goal_cell;
    if !field
        .neighbors(gi, gj)
        .any(|(i, j)| field.kind(i, j) == CellKind::Free)
    {
        return Err(PathError::GoalEnclosed);
    }
    let sealed_cells = seal_unreachable(&mut field);

    let w = field.width;
    let free: Vec<usize> = field
        .free_cells()
        .map(|(i, j)| field.index(i, j))
        .collect();

    let mut residual = f64::INFINITY;
    for iteration in 1..=max_iters {
        let a = &mut field.affinity;
        let mut sweep_residual = 0.0_f64;
        for &k in &free {
            let mean = 0.25 * (a[k - 1] + a[k + 1] + a[k - w] + a[k + w]);
            let r = mean - a[k];
            sweep_residual = sweep_residual.max(scaled(r, a[k], convergence));
            a[k] += omega * r;
        }
        if sweep_residual < bound(convergence) {
            residual = max_residual(&field, &free, convergence);
            if residual < bound(convergence) {
                return Ok((
                    field,
                    SolveStats {
                        iterations: iteration,
                        residual,
                        sealed_cells,
                    },
                ));
            }
        } else {
            residual = sweep_residual;
        }
    }
    Err(PathError::NotConverged {
        iterations: max_iters,
        residual,
    })
}

fn bound(c: Convergence) -> f64 {
    match c {
        Convergence::Absolute(t) | Convergence::Relative(t) => t,
    }
}

fn scaled(r: f64, affinity: f64, c: Convergence) -> f64 {
    match c {
        Convergence::Absolute(_) => r.abs(),
        Convergence::Relative(_) => {
            if affinity > 0.0 {
                r.abs() / affinity
            } else {
                f64::INFINITY
            }
        }
    }
}

fn max_residual(field: &GridField, free: &[usize], c: Convergence) -> f64 {
    let a = &field.affinity;
    let w = field.width;
    free.iter()
        .map(|&k| {
            let mean = 0.25 * (a[k - 1] + a[k + 1] + a[k - w] + a[k + w]);
            scaled(mean - a[k], a[k], c)
        })
        .fold(0.0, f64::max)
}

fn seal_unreachable(field: &mut GridField) -> usize {
    let mut seen = vec![false; field.kinds.len()];
    let (gi, gj) = field.goal_cell;
    let mut queue = VecDeque::from([(gi, gj)]);
    seen[field.index(gi, gj)] = true;
    while let Some((i, j)) = queue.pop_front() {
        let next: Vec<_> = field.neighbors(i, j).collect();
        for (ni, nj) in next {
            let k = field.index(ni, nj);
            if !seen[k] && field.kinds[k] == CellKind::Free {
                seen[k] = true;
                queue.push_back((ni, nj));
            }
        }
    }
    let mut sealed = 0;
    for k in 0..field.kinds.len() {
        if field.kinds[k] == CellKind::Free && !seen[k] {
            field.kinds[k] = CellKind::Obstacle;
            field.affinity[k] = 0.0;
            sealed += 1;
        }
    }
    sealed
}

/// Whether `start` and `goal` cells are 4-connected through free cells.
pub(crate) fn connected(field: &GridField, start: (usize, usize)) -> bool {
    let mut seen = vec![false; field.kinds.len()];
    let mut queue = VecDeque::from([start]);
    if field.kind(start.0, start.1) == CellKind::Obstacle {
        return false;
    }
    seen[field.index(start.0, start.1)] = true;
    while let Some((i, j)) = queue.pop_front() {
        if (i, j) == field.goal_cell {
            return true;
        }
        let next: Vec<_> = field.neighbors(i, j).collect();
        for (ni, nj) in next {
            let k = field.index(ni, nj);
            if !seen[k] && field.kinds[k] != CellKind::Obstacle {
                seen[k] = true;
                queue.push_back((ni, nj));
            }
        }
    }
    false
}

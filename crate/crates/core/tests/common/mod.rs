//! Independent reference implementations used by the integration tests.
//!
//! None of these call into the crate's geometry routines; they work on plain
//! coordinates so a shared bug cannot hide on both sides of a comparison.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::Rng;

use wbc::geometry::{Aabb, Pose2, Segment, Vec2};
use wbc::pathfield::{CellKind, GridField};
use wbc::sim::{RobotConfig, RobotState, WorldGeometry};

pub fn seg_point_distance(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

pub fn box_point_distance(min: (f64, f64), max: (f64, f64), p: (f64, f64)) -> f64 {
    let dx = (min.0 - p.0).max(0.0).max(p.0 - max.0);
    let dy = (min.1 - p.1).max(0.0).max(p.1 - max.1);
    (dx * dx + dy * dy).sqrt()
}

pub fn in_box(min: (f64, f64), max: (f64, f64), p: (f64, f64)) -> bool {
    p.0 >= min.0 && p.0 <= max.0 && p.1 >= min.1 && p.1 <= max.1
}

/// Unsigned distance from `p` to the nearest wall or box (0 inside a box).
pub fn world_point_distance(world: &WorldGeometry, p: (f64, f64)) -> f64 {
    let walls = world
        .segments
        .iter()
        .map(|s| seg_point_distance((s.a.x, s.a.y), (s.b.x, s.b.y), p));
    let boxes = world
        .boxes
        .iter()
        .map(|b| box_point_distance((b.min.x, b.min.y), (b.max.x, b.max.y), p));
    walls.chain(boxes).fold(f64::INFINITY, f64::min)
}

/// End-effector pose by multiplying homogeneous 3x3 transforms.
pub fn fk_matrix_oracle(config: &RobotConfig, state: &RobotState) -> (Vec<(f64, f64)>, (f64, f64, f64)) {
    let h = |theta: f64, tx: f64, ty: f64| {
        let (s, c) = theta.sin_cos();
        Matrix3::new(c, -s, tx, s, c, ty, 0.0, 0.0, 1.0)
    };
    let b = &state.base_pose;
    let mut t = h(b.theta, b.x, b.y) * h(0.0, config.arm_mount_offset.x, config.arm_mount_offset.y);
    let mut points = Vec::new();
    let origin = t * Vector3::new(0.0, 0.0, 1.0);
    points.push((origin.x, origin.y));
    let mut phi = b.theta;
    for (q, l) in state.joint_pos.iter().zip(&config.link_lengths) {
        t = t * h(*q, 0.0, 0.0) * h(0.0, *l, 0.0);
        phi += q;
        let p = t * Vector3::new(0.0, 0.0, 1.0);
        points.push((p.x, p.y));
    }
    let ee = *points.last().unwrap();
    (points, (ee.0, ee.1, phi))
}

/// Collision verdict from 1000 samples along every link spine.
pub fn point_sampling_collision(config: &RobotConfig, state: &RobotState, world: &WorldGeometry) -> bool {
    const SAMPLES: usize = 1000;
    let (joints, _) = fk_matrix_oracle(config, state);
    let base = (state.base_pose.x, state.base_pose.y);
    if world_point_distance(world, base) < config.base_radius {
        return true;
    }
    let r = config.link_capsule_radius;
    let spines: Vec<Vec<(f64, f64)>> = joints
        .windows(2)
        .map(|w| {
            (0..=SAMPLES)
                .map(|k| {
                    let t = k as f64 / SAMPLES as f64;
                    (w[0].0 + t * (w[1].0 - w[0].0), w[0].1 + t * (w[1].1 - w[0].1))
                })
                .collect()
        })
        .collect();
    for spine in &spines {
        if spine.iter().any(|&p| world_point_distance(world, p) < r) {
            return true;
        }
    }
    let dist = |p: (f64, f64), q: (f64, f64)| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt();
    for spine in spines.iter().skip(1) {
        if spine.iter().any(|&p| dist(p, base) < config.base_radius + r) {
            return true;
        }
    }
    for i in 0..spines.len() {
        for j in i + 2..spines.len() {
            let (a, b) = (&joints[j], &joints[j + 1]);
            if spines[i].iter().any(|&p| seg_point_distance(*a, *b, p) < 2.0 * r) {
                return true;
            }
        }
    }
    false
}

/// Whether the step from `p` to `q` crosses a wall or a box edge.
///
/// Box edges catch rays that only graze a corner between two samples.
fn crosses_wall(world: &WorldGeometry, p: (f64, f64), q: (f64, f64)) -> bool {
    let orient = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
    let walls = world.segments.iter().map(|s| ((s.a.x, s.a.y), (s.b.x, s.b.y)));
    let edges = world.boxes.iter().flat_map(|b| {
        let c = [(b.min.x, b.min.y), (b.max.x, b.min.y), (b.max.x, b.max.y), (b.min.x, b.max.y)];
        (0..4).map(move |k| (c[k], c[(k + 1) % 4]))
    });
    walls.chain(edges).any(|(a, b)| {
        let d1 = orient(a, b, p);
        let d2 = orient(a, b, q);
        let d3 = orient(p, q, a);
        let d4 = orient(p, q, b);
        d1 * d2 <= 0.0 && d3 * d4 <= 0.0 && (d1 != 0.0 || d2 != 0.0)
    })
}

/// Range along a ray by marching in 1e-4 m steps, reporting the first sample
/// inside a box or past a wall. Far from geometry the march skips ahead by
/// the (independently computed) clearance, which cannot jump over a hit.
pub fn marching_range(world: &WorldGeometry, origin: (f64, f64), angle: f64, max_range: f64) -> f64 {
    const STEP: f64 = 1e-4;
    let (dy, dx) = angle.sin_cos();
    let at = |t: f64| (origin.0 + t * dx, origin.1 + t * dy);
    let mut t = 0.0;
    let mut prev = at(0.0);
    loop {
        let clearance = world_point_distance(world, prev);
        let advance = if clearance > 10.0 * STEP {
            ((clearance - 5.0 * STEP) / STEP).floor() * STEP
        } else {
            STEP
        };
        let next_t = t + advance;
        if next_t >= max_range {
            let end = at(max_range);
            let hit_box = world
                .boxes
                .iter()
                .any(|b| in_box((b.min.x, b.min.y), (b.max.x, b.max.y), end));
            return if hit_box || crosses_wall(world, prev, end) {
                next_t.min(max_range)
            } else {
                max_range
            };
        }
        let p = at(next_t);
        let hit_box = world
            .boxes
            .iter()
            .any(|b| in_box((b.min.x, b.min.y), (b.max.x, b.max.y), p));
        if hit_box || crosses_wall(world, prev, p) {
            return next_t;
        }
        t = next_t;
        prev = p;
    }
}

/// Solves the 5-point Dirichlet problem of a rasterized field densely.
///
/// Returns the potential per cell (obstacle 1, goal 0), row-major.
pub fn dense_harmonic(field: &GridField) -> Vec<f64> {
    let (w, h) = (field.width, field.height);
    let idx = |i: usize, j: usize| j * w + i;
    let mut unknown = vec![usize::MAX; w * h];
    let mut n = 0;
    for j in 0..h {
        for i in 0..w {
            if field.kinds[idx(i, j)] == CellKind::Free {
                unknown[idx(i, j)] = n;
                n += 1;
            }
        }
    }
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for j in 0..h {
        for i in 0..w {
            let k = unknown[idx(i, j)];
            if k == usize::MAX {
                continue;
            }
            a[(k, k)] = 4.0;
            for (ni, nj) in [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)] {
                match field.kinds[idx(ni, nj)] {
                    CellKind::Free => a[(k, unknown[idx(ni, nj)])] = -1.0,
                    CellKind::Obstacle => rhs[k] += 1.0,
                    CellKind::Goal => {}
                }
            }
        }
    }
    let x = a.lu().solve(&rhs).expect("Dirichlet system is non-singular");
    (0..w * h)
        .map(|c| match field.kinds[c] {
            CellKind::Free => x[unknown[c]],
            CellKind::Obstacle => 1.0,
            CellKind::Goal => 0.0,
        })
        .collect()
}

/// A room of the given size with random axis-aligned boxes inside.
pub fn random_box_world<R: Rng>(rng: &mut R, size: (f64, f64), boxes: usize, max_box: f64) -> WorldGeometry {
    let bounds = Aabb::new(Vec2::new(0.0, 0.0), Vec2::new(size.0, size.1));
    let mut world = WorldGeometry::walled_room(bounds);
    for _ in 0..boxes {
        let w = rng.gen_range(0.05..max_box);
        let h = rng.gen_range(0.05..max_box);
        let x = rng.gen_range(0.0..size.0 - w);
        let y = rng.gen_range(0.0..size.1 - h);
        world.boxes.push(Aabb::new(Vec2::new(x, y), Vec2::new(x + w, y + h)));
    }
    world
}

pub fn random_state<R: Rng>(rng: &mut R, config: &RobotConfig, pose: Pose2) -> RobotState {
    let joints = config
        .joint_limits
        .iter()
        .map(|[lo, hi]| rng.gen_range(*lo..*hi))
        .collect();
    RobotState::at_rest(pose, joints)
}

/// Brute-force advantages: for each t, the discounted sum of TD residuals
/// until the end of its episode or of the slice.
pub fn brute_force_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let n = rewards.len();
    let v_next = |t: usize| if t + 1 < n { values[t + 1] } else { last_value };
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            for l in 0..n - t {
                let k = t + l;
                let live = if dones[k] { 0.0 } else { 1.0 };
                let delta = rewards[k] + gamma * v_next(k) * live - values[k];
                sum += (gamma * lambda).powi(l as i32) * delta;
                if dones[k] {
                    break;
                }
            }
            sum
        })
        .collect()
}

pub fn segment(a: (f64, f64), b: (f64, f64)) -> Segment {
    Segment::new(Vec2::new(a.0, a.1), Vec2::new(b.0, b.1))
}

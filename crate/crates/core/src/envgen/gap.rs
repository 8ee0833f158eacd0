use rand::Rng;

use crate::geometry::{Aabb, Pose2, Vec2};
use crate::pathfield::{plan_path, HpfConfig};
use crate::sim::{collision_check, forward_kinematics, RobotConfig, RobotState, WorldGeometry};

use super::{noise, uniform, EnvError, EnvKind, EnvSpec, Scene, Tunnel, MAX_GENERATION_ATTEMPTS};

/// Extra distance, beyond the folded end-effector offset and the smallest
/// tolerance, that the goal must keep from every base-reachable position.
const UNREACHABLE_MARGIN: f64 = 0.02;
const MIN_TOLERANCE: f64 = 0.05;
/// Slack kept between the goal and the stretched arm's reach.
const REACH_MARGIN: f64 = 0.1;
/// Lateral slack between the arm capsule and the tunnel walls at the goal.
const LATERAL_MARGIN: f64 = 0.02;

/// Dividing wall at `x = 0` with a tunnel of the drawn width and length.
///
/// The robot spawns on the left facing the wall. The right side is a pocket
/// shallower than the base diameter, so no base position exists past the wall.
/// A sample is accepted only if the goal is out of reach of a folded arm from
/// every base position that fits, yet within reach of a straight arm pushed
/// into the tunnel.
pub fn generate_gap<R: Rng + ?Sized>(
    spec: &EnvSpec,
    robot: &RobotConfig,
    hpf: &HpfConfig,
    rng: &mut R,
) -> Result<Scene, EnvError> {
    if !matches!(spec.kind, EnvKind::GapTrain | EnvKind::GapTest) {
        return Err(EnvError::WrongKind(spec.kind));
    }
    let mut last = String::new();
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        match sample(spec, robot, hpf, rng) {
            Ok(scene) => return Ok(scene),
            Err(reason) => last = reason,
        }
    }
    Err(EnvError::GenerationExhausted {
        attempts: MAX_GENERATION_ATTEMPTS,
        last,
    })
}

fn sample<R: Rng + ?Sized>(
    spec: &EnvSpec,
    robot: &RobotConfig,
    hpf: &HpfConfig,
    rng: &mut R,
) -> Result<Scene, String> {
    let g = &spec.gap;
    let test = spec.kind == EnvKind::GapTest;
    let (width, length, depth) = if test {
        (
            uniform(rng, g.test_gap_width_range),
            uniform(rng, g.test_tunnel_length_range),
            uniform(rng, g.test_goal_depth_range),
        )
    } else {
        (g.train_gap_width, g.train_tunnel_length, g.goal_depth)
    };
    let h = g.arena_half_width;
    let back = g.spawn_distance + g.spawn_offset[0] + robot.base_radius + 0.5;
    let bounds = Aabb::new(Vec2::new(-back, -h), Vec2::new(length + g.pocket_depth, h));
    let mut world = WorldGeometry::walled_room(bounds);
    world.boxes.push(Aabb::new(Vec2::new(0.0, width / 2.0), Vec2::new(length, h)));
    world.boxes.push(Aabb::new(Vec2::new(0.0, -h), Vec2::new(length, -width / 2.0)));
    let tunnel = Tunnel {
        entrance_x: 0.0,
        center_y: 0.0,
        width,
        length,
    };

    let goal = Pose2::new(
        depth + noise(rng, g.goal_offset[0]),
        noise(rng, g.goal_offset[1]),
        noise(rng, g.goal_offset[2]),
    );
    let base = Pose2::new(
        -g.spawn_distance + noise(rng, g.spawn_offset[0]),
        noise(rng, g.spawn_offset[1]),
        noise(rng, g.spawn_offset[2]),
    );
    let joints = (0..robot.num_joints())
        .map(|i| {
            let (lo, hi) = robot.clamped_limits(i);
            noise(rng, g.joint_noise).clamp(lo, hi)
        })
        .collect();
    let start = RobotState::at_rest(base, joints);

    if collision_check(robot, &start, &world).map_err(|e| e.to_string())? {
        return Err("spawn pose collides".into());
    }
    let folded = folded_offset(robot)?;
    let frontier = base_frontier_distance(&world, robot.base_radius, goal.position());
    if frontier <= folded + MIN_TOLERANCE + UNREACHABLE_MARGIN {
        return Err(format!("goal within folded reach of the base ({frontier:.3} m)"));
    }
    if !straight_insertion_reaches(robot, &world, &tunnel, goal.position()) {
        return Err("goal out of straight-arm reach".into());
    }
    let ee = forward_kinematics(robot, &start)
        .map_err(|e| e.to_string())?
        .ee
        .position();
    let ee_path = plan_path(
        &world,
        ee,
        goal.position(),
        robot.link_capsule_radius,
        hpf,
    )
    .map_err(|e| e.to_string())?;
    Ok(Scene {
        kind: spec.kind,
        world,
        start,
        goal,
        ee_path,
        tunnel: Some(tunnel),
    })
}

/// Distance from the base center to the end-effector with the arm folded.
fn folded_offset(robot: &RobotConfig) -> Result<f64, String> {
    let state = RobotState::at_rest(Pose2::default(), robot.folded_posture());
    let frames = forward_kinematics(robot, &state).map_err(|e| e.to_string())?;
    Ok(frames.ee.position().norm())
}

/// Largest x a base disk centered at height `y` can reach on the near side of
/// the dividing wall (boxes starting at `x >= 0`).
fn frontier_x(world: &WorldGeometry, radius: f64, y: f64) -> f64 {
    let mut x_max = f64::INFINITY;
    for b in world.boxes.iter().filter(|b| b.min.x >= 0.0) {
        let dy = if y < b.min.y {
            b.min.y - y
        } else if y > b.max.y {
            y - b.max.y
        } else {
            0.0
        };
        if dy < radius {
            x_max = x_max.min(b.min.x - (radius * radius - dy * dy).sqrt());
        }
    }
    x_max
}

/// Smallest distance from `goal` to any base center that fits on the near
/// side of the dividing wall, scanning heights at 1 mm.
pub fn base_frontier_distance(world: &WorldGeometry, radius: f64, goal: Vec2) -> f64 {
    let lo = world.bounds.min.y + radius;
    let hi = world.bounds.max.y - radius;
    let n = ((hi - lo) / 1e-3).ceil() as usize;
    (0..=n)
        .map(|k| {
            let y = lo + (hi - lo) * k as f64 / n as f64;
            let x = frontier_x(world, radius, y).min(world.bounds.max.x - radius);
            Vec2::new(x, y).distance(goal)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Whether a straight arm, with the base pressed into the tunnel mouth on the
/// goal's lateral line, reaches the goal without touching the tunnel walls.
fn straight_insertion_reaches(robot: &RobotConfig, world: &WorldGeometry, tunnel: &Tunnel, goal: Vec2) -> bool {
    let r = robot.link_capsule_radius;
    if (goal.y - tunnel.center_y).abs() + r + LATERAL_MARGIN > tunnel.width / 2.0 {
        return false;
    }
    if goal.x + r + LATERAL_MARGIN > world.bounds.max.x || goal.x <= tunnel.entrance_x {
        return false;
    }
    let base_x = frontier_x(world, robot.base_radius, goal.y);
    goal.x - base_x <= robot.max_reach() - REACH_MARGIN
}

use rand::Rng;

use crate::geometry::{Aabb, Pose2, Vec2};
use crate::pathfield::{path_exists, plan_path, HpfConfig};
use crate::sim::{collision_check, forward_kinematics, RobotConfig, RobotState, WorldGeometry};

use super::{uniform, EnvError, EnvKind, EnvSpec, Scene, MAX_GENERATION_ATTEMPTS};

/// Clearance kept between the spawn end-effector and the first obstacle.
const SPAWN_CLEARANCE: f64 = 0.4;
/// Clearance kept between the last obstacle and the goal.
const GOAL_CLEARANCE: f64 = 0.6;

/// Corridor along +x with the robot at the left end facing down the corridor.
///
/// Obstacles hang off alternating walls and never reach closer than
/// `min_passage_width` to the opposite wall; consecutive obstacles are at least
/// that far apart along the corridor, so a passage always remains.
pub fn generate_corridor<R: Rng + ?Sized>(
    spec: &EnvSpec,
    robot: &RobotConfig,
    hpf: &HpfConfig,
    rng: &mut R,
) -> Result<Scene, EnvError> {
    if spec.kind != EnvKind::Corridor {
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
    let c = &spec.corridor;
    let length = uniform(rng, c.length_range);
    let width = uniform(rng, c.width_range);
    let bounds = Aabb::new(Vec2::new(0.0, 0.0), Vec2::new(length, width));
    let mut world = WorldGeometry::walled_room(bounds);

    let base = Pose2::new(2.0 * robot.base_radius, width / 2.0, 0.0);
    let start = RobotState::at_rest(base, vec![0.0; robot.num_joints()]);
    let spawn_ee = base.x + robot.max_reach();

    let goal_x = uniform(rng, [2.0 * length / 3.0, length - c.goal_wall_margin]);
    let goal_y = uniform(rng, [c.goal_wall_margin, width - c.goal_wall_margin]);
    let goal_phi = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let goal = Pose2::new(goal_x, goal_y, goal_phi);

    let n = rng.gen_range(c.obstacle_count_range[0]..=c.obstacle_count_range[1]);
    let mut lengths: Vec<f64> = (0..n).map(|_| uniform(rng, c.obstacle_length_range)).collect();
    let lo = spawn_ee + SPAWN_CLEARANCE;
    let hi = goal_x - GOAL_CLEARANCE;
    let needed = |ls: &[f64]| ls.iter().sum::<f64>() + ls.len().saturating_sub(1) as f64 * c.min_passage_width;
    while !lengths.is_empty() && needed(&lengths) > hi - lo {
        lengths.pop();
    }
    if !lengths.is_empty() {
        let slack = hi - lo - needed(&lengths);
        let mut offsets: Vec<f64> = lengths.iter().map(|_| rng.gen_range(0.0..=slack)).collect();
        offsets.sort_by(f64::total_cmp);
        let max_depth = width - c.min_passage_width;
        let mut top = rng.gen_bool(0.5);
        let mut x = lo;
        for (len, off) in lengths.iter().zip(&offsets) {
            let x0 = x + off;
            let depth = uniform(rng, [0.5 * max_depth, max_depth]);
            let (y0, y1) = if top { (width - depth, width) } else { (0.0, depth) };
            world
                .boxes
                .push(Aabb::new(Vec2::new(x0, y0), Vec2::new(x0 + len, y1)));
            x += len + c.min_passage_width;
            top = !top;
        }
    }

    if collision_check(robot, &start, &world).map_err(|e| e.to_string())? {
        return Err("spawn pose collides".into());
    }
    if !path_exists(
        &world,
        base.position(),
        goal.position(),
        robot.base_radius,
        hpf.cell_size,
    ) {
        return Err("no base-sized passage from spawn to goal".into());
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
        kind: EnvKind::Corridor,
        world,
        start,
        goal,
        ee_path,
        tunnel: None,
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::geometry::Segment;

    fn spec() -> EnvSpec {
        EnvSpec::default()
    }

    #[test]
    fn seed_determinism() {
        let robot = RobotConfig::default();
        let hpf = HpfConfig::default();
        let a = generate_corridor(&spec(), &robot, &hpf, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = generate_corridor(&spec(), &robot, &hpf, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_corridor_path_is_straight() {
        let robot = RobotConfig::default();
        let hpf = HpfConfig::default();
        let mut s = spec();
        s.corridor.obstacle_count_range = [0, 0];
        s.corridor.width_range = [2.0, 2.0];
        s.corridor.goal_wall_margin = 1.0;
        let scene = generate_corridor(&s, &robot, &hpf, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert!(scene.world.boxes.is_empty());
        let pts = scene.ee_path.points();
        let line = Segment::new(pts[0], scene.goal.position());
        for p in pts {
            assert!(line.distance_to_point(*p) < 2.0 * hpf.cell_size);
        }
    }

    #[test]
    fn obstacles_leave_a_passage_and_alternate() {
        let robot = RobotConfig::default();
        let hpf = HpfConfig::default();
        let mut s = spec();
        s.corridor.obstacle_count_range = [4, 4];
        s.corridor.length_range = [12.0, 12.0];
        for seed in 0..5 {
            let scene = generate_corridor(&s, &robot, &hpf, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let w = scene.world.bounds.height();
            let boxes = &scene.world.boxes;
            assert!(!boxes.is_empty());
            for b in boxes {
                assert!(w - b.height() >= s.corridor.min_passage_width - 1e-12);
            }
            for pair in boxes.windows(2) {
                assert!(pair[1].min.x - pair[0].max.x >= s.corridor.min_passage_width - 1e-12);
                assert_ne!(pair[0].min.y == 0.0, pair[1].min.y == 0.0);
            }
        }
    }

    #[test]
    fn rejects_gap_kind() {
        let mut s = spec();
        s.kind = EnvKind::GapTest;
        let r = generate_corridor(
            &s,
            &RobotConfig::default(),
            &HpfConfig::default(),
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert_eq!(r.unwrap_err(), EnvError::WrongKind(EnvKind::GapTest));
    }
}

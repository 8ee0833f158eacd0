use super::{forward_kinematics, ArmFrames, RobotConfig, RobotState, SimError, WorldGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollisionKind {
    BaseWithWorld,
    ArmWithWorld { link: usize },
    ArmWithBase { link: usize },
    ArmWithArm { first: usize, second: usize },
}

/// First collision found, if any.
///
/// Link 0 starts inside the base footprint, so only links 1.. are tested
/// against the base disk. Adjacent links share a joint and never count.
pub fn find_collision(
    config: &RobotConfig,
    frames: &ArmFrames,
    world: &WorldGeometry,
) -> Option<CollisionKind> {
    let center = frames.base.position();
    if world.distance_to_point(center) < config.base_radius {
        return Some(CollisionKind::BaseWithWorld);
    }
    let r = config.link_capsule_radius;
    let links: Vec<_> = frames.links().collect();
    for (i, link) in links.iter().enumerate() {
        if world.distance_to_segment(link) < r {
            return Some(CollisionKind::ArmWithWorld { link: i });
        }
    }
    for (i, link) in links.iter().enumerate().skip(1) {
        if link.distance_to_point(center) < config.base_radius + r {
            return Some(CollisionKind::ArmWithBase { link: i });
        }
    }
    for i in 0..links.len() {
        for j in i + 2..links.len() {
            if links[i].distance_to_segment(&links[j]) < 2.0 * r {
                return Some(CollisionKind::ArmWithArm { first: i, second: j });
            }
        }
    }
    None
}

pub fn collision_check(
    config: &RobotConfig,
    state: &RobotState,
    world: &WorldGeometry,
) -> Result<bool, SimError> {
    let frames = forward_kinematics(config, state)?;
    Ok(find_collision(config, &frames, world).is_some())
}

/// Smallest gap between the robot body (base disk and link capsules) and the world, floored at 0.
pub fn body_clearance(config: &RobotConfig, frames: &ArmFrames, world: &WorldGeometry) -> f64 {
    let base = world.distance_to_point(frames.base.position()) - config.base_radius;
    frames
        .links()
        .map(|l| world.distance_to_segment(&l) - config.link_capsule_radius)
        .fold(base, f64::min)
        .max(0.0)
}

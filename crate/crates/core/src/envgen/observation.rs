use serde::{Deserialize, Serialize};

use crate::geometry::Pose2;
use crate::sim::{cast_lidar, forward_kinematics, RobotConfig, RobotState, Sensor, SimError, WorldGeometry};

/// What the agent sees each step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Ranges divided by the sensor's max range.
    pub front_scan: Vec<f64>,
    pub rear_scan: Vec<f64>,
    pub joint_pos: Vec<f64>,
    pub joint_vel: Vec<f64>,
    pub base_vel: [f64; 3],
    /// Goal pose in the end-effector frame.
    pub goal_in_ee: Pose2,
}

impl Observation {
    /// Length of [`Observation::features`] for a robot.
    pub fn feature_len(config: &RobotConfig) -> usize {
        2 * config.lidar.beams + 2 * config.num_joints() + 6
    }

    /// Flat network input: front scan, rear scan, then proprioception and the
    /// goal, each divided by a fixed scale so entries are of order one.
    pub fn features(&self, config: &RobotConfig) -> Vec<f64> {
        let mut f = Vec::with_capacity(Self::feature_len(config));
        f.extend_from_slice(&self.front_scan);
        f.extend_from_slice(&self.rear_scan);
        for (i, q) in self.joint_pos.iter().enumerate() {
            let [lo, hi] = config.joint_limits[i];
            f.push(q / hi.abs().max(lo.abs()));
        }
        f.extend(self.joint_vel.iter().map(|v| v / config.max_joint_vel));
        for (v, m) in self.base_vel.iter().zip(config.max_base_vel) {
            f.push(v / m);
        }
        let range = config.lidar.max_range;
        f.push(self.goal_in_ee.x / range);
        f.push(self.goal_in_ee.y / range);
        f.push(self.goal_in_ee.theta / std::f64::consts::PI);
        f
    }

    pub fn is_finite(&self) -> bool {
        self.front_scan
            .iter()
            .chain(&self.rear_scan)
            .chain(&self.joint_pos)
            .chain(&self.joint_vel)
            .chain(&self.base_vel)
            .all(|x| x.is_finite())
            && self.goal_in_ee.is_finite()
    }
}

pub fn build_observation(
    config: &RobotConfig,
    state: &RobotState,
    world: &WorldGeometry,
    goal: &Pose2,
) -> Result<Observation, SimError> {
    let frames = forward_kinematics(config, state)?;
    let scale = 1.0 / config.lidar.max_range;
    let scan = |sensor| {
        cast_lidar(config, state, world, sensor)
            .ranges
            .into_iter()
            .map(|r| r * scale)
            .collect()
    };
    Ok(Observation {
        front_scan: scan(Sensor::Front),
        rear_scan: scan(Sensor::Rear),
        joint_pos: state.joint_pos.clone(),
        joint_vel: state.joint_vel.clone(),
        base_vel: state.base_vel,
        goal_in_ee: frames.ee.relative(goal),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Aabb, Vec2};

    fn room() -> WorldGeometry {
        WorldGeometry::walled_room(Aabb::new(Vec2::new(-3.0, -3.0), Vec2::new(3.0, 3.0)))
    }

    #[test]
    fn goal_at_ee_is_identity() {
        let c = RobotConfig::default();
        let s = RobotState::at_rest(Pose2::default(), vec![0.0; 3]);
        let o = build_observation(&c, &s, &room(), &Pose2::new(1.0, 0.0, 0.0)).unwrap();
        assert!(o.goal_in_ee.x.abs() < 1e-15 && o.goal_in_ee.y.abs() < 1e-15);
        assert_eq!(o.goal_in_ee.theta, 0.0);
    }

    #[test]
    fn goal_ahead_of_ee() {
        let c = RobotConfig::default();
        let s = RobotState::at_rest(Pose2::default(), vec![0.0; 3]);
        let o = build_observation(&c, &s, &room(), &Pose2::new(2.0, 0.0, 0.0)).unwrap();
        assert!((o.goal_in_ee.x - 1.0).abs() < 1e-15);
        assert!(o.goal_in_ee.y.abs() < 1e-15);
    }

    #[test]
    fn scans_are_normalized() {
        let c = RobotConfig::default();
        let s = RobotState::at_rest(Pose2::default(), vec![0.0; 3]);
        let o = build_observation(&c, &s, &room(), &Pose2::default()).unwrap();
        assert_eq!(o.front_scan.len(), c.lidar.beams);
        assert_eq!(o.rear_scan.len(), c.lidar.beams);
        assert!(o.front_scan.iter().chain(&o.rear_scan).all(|r| (0.0..=1.0).contains(r)));
        assert_eq!(o.features(&c).len(), Observation::feature_len(&c));
        assert!(o.is_finite());
    }
}

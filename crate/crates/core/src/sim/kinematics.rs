use crate::geometry::{Pose2, Segment, Vec2};

use super::{RobotConfig, RobotState, SimError};

/// World frames of the kinematic chain.
///
/// `points[0]` is the arm mount; `points[i + 1]` is the far end of link `i`,
/// so link `i` spans `points[i]..points[i + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmFrames {
    pub base: Pose2,
    pub points: Vec<Vec2>,
    pub ee: Pose2,
}

impl ArmFrames {
    pub fn link(&self, i: usize) -> Segment {
        Segment::new(self.points[i], self.points[i + 1])
    }

    pub fn links(&self) -> impl Iterator<Item = Segment> + '_ {
        self.points.windows(2).map(|w| Segment::new(w[0], w[1]))
    }
}

pub fn forward_kinematics(config: &RobotConfig, state: &RobotState) -> Result<ArmFrames, SimError> {
    if state.joint_pos.len() != config.num_joints() {
        return Err(SimError::DimensionMismatch {
            expected: config.num_joints(),
            got: state.joint_pos.len(),
        });
    }
    let base = state.base_pose;
    let mut p = base.transform_point(config.arm_mount_offset);
    let mut heading = base.theta;
    let mut points = Vec::with_capacity(config.num_joints() + 1);
    points.push(p);
    for (len, q) in config.link_lengths.iter().zip(&state.joint_pos) {
        heading += q;
        p += Vec2::from_angle(heading) * *len;
        points.push(p);
    }
    Ok(ArmFrames {
        base,
        points,
        ee: Pose2::new(p.x, p.y, heading),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn state(theta: f64, q: Vec<f64>) -> RobotState {
        RobotState::at_rest(Pose2::new(0.0, 0.0, theta), q)
    }

    #[test]
    fn straight_chain() {
        let c = RobotConfig::default();
        let f = forward_kinematics(&c, &state(0.0, vec![0.0; 3])).unwrap();
        assert!((f.ee.x - 1.0).abs() < 1e-15);
        assert!(f.ee.y.abs() < 1e-15);
        assert_eq!(f.ee.theta, 0.0);
        assert_eq!(f.points.len(), 4);
    }

    #[test]
    fn rotated_base() {
        let c = RobotConfig::default();
        let f = forward_kinematics(&c, &state(FRAC_PI_2, vec![0.0; 3])).unwrap();
        assert!(f.ee.x.abs() < 1e-15);
        assert!((f.ee.y - 1.0).abs() < 1e-15);
        assert_eq!(f.ee.theta, FRAC_PI_2);
    }

    #[test]
    fn dimension_mismatch() {
        let c = RobotConfig::default();
        assert_eq!(
            forward_kinematics(&c, &state(0.0, vec![0.0; 2])),
            Err(SimError::DimensionMismatch { expected: 3, got: 2 })
        );
    }
}

//! Planar mobile-manipulator simulator: an omnidirectional base carrying a
//! chain of revolute links, integrated at the acceleration level.
//!
//! Everything here is deterministic and free of shared state, so separate
//! rollout workers can own their own robot and world.

mod collision;
mod config;
mod dynamics;
mod kinematics;
mod lidar;
mod world;

pub use collision::{body_clearance, collision_check, find_collision, CollisionKind};
pub use config::{LidarConfig, RobotConfig};
pub use dynamics::{step_dynamics, StepResult};
pub use kinematics::{forward_kinematics, ArmFrames};
pub use lidar::{beam_angles, cast_lidar, sensor_origin, LidarScan, Sensor};
pub use world::WorldGeometry;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("state has {got} joints but the robot has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid step time {0}")]
    InvalidStepTime(f64),
    #[error("action component {component} = {value} exceeds its bound {bound}")]
    ActionOutOfBounds {
        component: usize,
        value: f64,
        bound: f64,
    },
}

/// Kinematic state of the robot. Base velocity is expressed in the base frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub base_pose: Pose2,
    pub base_vel: [f64; 3],
    pub joint_pos: Vec<f64>,
    pub joint_vel: Vec<f64>,
}

impl RobotState {
    /// Robot at rest at `pose` with the given joint angles.
    pub fn at_rest(pose: Pose2, joint_pos: Vec<f64>) -> Self {
        let k = joint_pos.len();
        Self {
            base_pose: pose,
            base_vel: [0.0; 3],
            joint_pos,
            joint_vel: vec![0.0; k],
        }
    }

    pub fn check_dims(&self, config: &RobotConfig) -> Result<(), SimError> {
        let k = config.num_joints();
        for got in [self.joint_pos.len(), self.joint_vel.len()] {
            if got != k {
                return Err(SimError::DimensionMismatch { expected: k, got });
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.base_pose.is_finite()
            && self.base_vel.iter().all(|v| v.is_finite())
            && self.joint_pos.iter().all(|v| v.is_finite())
            && self.joint_vel.iter().all(|v| v.is_finite())
    }
}

/// Base and joint accelerations commanded for one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub base_acc: [f64; 3],
    pub joint_acc: Vec<f64>,
}

impl Action {
    pub fn zero(num_joints: usize) -> Self {
        Self {
            base_acc: [0.0; 3],
            joint_acc: vec![0.0; num_joints],
        }
    }

    /// Number of scalar action dimensions for a robot with `num_joints` joints.
    pub fn dims(num_joints: usize) -> usize {
        3 + num_joints
    }

    /// Flat `[base..., joints...]` view.
    pub fn components(&self) -> impl Iterator<Item = f64> + '_ {
        self.base_acc.iter().chain(self.joint_acc.iter()).copied()
    }

    /// Checks every component against the configured acceleration bounds.
    pub fn check(&self, config: &RobotConfig) -> Result<(), SimError> {
        if self.joint_acc.len() != config.num_joints() {
            return Err(SimError::DimensionMismatch {
                expected: config.num_joints(),
                got: self.joint_acc.len(),
            });
        }
        for (component, (value, bound)) in self
            .components()
            .zip(config.action_bounds())
            .enumerate()
        {
            if !value.is_finite() {
                return Err(SimError::NonFinite("action"));
            }
            if value.abs() > bound * (1.0 + 1e-12) {
                return Err(SimError::ActionOutOfBounds {
                    component,
                    value,
                    bound,
                });
            }
        }
        Ok(())
    }
}

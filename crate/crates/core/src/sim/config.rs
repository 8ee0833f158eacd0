use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LidarConfig {
    pub beams: usize,
    /// Field of view of each sensor, radians.
    pub field_of_view: f64,
    pub max_range: f64,
    /// Sensor origins in the base frame.
    pub front_offset: Vec2,
    pub rear_offset: Vec2,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self {
            beams: 64,
            field_of_view: PI,
            max_range: 5.0,
            front_offset: Vec2::ZERO,
            rear_offset: Vec2::ZERO,
        }
    }
}

/// Geometry and actuation limits of the planar mobile manipulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotConfig {
    pub base_radius: f64,
    /// Arm mount point in the base frame.
    pub arm_mount_offset: Vec2,
    pub link_lengths: Vec<f64>,
    pub link_capsule_radius: f64,
    /// Per-joint `[min, max]` in radians.
    pub joint_limits: Vec<[f64; 2]>,
    /// Distance kept from the raw limits when clamping is enabled.
    pub clamp_margin: f64,
    pub max_joint_vel: f64,
    /// `(vx, vy, omega)` bounds.
    pub max_base_vel: [f64; 3],
    pub max_joint_acc: f64,
    pub max_base_acc: [f64; 3],
    pub lidar: LidarConfig,
}

impl Default for RobotConfig {
    fn default() -> Self {
        Self {
            base_radius: 0.3,
            arm_mount_offset: Vec2::new(0.2, 0.0),
            link_lengths: vec![0.3, 0.3, 0.2],
            link_capsule_radius: 0.05,
            joint_limits: vec![[-2.0, 2.0]; 3],
            clamp_margin: 0.05,
            max_joint_vel: 1.5,
            max_base_vel: [0.5, 0.5, 1.0],
            max_joint_acc: 2.0,
            max_base_acc: [1.0, 1.0, 2.0],
            lidar: LidarConfig::default(),
        }
    }
}

impl RobotConfig {
    pub fn num_joints(&self) -> usize {
        self.link_lengths.len()
    }

    /// Distance from the base center to a fully stretched end-effector.
    pub fn max_reach(&self) -> f64 {
        self.arm_mount_offset.norm() + self.link_lengths.iter().sum::<f64>()
    }

    /// Margin-shrunk joint range used by clamping.
    pub fn clamped_limits(&self, joint: usize) -> (f64, f64) {
        let [lo, hi] = self.joint_limits[joint];
        (lo + self.clamp_margin, hi - self.clamp_margin)
    }

    /// Acceleration bound of each action component, base first.
    pub fn action_bounds(&self) -> Vec<f64> {
        let mut b = self.max_base_acc.to_vec();
        b.extend(std::iter::repeat_n(self.max_joint_acc, self.num_joints()));
        b
    }

    /// Tucked posture: first joint straight, every later joint bent to its upper clamp bound.
    pub fn folded_posture(&self) -> Vec<f64> {
        (0..self.num_joints())
            .map(|i| if i == 0 { 0.0 } else { self.clamped_limits(i).1 })
            .collect()
    }

    /// All invariant violations, each prefixed with its field name.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.link_lengths.is_empty() {
            v.push("link_lengths: at least one link is required".to_string());
        }
        if self.link_lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            v.push("link_lengths: every length must be positive and finite".to_string());
        }
        if !(self.link_capsule_radius > 0.0) {
            v.push("link_capsule_radius: must be positive".to_string());
        }
        if !(self.base_radius > self.link_capsule_radius) {
            v.push("base_radius: must exceed link_capsule_radius".to_string());
        }
        if !self.arm_mount_offset.is_finite() {
            v.push("arm_mount_offset: must be finite".to_string());
        }
        if self.joint_limits.len() != self.link_lengths.len() {
            v.push(format!(
                "joint_limits: expected {} entries, found {}",
                self.link_lengths.len(),
                self.joint_limits.len()
            ));
        }
        if !(self.clamp_margin >= 0.0) {
            v.push("clamp_margin: must be non-negative".to_string());
        }
        for (i, &[lo, hi]) in self.joint_limits.iter().enumerate() {
            if !(lo < hi) {
                v.push(format!("joint_limits[{i}]: min must be below max"));
            } else if !(self.clamp_margin < 0.5 * (hi - lo)) {
                v.push(format!(
                    "clamp_margin: must be below half the span of joint_limits[{i}]"
                ));
            }
        }
        if !(self.max_joint_vel > 0.0) {
            v.push("max_joint_vel: must be positive".to_string());
        }
        if !(self.max_joint_acc > 0.0) {
            v.push("max_joint_acc: must be positive".to_string());
        }
        if self.max_base_vel.iter().any(|&b| !(b > 0.0)) {
            v.push("max_base_vel: every component must be positive".to_string());
        }
        if self.max_base_acc.iter().any(|&b| !(b > 0.0)) {
            v.push("max_base_acc: every component must be positive".to_string());
        }
        if self.lidar.beams == 0 {
            v.push("lidar.beams: must be at least 1".to_string());
        }
        if !(self.lidar.max_range > 0.0) {
            v.push("lidar.max_range: must be positive".to_string());
        }
        if !(self.lidar.field_of_view > 0.0 && self.lidar.field_of_view <= 2.0 * PI) {
            v.push("lidar.field_of_view: must be in (0, 2pi]".to_string());
        }
        v
    }
}

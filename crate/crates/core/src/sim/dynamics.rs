use crate::geometry::{wrap_angle, Vec2};

use super::{Action, RobotConfig, RobotState, SimError};

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: RobotState,
    /// Set only when clamping is disabled and a joint left its raw limits.
    pub joint_limit_hit: bool,
}

/// Semi-implicit Euler step: velocities first (then saturated), positions second.
///
/// With `clamping` on, a joint that would leave its margin-shrunk range is
/// pinned to the bound and only that joint's velocity is zeroed.
pub fn step_dynamics(
    config: &RobotConfig,
    state: &RobotState,
    action: &Action,
    tau: f64,
    clamping: bool,
) -> Result<StepResult, SimError> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(SimError::InvalidStepTime(tau));
    }
    state.check_dims(config)?;
    if !state.is_finite() {
        return Err(SimError::NonFinite("state"));
    }
    action.check(config)?;

    let mut next = state.clone();

    for i in 0..3 {
        let vmax = config.max_base_vel[i];
        next.base_vel[i] = (state.base_vel[i] + action.base_acc[i] * tau).clamp(-vmax, vmax);
    }
    let pose = &mut next.base_pose;
    let world_vel = Vec2::new(next.base_vel[0], next.base_vel[1]).rotate(pose.theta);
    pose.x += world_vel.x * tau;
    pose.y += world_vel.y * tau;
    pose.theta = wrap_angle(pose.theta + next.base_vel[2] * tau);

    let mut joint_limit_hit = false;
    let vmax = config.max_joint_vel;
    for j in 0..config.num_joints() {
        let v = (state.joint_vel[j] + action.joint_acc[j] * tau).clamp(-vmax, vmax);
        let q = state.joint_pos[j] + v * tau;
        let [raw_lo, raw_hi] = config.joint_limits[j];
        if clamping {
            let (lo, hi) = config.clamped_limits(j);
            if q > hi {
                next.joint_pos[j] = hi;
                next.joint_vel[j] = 0.0;
            } else if q < lo {
                next.joint_pos[j] = lo;
                next.joint_vel[j] = 0.0;
            } else {
                next.joint_pos[j] = q;
                next.joint_vel[j] = v;
            }
        } else {
            next.joint_pos[j] = q;
            next.joint_vel[j] = v;
            if q > raw_hi || q < raw_lo {
                joint_limit_hit = true;
            }
        }
    }

    Ok(StepResult {
        state: next,
        joint_limit_hit,
    })
}

//! Shaped per-step reward.
//!
//! Per step the agent pays a time penalty, is penalised for drifting away
//! from the planned end-effector path and rewarded for progress along it. While
//! the end-effector is inside the tolerance sphere it also collects a holding
//! bonus plus a distance bonus; both are banked in an accumulator that is paid
//! back (subtracted) on the step the end-effector leaves the sphere, so
//! hovering at the boundary earns nothing. Terminal values are applied by
//! [`terminal_reward`], not per step.
//!
//! The joint-limit baseline additionally pays a safety-margin penalty near
//! obstacles and a terminal penalty on joint-limit termination; neither term
//! exists under the clamping variant.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envgen::EpisodeConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewardError {
    #[error("non-finite reward input {0}")]
    NonFinite(&'static str),
    #[error("path length must be positive, got {0}")]
    DegeneratePath(f64),
    #[error("joint-limit termination cannot occur under joint clamping")]
    JointLimitUnderClamping,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RewardVariant {
    /// Joint-limit penalty and termination plus safety-margin penalty.
    Baseline,
    /// Joints are clamped programmatically; no joint-limit or safety terms.
    #[default]
    Clamping,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Collision,
    Timeout,
    JointLimit,
    Success,
}

impl Termination {
    pub const ALL: [Termination; 4] = [
        Termination::Success,
        Termination::Collision,
        Termination::Timeout,
        Termination::JointLimit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Collision => "collision",
            Termination::Timeout => "timeout",
            Termination::JointLimit => "joint_limit",
            Termination::Success => "success",
        }
    }
}

/// Reward weights and terminal values. Defaults follow the published hyperparameter table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardParams {
    /// Time penalty, spread evenly over the timeout horizon.
    pub w_t: f64,
    /// Path deviation weight.
    pub w_pd: f64,
    /// Path progress weight (progress is normalised by the path length).
    pub w_pt: f64,
    /// Holding bonus per second inside tolerance.
    pub w_ht: f64,
    /// Distance bonus inside tolerance.
    pub w_hd: f64,
    /// Safety-margin weight (baseline only).
    pub w_sm: f64,
    pub collision_reward: f64,
    pub success_reward: f64,
    /// Baseline only.
    pub joint_limit_reward: f64,
    /// Clearance below which the baseline's safety penalty applies, metres.
    pub safety_distance: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            w_t: -15.0,
            w_pd: -10.0,
            w_pt: 50.0,
            w_ht: 20.0,
            w_hd: 40.0,
            w_sm: -1.0,
            collision_reward: -60.0,
            success_reward: 10.0,
            joint_limit_reward: -20.0,
            safety_distance: 0.3,
        }
    }
}

impl RewardParams {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let fields = [
            ("w_t", self.w_t),
            ("w_pd", self.w_pd),
            ("w_pt", self.w_pt),
            ("w_ht", self.w_ht),
            ("w_hd", self.w_hd),
            ("w_sm", self.w_sm),
            ("collision_reward", self.collision_reward),
            ("success_reward", self.success_reward),
            ("joint_limit_reward", self.joint_limit_reward),
        ];
        for (name, x) in fields {
            if !x.is_finite() {
                v.push(format!("{name}: must be finite"));
            }
        }
        if !(self.safety_distance > 0.0) {
            v.push("safety_distance: must be positive".into());
        }
        v
    }
}

/// Per-episode accumulator state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardState {
    /// Holding reward banked since the end-effector last entered tolerance.
    pub hold_accumulator: f64,
    pub inside: bool,
    pub tolerance: f64,
}

pub fn reset_state(tolerance: f64) -> RewardState {
    RewardState {
        hold_accumulator: 0.0,
        inside: false,
        tolerance,
    }
}

/// Measurements the reward needs from one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInputs {
    pub delta_deviation: f64,
    pub delta_progress: f64,
    pub path_length: f64,
    pub goal_distance: f64,
    /// Smallest body-to-obstacle clearance; read only by the baseline.
    pub clearance: f64,
}

/// Reward split into its terms, for logging.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardTerms {
    pub time: f64,
    pub path_deviation: f64,
    pub path_progress: f64,
    pub hold_time: f64,
    pub hold_distance: f64,
    /// Minus the accumulator, on the step the end-effector leaves tolerance.
    pub hold_refund: f64,
    pub safety_margin: f64,
    pub terminal: f64,
}

impl RewardTerms {
    pub fn total(&self) -> f64 {
        self.time
            + self.path_deviation
            + self.path_progress
            + self.hold_time
            + self.hold_distance
            + self.hold_refund
            + self.safety_margin
            + self.terminal
    }
}

pub fn compute_step_reward(
    params: &RewardParams,
    episode: &EpisodeConfig,
    state: &RewardState,
    inputs: &StepInputs,
) -> Result<(RewardTerms, RewardState), RewardError> {
    let StepInputs {
        delta_deviation,
        delta_progress,
        path_length,
        goal_distance,
        clearance,
    } = *inputs;
    for (name, x) in [
        ("delta_deviation", delta_deviation),
        ("delta_progress", delta_progress),
        ("path_length", path_length),
        ("goal_distance", goal_distance),
    ] {
        if !x.is_finite() {
            return Err(RewardError::NonFinite(name));
        }
    }
    if !(path_length > 0.0) {
        return Err(RewardError::DegeneratePath(path_length));
    }

    let tau = episode.step_time;
    let mut terms = RewardTerms {
        time: params.w_t * tau / episode.timeout,
        path_deviation: params.w_pd * delta_deviation,
        path_progress: params.w_pt * delta_progress / path_length,
        ..RewardTerms::default()
    };
    let mut next = state.clone();

    let d_h = state.tolerance;
    if goal_distance <= d_h {
        terms.hold_time = params.w_ht * tau / episode.hold_time;
        terms.hold_distance =
            params.w_hd * (1.0 - (goal_distance / d_h).min(1.0)) * tau / episode.hold_time;
        next.hold_accumulator += terms.hold_time + terms.hold_distance;
        next.inside = true;
    } else {
        if state.inside {
            terms.hold_refund = -state.hold_accumulator;
            next.hold_accumulator = 0.0;
        }
        next.inside = false;
    }

    if episode.variant == RewardVariant::Baseline {
        if !clearance.is_finite() {
            return Err(RewardError::NonFinite("clearance"));
        }
        terms.safety_margin =
            params.w_sm * (1.0 - clearance / params.safety_distance).max(0.0);
    }
    Ok((terms, next))
}

pub fn terminal_reward(
    params: &RewardParams,
    variant: RewardVariant,
    reason: Termination,
) -> Result<f64, RewardError> {
    Ok(match reason {
        Termination::Collision => params.collision_reward,
        Termination::Success => params.success_reward,
        Termination::Timeout => 0.0,
        Termination::JointLimit => match variant {
            RewardVariant::Baseline => params.joint_limit_reward,
            RewardVariant::Clamping => return Err(RewardError::JointLimitUnderClamping),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn episode() -> EpisodeConfig {
        EpisodeConfig {
            timeout: 60.0,
            ..EpisodeConfig::default()
        }
    }

    fn inputs(goal_distance: f64) -> StepInputs {
        StepInputs {
            delta_deviation: 0.0,
            delta_progress: 0.0,
            path_length: 8.0,
            goal_distance,
            clearance: 10.0,
        }
    }

    #[test]
    fn outside_tolerance_vector() {
        let s = reset_state(0.3);
        let (t, next) = compute_step_reward(
            &RewardParams::default(),
            &episode(),
            &s,
            &StepInputs {
                delta_deviation: 0.01,
                delta_progress: 0.02,
                ..inputs(1.0)
            },
        )
        .unwrap();
        assert!((t.total() - 0.015).abs() < 1e-12);
        assert_eq!(next.hold_accumulator, 0.0);
    }

    #[test]
    fn inside_tolerance_vector() {
        let s = reset_state(0.3);
        let (t, next) =
            compute_step_reward(&RewardParams::default(), &episode(), &s, &inputs(0.15)).unwrap();
        assert!((t.hold_time + t.hold_distance - 1.6).abs() < 1e-12);
        assert!((t.total() - 1.59).abs() < 1e-12);
        assert!((next.hold_accumulator - 1.6).abs() < 1e-12);
    }

    #[test]
    fn exit_refunds_everything_banked() {
        let p = RewardParams::default();
        let e = episode();
        let mut s = reset_state(0.3);
        let mut banked = 0.0;
        for d in [0.29, 0.1, 0.0, 0.2] {
            let (t, n) = compute_step_reward(&p, &e, &s, &inputs(d)).unwrap();
            banked += t.hold_time + t.hold_distance;
            s = n;
        }
        let (t, n) = compute_step_reward(&p, &e, &s, &inputs(0.31)).unwrap();
        assert_eq!(t.hold_refund, -banked);
        assert_eq!(n.hold_accumulator, 0.0);
        assert!(!n.inside);
        // A second step outside refunds nothing further.
        let (t, _) = compute_step_reward(&p, &e, &n, &inputs(0.5)).unwrap();
        assert_eq!(t.hold_refund, 0.0);
    }

    #[test]
    fn baseline_terms_only_under_baseline() {
        let e = episode();
        let s = reset_state(0.3);
        let near = StepInputs {
            clearance: 0.15,
            ..inputs(1.0)
        };
        let base = EpisodeConfig {
            variant: RewardVariant::Baseline,
            ..e.clone()
        };
        let (t, _) = compute_step_reward(&RewardParams::default(), &base, &s, &near).unwrap();
        assert!((t.safety_margin + 0.5).abs() < 1e-12);
        let (t, _) = compute_step_reward(&RewardParams::default(), &e, &s, &near).unwrap();
        assert_eq!(t.safety_margin, 0.0);
    }

    #[test]
    fn terminal_values() {
        let p = RewardParams::default();
        let c = RewardVariant::Clamping;
        assert_eq!(terminal_reward(&p, c, Termination::Collision), Ok(-60.0));
        assert_eq!(terminal_reward(&p, c, Termination::Success), Ok(10.0));
        assert_eq!(terminal_reward(&p, c, Termination::Timeout), Ok(0.0));
        assert_eq!(
            terminal_reward(&p, c, Termination::JointLimit),
            Err(RewardError::JointLimitUnderClamping)
        );
        assert_eq!(
            terminal_reward(&p, RewardVariant::Baseline, Termination::JointLimit),
            Ok(-20.0)
        );
    }

    #[test]
    fn reset_is_pure() {
        assert_eq!(reset_state(0.2), reset_state(0.2));
        let s = reset_state(0.2);
        assert_eq!(s.hold_accumulator, 0.0);
        let (_, n) =
            compute_step_reward(&RewardParams::default(), &episode(), &s, &inputs(0.9)).unwrap();
        assert_eq!(n.hold_accumulator, 0.0);
    }

    #[test]
    fn rejects_non_finite() {
        let s = reset_state(0.2);
        let bad = StepInputs {
            goal_distance: f64::NAN,
            ..inputs(0.0)
        };
        assert_eq!(
            compute_step_reward(&RewardParams::default(), &episode(), &s, &bad).unwrap_err(),
            RewardError::NonFinite("goal_distance")
        );
    }
}

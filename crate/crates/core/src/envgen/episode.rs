use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geometry::wrap_angle;
use crate::pathfield::PathTracker;
use crate::reward::{
    compute_step_reward, reset_state, terminal_reward, RewardState, RewardTerms, RewardVariant, StepInputs,
    Termination,
};
use crate::sim::{body_clearance, find_collision, forward_kinematics, step_dynamics, Action, RobotState};

use super::{build_observation, generate_scene, EnvConfig, EnvError, Observation, Scene};

/// Diagnostics reported with every step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    /// End-effector to goal distance, metres.
    pub goal_distance: f64,
    /// Uninterrupted time spent inside tolerance so far, seconds.
    pub hold_progress: f64,
    pub path_deviation: f64,
    /// Arc-length progress as a fraction of the planned path length.
    pub path_progress: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub terms: RewardTerms,
    pub terminated: Option<Termination>,
    pub info: StepInfo,
}

/// Complete mutable state of one episode; serializable so training can resume mid-episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeState {
    pub seed: u64,
    pub tolerance: f64,
    pub scene: Scene,
    pub robot: RobotState,
    pub reward: RewardState,
    pub tracker: PathTracker,
    pub steps: u64,
    pub hold_steps: u64,
    pub termination: Option<Termination>,
    pub episode_return: f64,
}

/// A single environment instance running one episode at a time.
#[derive(Debug, Clone)]
pub struct Env {
    config: Arc<EnvConfig>,
    episode: Option<EpisodeState>,
}

impl Env {
    pub fn new(config: Arc<EnvConfig>) -> Result<Self, EnvError> {
        let v = config.violations();
        if !v.is_empty() {
            return Err(EnvError::InvalidSpec(v));
        }
        Ok(Self {
            config,
            episode: None,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn episode(&self) -> Option<&EpisodeState> {
        self.episode.as_ref()
    }

    /// Replaces the current episode, e.g. when resuming from a checkpoint.
    pub fn restore(&mut self, episode: Option<EpisodeState>) {
        self.episode = episode;
    }

    /// Starts a new episode on the scene generated from `seed`.
    pub fn reset(&mut self, seed: u64, tolerance: f64) -> Result<Observation, EnvError> {
        let scene = generate_scene(&self.config, seed)?;
        self.reset_with_scene(scene, seed, tolerance)
    }

    /// Starts a new episode on a given scene.
    pub fn reset_with_scene(&mut self, scene: Scene, seed: u64, tolerance: f64) -> Result<Observation, EnvError> {
        let robot = &self.config.robot;
        let ee = forward_kinematics(robot, &scene.start)?.ee.position();
        let tracker = PathTracker::new(&scene.ee_path, ee, self.config.hpf.ratchet_progress);
        let observation = build_observation(robot, &scene.start, &scene.world, &scene.goal)?;
        self.episode = Some(EpisodeState {
            seed,
            tolerance,
            robot: scene.start.clone(),
            scene,
            reward: reset_state(tolerance),
            tracker,
            steps: 0,
            hold_steps: 0,
            termination: None,
            episode_return: 0.0,
        });
        Ok(observation)
    }

    /// Observation of the current state without stepping.
    pub fn observe(&self) -> Result<Observation, EnvError> {
        let ep = self.episode.as_ref().ok_or(EnvError::NotReset)?;
        Ok(build_observation(
            &self.config.robot,
            &ep.robot,
            &ep.scene.world,
            &ep.scene.goal,
        )?)
    }

    pub fn step(&mut self, action: &Action) -> Result<StepOutcome, EnvError> {
        let config = Arc::clone(&self.config);
        let ep = self.episode.as_mut().ok_or(EnvError::NotReset)?;
        if let Some(t) = ep.termination {
            return Err(EnvError::Terminated(t.as_str()));
        }
        let robot = &config.robot;
        let episode = &config.episode;
        let world = &ep.scene.world;
        let goal = ep.scene.goal;

        let clamping = episode.variant == RewardVariant::Clamping;
        let dyn_step = step_dynamics(robot, &ep.robot, action, episode.step_time, clamping)?;
        let frames = forward_kinematics(robot, &dyn_step.state)?;
        let collided = find_collision(robot, &frames, world).is_some();

        let ee = frames.ee.position();
        let goal_distance = ee.distance(goal.position());
        let metrics = ep.tracker.update(&ep.scene.ee_path, ee);
        let observation = build_observation(robot, &dyn_step.state, world, &goal)?;
        let clearance = if clamping {
            f64::INFINITY
        } else {
            let lidar_min = observation
                .front_scan
                .iter()
                .chain(&observation.rear_scan)
                .fold(f64::INFINITY, |m, &r| m.min(r))
                * robot.lidar.max_range;
            lidar_min.min(body_clearance(robot, &frames, world))
        };

        let (mut terms, reward_state) = compute_step_reward(
            &config.reward,
            episode,
            &ep.reward,
            &StepInputs {
                delta_deviation: metrics.delta_deviation,
                delta_progress: metrics.delta_progress,
                path_length: ep.scene.ee_path.total_length().max(f64::MIN_POSITIVE),
                goal_distance,
                clearance,
            },
        )?;

        let mut inside = goal_distance <= ep.tolerance;
        if episode.check_orientation {
            inside &= wrap_angle(frames.ee.theta - goal.theta).abs() <= episode.orientation_tolerance;
        }
        ep.hold_steps = if inside { ep.hold_steps + 1 } else { 0 };
        ep.steps += 1;

        let termination = if collided {
            Some(Termination::Collision)
        } else if ep.steps >= episode.timeout_steps() {
            Some(Termination::Timeout)
        } else if dyn_step.joint_limit_hit {
            Some(Termination::JointLimit)
        } else if ep.hold_steps >= episode.hold_steps() {
            Some(Termination::Success)
        } else {
            None
        };
        if let Some(t) = termination {
            terms.terminal = terminal_reward(&config.reward, episode.variant, t)?;
        }
        let reward = terms.total();

        ep.robot = dyn_step.state;
        ep.reward = reward_state;
        ep.termination = termination;
        ep.episode_return += reward;

        Ok(StepOutcome {
            observation,
            reward,
            terms,
            terminated: termination,
            info: StepInfo {
                goal_distance,
                hold_progress: ep.hold_steps as f64 * episode.step_time,
                path_deviation: metrics.deviation,
                path_progress: metrics.progress / ep.scene.ee_path.total_length().max(f64::MIN_POSITIVE),
            },
        })
    }
}

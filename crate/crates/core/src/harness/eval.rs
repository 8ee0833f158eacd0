use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envgen::{derive_seed, Env, EnvConfig, EnvError, EnvKind, Observation, TraceRecord, TraceWriter};
use crate::policy::{argmax_bins, bins_to_action, sample_bins, CheckpointError, Policy};
use crate::reward::Termination;
use crate::sim::{forward_kinematics, Action};

use super::Config;

/// Chooses an action from the current environment state.
pub trait Controller {
    /// Called before each episode with that episode's scene seed.
    fn begin_episode(&mut self, _seed: u64) {}
    fn act(&mut self, env: &Env, obs: &Observation) -> Action;
}

/// Always commands zero acceleration.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroController;

impl Controller for ZeroController {
    fn act(&mut self, env: &Env, _obs: &Observation) -> Action {
        Action::zero(env.config().robot.num_joints())
    }
}

/// Privileged controller that drives the end effector straight at the goal
/// with the base, holding the arm still. Only meaningful in open scenes.
#[derive(Debug, Clone, Copy)]
pub struct ScriptedController {
    /// Proportional gain from end-effector error to base velocity, 1/s.
    pub gain: f64,
}

impl Default for ScriptedController {
    fn default() -> Self {
        Self { gain: 1.0 }
    }
}

impl Controller for ScriptedController {
    fn act(&mut self, env: &Env, _obs: &Observation) -> Action {
        let robot = &env.config().robot;
        let tau = env.config().episode.step_time;
        let ep = env.episode().expect("controller used on a running episode");
        let state = &ep.robot;
        let ee = forward_kinematics(robot, state).expect("valid state").ee;
        let err = (ep.scene.goal.position() - ee.position()).rotate(-state.base_pose.theta);
        let desired = [self.gain * err.x, self.gain * err.y, 0.0];
        let mut action = Action::zero(robot.num_joints());
        for i in 0..3 {
            let v = desired[i].clamp(-robot.max_base_vel[i], robot.max_base_vel[i]);
            let a = robot.max_base_acc[i];
            action.base_acc[i] = ((v - state.base_vel[i]) / tau).clamp(-a, a);
        }
        for (acc, v) in action.joint_acc.iter_mut().zip(&state.joint_vel) {
            *acc = (-v / tau).clamp(-robot.max_joint_acc, robot.max_joint_acc);
        }
        action
    }
}

/// Runs a trained policy, greedily or by sampling.
#[derive(Debug, Clone)]
pub struct PolicyController {
    policy: Arc<Policy>,
    sample: bool,
    rng: ChaCha8Rng,
}

impl PolicyController {
    pub fn new(policy: Arc<Policy>, sample: bool) -> Self {
        Self {
            policy,
            sample,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }
}

impl Controller for PolicyController {
    fn begin_episode(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5eed));
    }

    fn act(&mut self, env: &Env, obs: &Observation) -> Action {
        let robot = &env.config().robot;
        let out = self
            .policy
            .forward(&obs.features(robot))
            .expect("policy input matches the observation layout");
        let n = self.policy.config().bins();
        let chosen = if self.sample {
            sample_bins(&out, n, &mut self.rng)
        } else {
            argmax_bins(&out, n)
        };
        bins_to_action(robot, &chosen.bins, n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub seed: u64,
    pub termination: Termination,
    pub steps: u64,
    pub episode_return: f64,
    pub final_goal_distance: f64,
}

/// Runs one episode to termination.
pub fn run_episode<C: Controller + ?Sized>(
    env: &mut Env,
    controller: &mut C,
    seed: u64,
    tolerance: f64,
) -> Result<EpisodeResult, EnvError> {
    match run_episode_inner(env, controller, seed, tolerance, None::<&mut TraceWriter<io::Sink>>) {
        Ok(r) => Ok(r),
        Err(EvalError::Env(e)) => Err(e),
        Err(e) => unreachable!("no trace output: {e}"),
    }
}

/// Runs one episode to termination, logging every step to `trace`.
pub fn run_episode_traced<C: Controller + ?Sized, W: Write>(
    env: &mut Env,
    controller: &mut C,
    seed: u64,
    tolerance: f64,
    trace: &mut TraceWriter<W>,
) -> Result<EpisodeResult, EvalError> {
    run_episode_inner(env, controller, seed, tolerance, Some(trace))
}

fn run_episode_inner<C: Controller + ?Sized, W: Write>(
    env: &mut Env,
    controller: &mut C,
    seed: u64,
    tolerance: f64,
    mut trace: Option<&mut TraceWriter<W>>,
) -> Result<EpisodeResult, EvalError> {
    controller.begin_episode(seed);
    let mut obs = env.reset(seed, tolerance)?;
    if let Some(t) = trace.as_deref_mut() {
        let ep = env.episode().expect("episode running");
        t.write(&TraceRecord::Episode {
            seed,
            tolerance,
            scene: Box::new(ep.scene.clone()),
        })?;
    }
    loop {
        let action = controller.act(env, &obs);
        let out = env.step(&action)?;
        let ep = env.episode().expect("episode running");
        if let Some(t) = trace.as_deref_mut() {
            let ee = forward_kinematics(&env.config().robot, &ep.robot).map_err(EnvError::from)?.ee;
            t.write(&TraceRecord::Step {
                step: ep.steps,
                state: ep.robot.clone(),
                action,
                ee,
                reward: out.reward,
                terms: out.terms,
                goal_distance: out.info.goal_distance,
                termination: out.terminated,
            })?;
        }
        if let Some(termination) = out.terminated {
            return Ok(EpisodeResult {
                seed,
                termination,
                steps: ep.steps,
                episode_return: ep.episode_return,
                final_goal_distance: out.info.goal_distance,
            });
        }
        obs = out.observation;
    }
}

/// Percent of episodes ending in each way.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct TerminationBreakdown {
    pub success: f64,
    pub collision: f64,
    pub timeout: f64,
    pub joint_limit: f64,
}

impl TerminationBreakdown {
    fn add(&mut self, t: Termination, weight: f64) {
        match t {
            Termination::Success => self.success += weight,
            Termination::Collision => self.collision += weight,
            Termination::Timeout => self.timeout += weight,
            Termination::JointLimit => self.joint_limit += weight,
        }
    }

    pub fn total(&self) -> f64 {
        self.success + self.collision + self.timeout + self.joint_limit
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kind: EnvKind,
    pub tolerance: f64,
    pub episodes: usize,
    pub successes: usize,
    /// Percent.
    pub success_rate: f64,
    /// Share of all episodes per termination reason, percent.
    pub terminations: TerminationBreakdown,
    /// Share of unsuccessful episodes per termination reason, percent.
    pub failures: TerminationBreakdown,
    /// Mean final end-effector distance to the goal over unsuccessful episodes.
    pub mean_failed_goal_distance: Option<f64>,
    pub results: Vec<EpisodeResult>,
}

impl EvalReport {
    pub fn from_results(kind: EnvKind, tolerance: f64, results: Vec<EpisodeResult>) -> Self {
        let n = results.len();
        let successes = results.iter().filter(|r| r.termination == Termination::Success).count();
        let failed = n - successes;
        let mut terminations = TerminationBreakdown::default();
        let mut failures = TerminationBreakdown::default();
        let mut failed_distance = 0.0;
        for r in &results {
            terminations.add(r.termination, 100.0 / n as f64);
            if r.termination != Termination::Success {
                failures.add(r.termination, 100.0 / failed as f64);
                failed_distance += r.final_goal_distance;
            }
        }
        Self {
            kind,
            tolerance,
            episodes: n,
            successes,
            success_rate: if n > 0 { 100.0 * successes as f64 / n as f64 } else { 0.0 },
            terminations,
            failures,
            mean_failed_goal_distance: (failed > 0).then(|| failed_distance / failed as f64),
            results,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned two-column text table.
    pub fn to_table(&self) -> String {
        let pct = |x: f64| format!("{x:.1} %");
        let rows = [
            ("environment", self.kind.as_str().to_string()),
            ("tolerance", format!("{:.3} m", self.tolerance)),
            ("episodes", self.episodes.to_string()),
            ("success rate", pct(self.success_rate)),
            ("  success", pct(self.terminations.success)),
            ("  collision", pct(self.terminations.collision)),
            ("  timeout", pct(self.terminations.timeout)),
            ("  joint limit", pct(self.terminations.joint_limit)),
            ("failures: collision", pct(self.failures.collision)),
            ("failures: timeout", pct(self.failures.timeout)),
            ("failures: joint limit", pct(self.failures.joint_limit)),
            (
                "mean failed distance",
                self.mean_failed_goal_distance
                    .map_or_else(|| "-".to_string(), |d| format!("{d:.3} m")),
            ),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v:>10}");
        }
        out
    }
}

/// Evaluates `controller` on `episodes` scenes with a fixed tolerance.
///
/// Episode `i` uses scene seed `derive_seed(seed, i)` and its own copy of the
/// controller, so the report does not depend on scheduling.
pub fn evaluate<C: Controller + Clone + Send + Sync>(
    controller: &C,
    env: &EnvConfig,
    tolerance: f64,
    episodes: usize,
    seed: u64,
) -> Result<EvalReport, EnvError> {
    let config = Arc::new(env.clone());
    let results = (0..episodes as u64)
        .into_par_iter()
        .map(|i| {
            let mut env = Env::new(Arc::clone(&config))?;
            let mut c = controller.clone();
            run_episode(&mut env, &mut c, derive_seed(seed, i), tolerance)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvalReport::from_results(env.spec.kind, tolerance, results))
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// Loads a policy checkpoint and evaluates it under `config.eval`.
pub fn evaluate_checkpoint(config: &Config, checkpoint: &Path) -> Result<EvalReport, EvalError> {
    let policy = Policy::load(config.policy_config(), checkpoint)?;
    let controller = PolicyController::new(Arc::new(policy), config.eval.sample);
    Ok(evaluate(
        &controller,
        &config.env_config(),
        config.eval_tolerance(),
        config.eval.episodes,
        config.eval.seed,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty_room() -> EnvConfig {
        let mut c = EnvConfig::default();
        c.spec.corridor.obstacle_count_range = [0, 0];
        c.spec.corridor.length_range = [4.0, 6.0];
        c
    }

    #[test]
    fn scripted_oracle_always_succeeds_in_empty_room() {
        let r = evaluate(&ScriptedController::default(), &empty_room(), 0.5, 20, 3).unwrap();
        assert_eq!(r.success_rate, 100.0, "{}", r.to_table());
        assert_eq!(r.mean_failed_goal_distance, None);
    }

    #[test]
    fn zero_action_always_times_out() {
        let r = evaluate(&ZeroController, &empty_room(), 0.5, 5, 3).unwrap();
        assert_eq!(r.success_rate, 0.0);
        assert_eq!(r.terminations.timeout, 100.0);
        assert_eq!(r.failures.timeout, 100.0);
        assert!(r.mean_failed_goal_distance.unwrap() > 0.5);
    }

    #[test]
    fn report_accounting() {
        let mk = |t| EpisodeResult {
            seed: 0,
            termination: t,
            steps: 1,
            episode_return: 0.0,
            final_goal_distance: 0.2,
        };
        let r = EvalReport::from_results(
            EnvKind::Corridor,
            0.5,
            vec![
                mk(Termination::Success),
                mk(Termination::Collision),
                mk(Termination::Timeout),
                mk(Termination::Timeout),
            ],
        );
        assert_eq!(r.successes, 1);
        assert_eq!(r.success_rate, 25.0);
        assert!((r.terminations.total() - 100.0).abs() < 1e-9);
        assert!((r.failures.total() - 100.0).abs() < 1e-9);
        assert!((r.failures.timeout - 200.0 / 3.0).abs() < 1e-9);
        assert!(r.to_table().contains("25.0 %"));
    }
}

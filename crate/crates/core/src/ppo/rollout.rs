use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adr::{AdrAdjustment, AdrConfig, AdrState};
use crate::envgen::{derive_seed, Env, EnvConfig, EpisodeState};
use crate::policy::{bins_to_action, sample_bins, Policy};
use crate::reward::Termination;

use super::PpoError;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub features: Vec<f64>,
    pub bins: Vec<usize>,
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
    pub done: bool,
    pub termination: Option<Termination>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WorkerRollout {
    pub transitions: Vec<Transition>,
    /// Value of the state after the last transition.
    pub last_value: f64,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RolloutBuffer {
    pub workers: Vec<WorkerRollout>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.workers.iter().map(|w| w.transitions.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub worker: usize,
    /// Environment steps taken by all workers when the episode ended.
    pub step: u64,
    pub episode: u64,
    pub episode_return: f64,
    pub length: u64,
    pub termination: Termination,
    pub tolerance: f64,
    pub final_goal_distance: f64,
    /// Curriculum change triggered by this episode's report.
    pub adjustment: Option<AdrAdjustment>,
}

/// Source of the goal tolerance for new episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Curriculum {
    Fixed(f64),
    Adr { config: AdrConfig, state: AdrState },
}

impl Curriculum {
    pub fn new(adr: &AdrConfig, fixed_tolerance: f64) -> Self {
        if adr.enabled {
            Curriculum::Adr {
                config: adr.clone(),
                state: AdrState::new(adr),
            }
        } else {
            Curriculum::Fixed(fixed_tolerance)
        }
    }

    pub fn tolerance(&self) -> f64 {
        match self {
            Curriculum::Fixed(t) => *t,
            Curriculum::Adr { state, .. } => state.current_tolerance(),
        }
    }

    pub fn report(&mut self, success: bool) -> Option<AdrAdjustment> {
        match self {
            Curriculum::Fixed(_) => None,
            Curriculum::Adr { config, state } => Some(state.record_episode(config, success)),
        }
    }
}

/// One rollout worker: an environment, its sampling stream and the current observation.
#[derive(Debug, Clone)]
pub struct Worker {
    pub id: usize,
    env: Env,
    rng: ChaCha8Rng,
    episode_index: u64,
    features: Vec<f64>,
}

/// Serializable part of a worker, for checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerState {
    pub id: usize,
    pub rng: ChaCha8Rng,
    pub episode_index: u64,
    pub episode: Option<EpisodeState>,
}

struct StepEnd {
    termination: Termination,
    episode_return: f64,
    length: u64,
    tolerance: f64,
    goal_distance: f64,
}

impl Worker {
    /// Worker `id` with its first episode already reset.
    pub fn new(id: usize, config: Arc<EnvConfig>, train_seed: u64, tolerance: f64) -> Result<Self, PpoError> {
        let env = Env::new(config).map_err(|source| PpoError::Worker { worker: id, source })?;
        let mut w = Self {
            id,
            env,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(train_seed, id as u64)),
            episode_index: 0,
            features: Vec::new(),
        };
        w.reset(tolerance)?;
        Ok(w)
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    /// Scene seed of this worker's `episode`-th episode.
    pub fn episode_seed(&self, episode: u64) -> u64 {
        derive_seed(derive_seed(self.env.config().spec.seed, self.id as u64), episode)
    }

    fn reset(&mut self, tolerance: f64) -> Result<(), PpoError> {
        let seed = self.episode_seed(self.episode_index);
        let obs = self
            .env
            .reset(seed, tolerance)
            .map_err(|source| PpoError::Worker { worker: self.id, source })?;
        self.features = obs.features(&self.env.config().robot);
        Ok(())
    }

    pub fn state(&self) -> WorkerState {
        WorkerState {
            id: self.id,
            rng: self.rng.clone(),
            episode_index: self.episode_index,
            episode: self.env.episode().cloned(),
        }
    }

    pub fn restore(&mut self, state: WorkerState) -> Result<(), PpoError> {
        self.id = state.id;
        self.rng = state.rng;
        self.episode_index = state.episode_index;
        self.env.restore(state.episode);
        let obs = self
            .env
            .observe()
            .map_err(|source| PpoError::Worker { worker: self.id, source })?;
        self.features = obs.features(&self.env.config().robot);
        Ok(())
    }

    fn step(&mut self, policy: &Policy) -> Result<(Transition, Option<StepEnd>), PpoError> {
        let bins = policy.config().bins();
        let out = policy.forward(&self.features)?;
        let s = sample_bins(&out, bins, &mut self.rng);
        let action = bins_to_action(&self.env.config().robot, &s.bins, bins);
        let o = self
            .env
            .step(&action)
            .map_err(|source| PpoError::Worker { worker: self.id, source })?;
        let next = o.observation.features(&self.env.config().robot);
        let transition = Transition {
            features: std::mem::replace(&mut self.features, next),
            bins: s.bins,
            log_prob: s.log_prob,
            value: out.value,
            reward: o.reward,
            done: o.terminated.is_some(),
            termination: o.terminated,
        };
        let end = o.terminated.map(|termination| {
            let ep = self.env.episode().expect("episode running");
            StepEnd {
                termination,
                episode_return: ep.episode_return,
                length: ep.steps,
                tolerance: ep.tolerance,
                goal_distance: o.info.goal_distance,
            }
        });
        Ok((transition, end))
    }
}

/// Steps every worker `n_steps` times in lockstep with a frozen policy.
///
/// Workers step in parallel; finished episodes are reported to the
/// curriculum in worker order, and the finished workers then reset with the
/// tolerance current after all of this tick's reports.
pub fn collect_rollouts(
    policy: &Policy,
    workers: &mut [Worker],
    n_steps: usize,
    curriculum: &mut Curriculum,
    steps_before: u64,
) -> Result<(RolloutBuffer, Vec<EpisodeSummary>), PpoError> {
    let mut buffer = RolloutBuffer {
        workers: workers
            .iter()
            .map(|_| WorkerRollout {
                transitions: Vec::with_capacity(n_steps),
                ..WorkerRollout::default()
            })
            .collect(),
    };
    let mut episodes = Vec::new();
    let n_workers = workers.len() as u64;
    for t in 0..n_steps {
        let results: Vec<_> = workers.par_iter_mut().map(|w| w.step(policy)).collect();
        let mut finished = Vec::new();
        for (k, r) in results.into_iter().enumerate() {
            let (transition, end) = r?;
            buffer.workers[k].transitions.push(transition);
            if let Some(end) = end {
                let adjustment = curriculum.report(end.termination == Termination::Success);
                episodes.push(EpisodeSummary {
                    worker: workers[k].id,
                    step: steps_before + (t as u64 + 1) * n_workers,
                    episode: workers[k].episode_index,
                    episode_return: end.episode_return,
                    length: end.length,
                    termination: end.termination,
                    tolerance: end.tolerance,
                    final_goal_distance: end.goal_distance,
                    adjustment,
                });
                finished.push(k);
            }
        }
        if !finished.is_empty() {
            let tolerance = curriculum.tolerance();
            let resets: Vec<&mut Worker> = workers
                .iter_mut()
                .enumerate()
                .filter(|(k, _)| finished.contains(k))
                .map(|(_, w)| w)
                .collect();
            resets
                .into_par_iter()
                .map(|w| {
                    w.episode_index += 1;
                    w.reset(tolerance)
                })
                .collect::<Result<Vec<()>, PpoError>>()?;
        }
    }
    for (w, slot) in workers.iter().zip(&mut buffer.workers) {
        slot.last_value = policy.forward(&w.features)?.value;
    }
    Ok((buffer, episodes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{NetworkSizes, PolicyConfig};

    fn short_env() -> Arc<EnvConfig> {
        let mut c = EnvConfig::default();
        c.spec.corridor.obstacle_count_range = [0, 0];
        c.spec.corridor.length_range = [6.0, 6.0];
        c.episode.timeout = 0.08;
        c.episode.hold_time = 0.04;
        Arc::new(c)
    }

    fn small_policy(env: &EnvConfig) -> Policy {
        let sizes = NetworkSizes {
            encoder_hidden: 8,
            encoder_out: 4,
            trunk_hidden: vec![16],
            bins: 7,
        };
        Policy::new(PolicyConfig::for_robot(&env.robot, sizes), 0).unwrap()
    }

    #[test]
    fn counts_transitions_across_episodes() {
        let env = short_env();
        let policy = small_policy(&env);
        let mut workers = vec![Worker::new(0, Arc::clone(&env), 1, 0.5).unwrap()];
        let mut cur = Curriculum::Fixed(0.5);
        let (buf, eps) = collect_rollouts(&policy, &mut workers, 4, &mut cur, 0).unwrap();
        assert_eq!(buf.len(), 4);
        assert_eq!(eps.len(), 2);
        let dones: Vec<bool> = buf.workers[0].transitions.iter().map(|t| t.done).collect();
        assert_eq!(dones, vec![false, true, false, true]);
        assert_eq!(eps[1].step, 4);
    }

    #[test]
    fn fixed_horizon_per_worker() {
        let env = short_env();
        let policy = small_policy(&env);
        let mut workers: Vec<_> = (0..3).map(|i| Worker::new(i, Arc::clone(&env), 1, 0.5).unwrap()).collect();
        let mut cur = Curriculum::Fixed(0.5);
        let (buf, eps) = collect_rollouts(&policy, &mut workers, 5, &mut cur, 0).unwrap();
        assert_eq!(buf.len(), 15);
        assert!(buf.workers.iter().all(|w| w.transitions.len() == 5));
        assert_eq!(eps.len(), 6);
    }

    #[test]
    fn single_worker_is_deterministic() {
        let env = short_env();
        let policy = small_policy(&env);
        let run = || {
            let mut workers = vec![Worker::new(0, Arc::clone(&env), 9, 0.5).unwrap()];
            let mut cur = Curriculum::new(&AdrConfig::default(), 0.5);
            collect_rollouts(&policy, &mut workers, 7, &mut cur, 0).unwrap()
        };
        assert_eq!(run(), run());
    }
}

//! Proximal policy optimization.
//!
//! Training alternates three phases: every worker steps its own environment
//! for `n_steps` with a frozen parameter snapshot ([`collect_rollouts`]),
//! advantages are estimated with GAE ([`compute_gae`]), and the clipped
//! surrogate is minimized for several epochs of shuffled minibatches
//! ([`ppo_update`]). [`Trainer`] owns the loop, the curriculum, logging and
//! checkpoints.

mod adam;
mod gae;
mod rollout;
mod trainer;
mod update;

pub use adam::Adam;
pub use gae::{compute_gae, gae};
pub use rollout::{
    collect_rollouts, Curriculum, EpisodeSummary, RolloutBuffer, Transition, Worker, WorkerRollout, WorkerState,
};
pub use trainer::{
    EpisodeLog, TrainSetup, Trainer, TrainerError, UpdateReport, TRAINER_MAGIC,
};
pub use update::{normalize_advantages, ppo_loss, ppo_loss_and_grad, ppo_update, LossParts, MiniBatch, UpdateStats};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envgen::EnvError;
use crate::policy::PolicyError;

#[derive(Debug, Error)]
pub enum PpoError {
    #[error("worker {worker}: {source}")]
    Worker {
        worker: usize,
        #[source]
        source: EnvError,
    },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(
        "non-finite loss in epoch {epoch}, minibatch {minibatch}: policy {policy_loss}, value {value_loss}, entropy {entropy}"
    )]
    NonFiniteLoss {
        epoch: usize,
        minibatch: usize,
        policy_loss: f64,
        value_loss: f64,
        entropy: f64,
    },
    #[error("invalid training config: {0:?}")]
    InvalidConfig(Vec<String>),
    #[error("empty rollout buffer")]
    EmptyBuffer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Linear decay to zero over the configured total steps.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub clip_range: f64,
    /// Value-function clip range; negative disables value clipping.
    pub clip_range_vf: f64,
    pub epochs: usize,
    pub gamma: f64,
    /// Steps per worker per update.
    pub n_steps: usize,
    pub minibatches: usize,
    pub workers: usize,
    pub total_steps: u64,
    pub gae_lambda: f64,
    pub learning_rate: f64,
    pub lr_schedule: LrSchedule,
    pub vf_coef: f64,
    pub ent_coef: f64,
    /// Multiplies rewards before advantage estimation; logged returns stay unscaled.
    pub reward_scale: f64,
    /// Global gradient-norm clip; non-positive disables it.
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// Updates between checkpoints; 0 writes only the final one.
    pub checkpoint_interval: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            clip_range: 0.2,
            clip_range_vf: -1.0,
            epochs: 30,
            gamma: 0.999,
            n_steps: 2048,
            minibatches: 8,
            workers: 4,
            total_steps: 1_000_000,
            gae_lambda: 0.95,
            learning_rate: 3e-4,
            lr_schedule: LrSchedule::Constant,
            vf_coef: 0.5,
            ent_coef: 0.01,
            reward_scale: 1.0,
            max_grad_norm: 0.5,
            normalize_advantages: true,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-5,
            seed: 0,
            checkpoint_interval: 10,
        }
    }
}

impl TrainConfig {
    pub fn rollout_size(&self) -> usize {
        self.workers * self.n_steps
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.clip_range > 0.0) {
            v.push("clip_range: must be positive".into());
        }
        if self.epochs == 0 {
            v.push("epochs: must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            v.push("gamma: must lie in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            v.push("gae_lambda: must lie in [0, 1]".into());
        }
        if self.n_steps == 0 || self.workers == 0 {
            v.push("n_steps/workers: must be positive".into());
        }
        if self.minibatches == 0 || !self.rollout_size().is_multiple_of(self.minibatches) {
            v.push(format!(
                "minibatches: must divide the rollout size workers * n_steps = {}",
                self.rollout_size()
            ));
        }
        if !(self.learning_rate > 0.0) {
            v.push("learning_rate: must be positive".into());
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            v.push("reward_scale: must be positive".into());
        }
        if !(self.vf_coef >= 0.0 && self.ent_coef >= 0.0) {
            v.push("vf_coef/ent_coef: must be non-negative".into());
        }
        if !((0.0..1.0).contains(&self.adam_beta1) && (0.0..1.0).contains(&self.adam_beta2) && self.adam_eps > 0.0) {
            v.push("adam_beta1/adam_beta2/adam_eps: betas in [0, 1), eps positive".into());
        }
        v
    }
}

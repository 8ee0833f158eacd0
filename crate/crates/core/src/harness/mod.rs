//! Configuration tree, evaluation protocol and static rendering.
//!
//! A single JSON document configures everything. Every section is optional
//! and missing fields take their defaults; unknown keys are rejected.
//!
//! ```json
//! {
//!   "robot":   { "base_radius": 0.3, ... },
//!   "spec":    { "kind": "corridor", "seed": 0, "corridor": { ... }, "gap": { ... } },
//!   "episode": { "tolerance": 0.5, "hold_time": 1.0, ... },
//!   "reward":  { "w_t": -15.0, ... },
//!   "hpf":     { "cell_size": 0.05, ... },
//!   "adr":     { "enabled": true, ... },
//!   "network": { "encoder_hidden": 128, ... },
//!   "train":   { "n_steps": 2048, ... },
//!   "eval":    { "episodes": 100, "seed": 1, "sample": false }
//! }
//! ```

mod eval;
mod render;

pub use eval::{
    evaluate, evaluate_checkpoint, run_episode, run_episode_traced, Controller, EpisodeResult, EvalError, EvalReport, PolicyController,
    ScriptedController, TerminationBreakdown, ZeroController,
};
pub use render::{render_field_pgm, render_snapshot, render_svg, RenderOptions};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adr::AdrConfig;
use crate::envgen::{EnvConfig, EnvSpec, EpisodeConfig};
use crate::pathfield::HpfConfig;
use crate::policy::{NetworkSizes, PolicyConfig};
use crate::ppo::{TrainConfig, TrainSetup};
use crate::reward::RewardParams;
use crate::sim::RobotConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

/// Evaluation protocol settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub episodes: usize,
    /// Base of the per-episode scene seeds.
    pub seed: u64,
    /// Fixed goal tolerance; defaults to `episode.tolerance`.
    pub tolerance: Option<f64>,
    /// Sample actions instead of taking the per-dimension argmax.
    pub sample: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            episodes: 100,
            seed: 1,
            tolerance: None,
            sample: false,
        }
    }
}

impl EvalConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.episodes == 0 {
            v.push("episodes: must be positive".into());
        }
        if let Some(t) = self.tolerance {
            if !(0.05..=0.5).contains(&t) {
                v.push(format!("tolerance: {t} outside the ADR range [0.5, 0.05]"));
            }
        }
        v
    }
}

/// The full configuration tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub robot: RobotConfig,
    pub spec: EnvSpec,
    pub episode: EpisodeConfig,
    pub reward: RewardParams,
    pub hpf: HpfConfig,
    pub adr: AdrConfig,
    pub network: NetworkSizes,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Config {
    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            robot: self.robot.clone(),
            spec: self.spec.clone(),
            episode: self.episode.clone(),
            reward: self.reward.clone(),
            hpf: self.hpf.clone(),
        }
    }

    pub fn train_setup(&self) -> TrainSetup {
        TrainSetup {
            env: self.env_config(),
            adr: self.adr.clone(),
            network: self.network.clone(),
            train: self.train.clone(),
        }
    }

    pub fn policy_config(&self) -> PolicyConfig {
        PolicyConfig::for_robot(&self.robot, self.network.clone())
    }

    pub fn eval_tolerance(&self) -> f64 {
        self.eval.tolerance.unwrap_or(self.episode.tolerance)
    }

    /// Every invariant violation, each prefixed with its field path.
    pub fn violations(&self) -> Vec<String> {
        let mut v = self.train_setup().violations();
        v.extend(self.eval.violations().into_iter().map(|s| format!("eval.{s}")));
        v
    }

    pub fn validate(self) -> Result<Self, ConfigError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(ConfigError::Invalid(v))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

pub fn parse_config(json: &str) -> Result<Config, ConfigError> {
    serde_json::from_str::<Config>(json)?.validate()
}

pub fn load_config(path: &Path) -> Result<Config, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

pub fn save_config(config: &Config, path: &Path) -> std::io::Result<()> {
    fs::write(path, config.to_json())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let c = parse_config("{}").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.reward.w_t, -15.0);
        assert_eq!(c.train.epochs, 30);
        assert_eq!(c.train.clip_range, 0.2);
    }

    #[test]
    fn out_of_range_tolerance_cites_adr_range() {
        let err = parse_config(r#"{"episode": {"tolerance": 0.6}}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("episode.tolerance"), "{msg}");
        assert!(msg.contains("[0.5, 0.05]"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(parse_config(r#"{"robot": {"wheels": 4}}"#), Err(ConfigError::Parse(_))));
        assert!(matches!(parse_config(r#"{"extra": 1}"#), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn all_violations_are_listed() {
        let err = parse_config(r#"{"train": {"epochs": 0, "gamma": 2.0}, "eval": {"episodes": 0}}"#).unwrap_err();
        let ConfigError::Invalid(v) = err else { panic!("{err}") };
        assert!(v.len() >= 3, "{v:?}");
        assert!(v.iter().any(|s| s.starts_with("train.epochs")));
        assert!(v.iter().any(|s| s.starts_with("eval.episodes")));
    }

    #[test]
    fn round_trip() {
        let mut c = Config::default();
        c.spec.seed = 77;
        c.train.workers = 1;
        c.eval.tolerance = Some(0.1);
        let back = parse_config(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }
}

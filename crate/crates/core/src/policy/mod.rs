//! The agent network and its action distribution.
//!
//! Each LIDAR scan is compressed by its own two-layer encoder; both
//! embeddings are concatenated with the proprioceptive features and the goal,
//! then a fully connected tanh trunk feeds one categorical head per action
//! dimension and a scalar value head.
//!
//! Parameters live in one flat `f64` vector described by a [`Layout`].
//! Forward passes can record a [`Tape`]; [`Policy::backward`] replays it in
//! reverse to produce exact gradients in the same flat layout.
//!
//! | block          | shape                        |
//! |----------------|------------------------------|
//! | `front.l0.w/b` | `encoder_hidden x beams`     |
//! | `front.l1.w/b` | `encoder_out x encoder_hidden` |
//! | `rear.*`       | same as `front.*`            |
//! | `trunk.lK.w/b` | `trunk_hidden[K] x fan_in`   |
//! | `heads.w/b`    | `(action_dims * bins) x last_hidden`, one row block per dimension |
//! | `value.w/b`    | `1 x last_hidden`            |

mod checkpoint;
mod distribution;
mod network;

pub use checkpoint::{CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use distribution::{argmax_bins, bins_to_action, log_softmax, sample_bins, Categorical, SampledAction};
pub use network::{Layout, LayoutEntry, Policy, PolicyBatch, Tape};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envgen::Observation;
use crate::sim::{Action, RobotConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("input has {got} features, network expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("parameter vector has {got} entries, layout needs {expected}")]
    ParamCount { expected: usize, got: usize },
    #[error("backward called before a recorded forward pass")]
    BackwardBeforeForward,
    #[error("upstream gradient shape {got:?} does not match outputs {expected:?}")]
    GradientShape {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
}

/// Layer widths; every hidden layer uses tanh.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSizes {
    pub encoder_hidden: usize,
    pub encoder_out: usize,
    pub trunk_hidden: Vec<usize>,
    /// Bins per action dimension; odd so that zero acceleration is a bin.
    pub bins: usize,
}

impl Default for NetworkSizes {
    fn default() -> Self {
        Self {
            encoder_hidden: 128,
            encoder_out: 64,
            trunk_hidden: vec![256, 256],
            bins: 7,
        }
    }
}

impl NetworkSizes {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.encoder_hidden == 0 || self.encoder_out == 0 {
            v.push("encoder_hidden/encoder_out: must be positive".into());
        }
        if self.trunk_hidden.is_empty() || self.trunk_hidden.contains(&0) {
            v.push("trunk_hidden: needs at least one positive width".into());
        }
        if self.bins < 3 || self.bins.is_multiple_of(2) {
            v.push("bins: must be odd and at least 3".into());
        }
        v
    }
}

/// Full network shape, including the input and output dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub beams: usize,
    pub proprio_dim: usize,
    pub action_dims: usize,
    pub sizes: NetworkSizes,
}

impl PolicyConfig {
    /// Shape matching [`Observation::features`] and [`Action`] for `robot`.
    pub fn for_robot(robot: &RobotConfig, sizes: NetworkSizes) -> Self {
        Self {
            beams: robot.lidar.beams,
            proprio_dim: Observation::feature_len(robot) - 2 * robot.lidar.beams,
            action_dims: Action::dims(robot.num_joints()),
            sizes,
        }
    }

    pub fn input_dim(&self) -> usize {
        2 * self.beams + self.proprio_dim
    }

    pub fn bins(&self) -> usize {
        self.sizes.bins
    }

    pub fn logits_dim(&self) -> usize {
        self.action_dims * self.sizes.bins
    }
}

/// Network output for one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    /// `action_dims` rows of `bins` logits, row-major.
    pub logits: Vec<f64>,
    pub value: f64,
}

impl PolicyOutput {
    pub fn dimension(&self, d: usize, bins: usize) -> &[f64] {
        &self.logits[d * bins..(d + 1) * bins]
    }
}

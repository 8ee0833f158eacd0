//! Tolerance curriculum.
//!
//! Episode outcomes fill a fixed window. When the window is full, a success
//! rate above `high_rate` tightens the goal tolerance by `step`, a rate below
//! `low_rate` loosens it, and either adjustment clears the window. The
//! tolerance never leaves `[min_tolerance, max_tolerance]`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdrConfig {
    pub enabled: bool,
    pub initial_tolerance: f64,
    pub min_tolerance: f64,
    pub max_tolerance: f64,
    pub window: usize,
    pub high_rate: f64,
    pub low_rate: f64,
    pub step: f64,
}

impl Default for AdrConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            initial_tolerance: 0.5,
            min_tolerance: 0.05,
            max_tolerance: 0.5,
            window: 50,
            high_rate: 0.8,
            low_rate: 0.5,
            step: 0.02,
        }
    }
}

impl AdrConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(0.05 <= self.min_tolerance && self.min_tolerance < self.max_tolerance && self.max_tolerance <= 0.5) {
            v.push("min_tolerance/max_tolerance: must satisfy 0.05 <= min < max <= 0.5".into());
        }
        if !(self.min_tolerance..=self.max_tolerance).contains(&self.initial_tolerance) {
            v.push("initial_tolerance: must lie in [min_tolerance, max_tolerance]".into());
        }
        if self.window == 0 {
            v.push("window: must be positive".into());
        }
        if !(0.0 <= self.low_rate && self.low_rate <= self.high_rate && self.high_rate <= 1.0) {
            v.push("low_rate/high_rate: must satisfy 0 <= low <= high <= 1".into());
        }
        if !(self.step > 0.0) {
            v.push("step: must be positive".into());
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdrState {
    pub tolerance: f64,
    pub outcomes: VecDeque<bool>,
    pub episodes: u64,
}

/// Result of reporting one episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdrAdjustment {
    None,
    Tightened,
    Loosened,
}

impl AdrState {
    pub fn new(config: &AdrConfig) -> Self {
        Self {
            tolerance: config.initial_tolerance,
            outcomes: VecDeque::with_capacity(config.window),
            episodes: 0,
        }
    }

    pub fn current_tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn record_episode(&mut self, config: &AdrConfig, success: bool) -> AdrAdjustment {
        self.episodes += 1;
        self.outcomes.push_back(success);
        if self.outcomes.len() < config.window {
            return AdrAdjustment::None;
        }
        let rate =
            self.outcomes.iter().filter(|&&s| s).count() as f64 / self.outcomes.len() as f64;
        let (delta, adj) = if rate > config.high_rate {
            (-config.step, AdrAdjustment::Tightened)
        } else if rate < config.low_rate {
            (config.step, AdrAdjustment::Loosened)
        } else {
            // Dead band: slide the window.
            self.outcomes.pop_front();
            return AdrAdjustment::None;
        };
        self.tolerance =
            (self.tolerance + delta).clamp(config.min_tolerance, config.max_tolerance);
        self.outcomes.clear();
        adj
    }
}

//! Procedural scenes and the episode state machine.
//!
//! Two scene families are generated from a seed:
//!
//! * **Corridor**: a long walled corridor with box obstacles hanging off
//!   alternating walls and a goal in its far third.
//! * **Gap**: a dividing wall pierced by a narrow horizontal tunnel. The base
//!   cannot pass, so the goal is only reachable by inserting the arm. The
//!   training variant has fixed tunnel dimensions; the test variant draws them.
//!
//! [`Env`] owns one episode at a time: it plans the end-effector reference
//! path at reset, steps the simulator, scores the step and decides
//! termination.

mod corridor;
mod episode;
mod gap;
mod observation;
mod trace;

pub use corridor::generate_corridor;
pub use episode::{Env, EpisodeState, StepInfo, StepOutcome};
pub use gap::{base_frontier_distance, generate_gap};
pub use observation::{build_observation, Observation};
pub use trace::{read_trace, TraceRecord, TraceWriter};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose2;
use crate::pathfield::{HpfConfig, PathError, PathPolyline};
use crate::reward::{RewardError, RewardParams, RewardVariant};
use crate::sim::{RobotConfig, RobotState, SimError, WorldGeometry};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("scene generation failed after {attempts} attempts ({last})")]
    GenerationExhausted { attempts: usize, last: String },
    #[error("spec kind {0:?} does not match the requested generator")]
    WrongKind(EnvKind),
    #[error("invalid environment spec: {0:?}")]
    InvalidSpec(Vec<String>),
    #[error("episode already terminated ({0})")]
    Terminated(&'static str),
    #[error("step called before reset")]
    NotReset,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Reward(#[from] RewardError),
}

pub const MAX_GENERATION_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    #[default]
    Corridor,
    GapTrain,
    GapTest,
}

impl EnvKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvKind::Corridor => "corridor",
            EnvKind::GapTrain => "gap_train",
            EnvKind::GapTest => "gap_test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorridorSpec {
    pub length_range: [f64; 2],
    pub width_range: [f64; 2],
    /// Inclusive range of obstacle counts.
    pub obstacle_count_range: [usize; 2],
    pub min_passage_width: f64,
    /// Extent of each obstacle along the corridor.
    pub obstacle_length_range: [f64; 2],
    /// Smallest lateral distance between the goal and a side wall.
    pub goal_wall_margin: f64,
}

impl Default for CorridorSpec {
    fn default() -> Self {
        Self {
            length_range: [6.0, 12.0],
            width_range: [1.5, 2.5],
            obstacle_count_range: [0, 4],
            min_passage_width: 0.7,
            obstacle_length_range: [0.2, 0.6],
            goal_wall_margin: 0.45,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapSpec {
    /// Tunnel width and length of the training scene.
    pub train_gap_width: f64,
    pub train_tunnel_length: f64,
    pub test_gap_width_range: [f64; 2],
    pub test_tunnel_length_range: [f64; 2],
    /// Nominal goal depth past the wall face (training scene).
    pub goal_depth: f64,
    /// Goal depth range past the wall face (test scenes).
    pub test_goal_depth_range: [f64; 2],
    /// Uniform noise amplitude on the goal pose: depth m, lateral m, heading rad.
    pub goal_offset: [f64; 3],
    /// Distance from the spawn base center to the wall face.
    pub spawn_distance: f64,
    /// Uniform noise amplitude on the spawn pose: x m, y m, heading rad.
    pub spawn_offset: [f64; 3],
    /// Uniform noise amplitude on each initial joint angle.
    pub joint_noise: f64,
    pub arena_half_width: f64,
    /// Free depth behind the tunnel exit; kept below the base diameter.
    pub pocket_depth: f64,
}

impl Default for GapSpec {
    fn default() -> Self {
        Self {
            train_gap_width: 0.3,
            train_tunnel_length: 0.5,
            test_gap_width_range: [0.25, 0.4],
            test_tunnel_length_range: [0.3, 0.8],
            goal_depth: 0.3,
            test_goal_depth_range: [0.1, 0.65],
            goal_offset: [0.05, 0.03, 0.3],
            spawn_distance: 1.2,
            spawn_offset: [0.2, 0.3, 0.3],
            joint_noise: 0.2,
            arena_half_width: 1.5,
            pocket_depth: 0.4,
        }
    }
}

impl GapSpec {
    /// Canonical training scene: every noise amplitude zero.
    pub fn noiseless() -> Self {
        Self {
            goal_offset: [0.0; 3],
            spawn_offset: [0.0; 3],
            joint_noise: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSpec {
    pub kind: EnvKind,
    /// Base seed from which per-episode seeds are derived.
    pub seed: u64,
    pub corridor: CorridorSpec,
    pub gap: GapSpec,
}

impl EnvSpec {
    pub fn violations(&self, robot: &RobotConfig) -> Vec<String> {
        let mut v = Vec::new();
        let c = &self.corridor;
        let base_diameter = 2.0 * robot.base_radius;
        let range_ok = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] > 0.0 && r[0] <= r[1];
        for (name, r) in [
            ("corridor.length_range", c.length_range),
            ("corridor.width_range", c.width_range),
            ("corridor.obstacle_length_range", c.obstacle_length_range),
            ("gap.test_gap_width_range", self.gap.test_gap_width_range),
            ("gap.test_tunnel_length_range", self.gap.test_tunnel_length_range),
            ("gap.test_goal_depth_range", self.gap.test_goal_depth_range),
        ] {
            if !range_ok(r) {
                v.push(format!("{name}: must be a positive [min, max] range"));
            }
        }
        if c.obstacle_count_range[0] > c.obstacle_count_range[1] {
            v.push("corridor.obstacle_count_range: min exceeds max".into());
        }
        if !(c.min_passage_width >= base_diameter + 0.1 - 1e-12) {
            v.push(format!(
                "corridor.min_passage_width: must be at least the base diameter plus 0.1 m ({:.2})",
                base_diameter + 0.1
            ));
        }
        if c.min_passage_width > c.width_range[0] {
            v.push("corridor.min_passage_width: exceeds the narrowest corridor width".into());
        }
        if !(c.goal_wall_margin > 0.0 && 2.0 * c.goal_wall_margin <= c.width_range[0]) {
            v.push("corridor.goal_wall_margin: must be positive and fit the narrowest corridor".into());
        }
        let g = &self.gap;
        let lo = 2.0 * robot.link_capsule_radius + 0.05;
        for (name, w) in [
            ("gap.train_gap_width", g.train_gap_width),
            ("gap.test_gap_width_range[0]", g.test_gap_width_range[0]),
            ("gap.test_gap_width_range[1]", g.test_gap_width_range[1]),
        ] {
            if !(w > lo && w < base_diameter) {
                v.push(format!(
                    "{name}: must lie in ({lo:.2}, {base_diameter:.2}) so the arm fits but the base does not"
                ));
            }
        }
        if !(g.train_tunnel_length > 0.0) {
            v.push("gap.train_tunnel_length: must be positive".into());
        }
        if !(g.pocket_depth > 0.0 && g.pocket_depth < base_diameter) {
            v.push("gap.pocket_depth: must lie in (0, base diameter)".into());
        }
        if !(g.spawn_distance > robot.base_radius) {
            v.push("gap.spawn_distance: must exceed the base radius".into());
        }
        if !(g.arena_half_width > robot.base_radius + g.spawn_offset[1]) {
            v.push("gap.arena_half_width: too small for the spawn region".into());
        }
        for (name, a) in [
            ("gap.goal_offset", g.goal_offset.to_vec()),
            ("gap.spawn_offset", g.spawn_offset.to_vec()),
            ("gap.joint_noise", vec![g.joint_noise]),
        ] {
            if a.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                v.push(format!("{name}: amplitudes must be finite and non-negative"));
            }
        }
        v
    }
}

/// Timing, tolerance and reward variant of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    /// Goal tolerance d_h when the curriculum is off, metres.
    pub tolerance: f64,
    /// Uninterrupted time inside tolerance needed for success, seconds.
    pub hold_time: f64,
    pub timeout: f64,
    pub step_time: f64,
    pub variant: RewardVariant,
    /// Also require the end-effector heading to match the goal heading.
    pub check_orientation: bool,
    pub orientation_tolerance: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            tolerance: 0.5,
            hold_time: 1.0,
            timeout: 60.0,
            step_time: 0.04,
            variant: RewardVariant::Clamping,
            check_orientation: false,
            orientation_tolerance: 0.3,
        }
    }
}

impl EpisodeConfig {
    /// Consecutive in-tolerance steps that count as success.
    pub fn hold_steps(&self) -> u64 {
        (self.hold_time / self.step_time - 1e-9).ceil() as u64
    }

    /// Steps after which the episode times out.
    pub fn timeout_steps(&self) -> u64 {
        (self.timeout / self.step_time - 1e-9).ceil() as u64
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(0.05..=0.5).contains(&self.tolerance) {
            v.push(format!(
                "tolerance: {} is outside the curriculum range [0.5, 0.05]",
                self.tolerance
            ));
        }
        for (name, x) in [
            ("hold_time", self.hold_time),
            ("timeout", self.timeout),
            ("step_time", self.step_time),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                v.push(format!("{name}: must be positive"));
            }
        }
        if !(self.hold_time < self.timeout) {
            v.push("hold_time: must be shorter than timeout".into());
        }
        if !(self.orientation_tolerance > 0.0) {
            v.push("orientation_tolerance: must be positive".into());
        }
        v
    }
}

/// Everything an environment instance needs besides its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub robot: RobotConfig,
    pub spec: EnvSpec,
    pub episode: EpisodeConfig,
    pub reward: RewardParams,
    pub hpf: HpfConfig,
}

impl EnvConfig {
    pub fn violations(&self) -> Vec<String> {
        [
            ("robot", self.robot.violations()),
            ("spec", self.spec.violations(&self.robot)),
            ("episode", self.episode.violations()),
            ("reward", self.reward.violations()),
            ("hpf", self.hpf.violations()),
        ]
        .into_iter()
        .flat_map(|(p, v)| v.into_iter().map(move |s| format!("{p}.{s}")))
        .collect()
    }
}

/// Tunnel dimensions of a gap scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tunnel {
    /// x of the wall face the robot approaches from.
    pub entrance_x: f64,
    pub center_y: f64,
    pub width: f64,
    pub length: f64,
}

/// A generated scene together with its planned end-effector path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub kind: EnvKind,
    pub world: WorldGeometry,
    pub start: RobotState,
    pub goal: Pose2,
    pub ee_path: PathPolyline,
    pub tunnel: Option<Tunnel>,
}

/// Independent per-stream seed derived from a base seed (SplitMix64 finalizer).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generates the scene for `seed` according to `config.spec.kind`.
pub fn generate_scene(config: &EnvConfig, seed: u64) -> Result<Scene, EnvError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match config.spec.kind {
        EnvKind::Corridor => generate_corridor(&config.spec, &config.robot, &config.hpf, &mut rng),
        EnvKind::GapTrain | EnvKind::GapTest => {
            generate_gap(&config.spec, &config.robot, &config.hpf, &mut rng)
        }
    }
}

/// Uniform draw from `[r[0], r[1]]`; a degenerate range returns its bound.
pub(crate) fn uniform<R: rand::Rng + ?Sized>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[1] > r[0] {
        rng.gen_range(r[0]..=r[1])
    } else {
        r[0]
    }
}

/// Symmetric uniform noise of amplitude `a`.
pub(crate) fn noise<R: rand::Rng + ?Sized>(rng: &mut R, a: f64) -> f64 {
    if a > 0.0 {
        rng.gen_range(-a..=a)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        assert!(EnvConfig::default().violations().is_empty());
    }

    #[test]
    fn step_counts() {
        let e = EpisodeConfig::default();
        assert_eq!(e.hold_steps(), 25);
        assert_eq!(e.timeout_steps(), 1500);
    }

    #[test]
    fn tolerance_outside_curriculum_range() {
        let e = EpisodeConfig {
            tolerance: 0.6,
            ..EpisodeConfig::default()
        };
        let v = e.violations();
        assert_eq!(v.len(), 1);
        assert!(v[0].starts_with("tolerance"));
        assert!(v[0].contains("[0.5, 0.05]"));
    }

    #[test]
    fn passage_must_fit_base() {
        let mut c = EnvConfig::default();
        c.spec.corridor.min_passage_width = 0.65;
        assert!(c
            .violations()
            .iter()
            .any(|s| s.starts_with("spec.corridor.min_passage_width")));
    }

    #[test]
    fn gap_width_must_admit_arm_only() {
        let mut c = EnvConfig::default();
        c.spec.gap.test_gap_width_range = [0.1, 0.7];
        let v = c.violations();
        assert!(v.iter().any(|s| s.contains("test_gap_width_range[0]")));
        assert!(v.iter().any(|s| s.contains("test_gap_width_range[1]")));
    }

    #[test]
    fn derived_seeds_differ() {
        let a: Vec<u64> = (0..100).map(|i| derive_seed(7, i)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(a.len(), b.len());
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
    }
}

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::adr::{AdrAdjustment, AdrConfig};
use crate::envgen::{derive_seed, EnvConfig};
use crate::policy::{CheckpointError, NetworkSizes, Policy, PolicyConfig};

use super::rollout::{Curriculum, WorkerState};
use super::{
    collect_rollouts, compute_gae, ppo_update, Adam, EpisodeSummary, LrSchedule, PpoError, TrainConfig,
    UpdateStats, Worker,
};

pub const TRAINER_MAGIC: &[u8; 8] = b"WBCTRAIN";

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSetup {
    pub env: EnvConfig,
    pub adr: AdrConfig,
    pub network: NetworkSizes,
    pub train: TrainConfig,
}

impl TrainSetup {
    pub fn policy_config(&self) -> PolicyConfig {
        PolicyConfig::for_robot(&self.env.robot, self.network.clone())
    }

    /// Hash of every setting that affects the trajectory, i.e. all but the
    /// step budget and checkpoint cadence, so a run can be extended on resume.
    pub fn compat_hash(&self) -> String {
        let mut s = self.clone();
        s.train.total_steps = 0;
        s.train.checkpoint_interval = 0;
        let digest = Sha256::digest(serde_json::to_vec(&s).expect("setup serializes"));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = self.env.violations();
        v.extend(self.adr.violations().into_iter().map(|s| format!("adr.{s}")));
        v.extend(self.network.violations().into_iter().map(|s| format!("network.{s}")));
        v.extend(self.train.violations().into_iter().map(|s| format!("train.{s}")));
        v
    }
}

#[derive(Debug, Error)]
pub enum TrainerError {
    #[error(transparent)]
    Ppo(#[from] PpoError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed trainer state: {0}")]
    State(String),
    #[error("checkpoint was written by an incompatible configuration")]
    ConfigMismatch,
}

/// Result of one collect / estimate / optimize cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateReport {
    pub update: u64,
    /// Environment steps taken so far, all workers combined.
    pub steps: u64,
    pub stats: UpdateStats,
    pub episodes: Vec<EpisodeSummary>,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TrainerState {
    compat_hash: String,
    adam: Adam,
    curriculum: Curriculum,
    workers: Vec<WorkerState>,
    rng: ChaCha8Rng,
    steps: u64,
    updates: u64,
}

pub struct Trainer {
    setup: TrainSetup,
    policy: Policy,
    adam: Adam,
    curriculum: Curriculum,
    workers: Vec<Worker>,
    rng: ChaCha8Rng,
    steps: u64,
    updates: u64,
}

impl Trainer {
    pub fn new(setup: TrainSetup) -> Result<Self, PpoError> {
        let v = setup.violations();
        if !v.is_empty() {
            return Err(PpoError::InvalidConfig(v));
        }
        let t = &setup.train;
        let policy = Policy::new(setup.policy_config(), derive_seed(t.seed, u64::MAX))?;
        let adam = Adam::new(policy.num_params(), t.adam_beta1, t.adam_beta2, t.adam_eps);
        let curriculum = Curriculum::new(&setup.adr, setup.env.episode.tolerance);
        let env = Arc::new(setup.env.clone());
        let workers = (0..t.workers)
            .map(|i| Worker::new(i, Arc::clone(&env), t.seed, curriculum.tolerance()))
            .collect::<Result<Vec<_>, _>>()?;
        let rng = ChaCha8Rng::seed_from_u64(derive_seed(t.seed, u64::MAX - 1));
        Ok(Self {
            setup,
            policy,
            adam,
            curriculum,
            workers,
            rng,
            steps: 0,
            updates: 0,
        })
    }

    pub fn setup(&self) -> &TrainSetup {
        &self.setup
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn tolerance(&self) -> f64 {
        self.curriculum.tolerance()
    }

    pub fn is_done(&self) -> bool {
        self.steps >= self.setup.train.total_steps
    }

    fn learning_rate(&self) -> f64 {
        let t = &self.setup.train;
        match t.lr_schedule {
            LrSchedule::Constant => t.learning_rate,
            LrSchedule::Linear => {
                let remaining = 1.0 - self.steps as f64 / t.total_steps.max(1) as f64;
                t.learning_rate * remaining.max(0.0)
            }
        }
    }

    pub fn run_update(&mut self) -> Result<UpdateReport, PpoError> {
        let t = self.setup.train.clone();
        let (mut buffer, episodes) =
            collect_rollouts(&self.policy, &mut self.workers, t.n_steps, &mut self.curriculum, self.steps)?;
        self.steps += buffer.len() as u64;
        if t.reward_scale != 1.0 {
            for tr in buffer.workers.iter_mut().flat_map(|w| w.transitions.iter_mut()) {
                tr.reward *= t.reward_scale;
            }
        }
        compute_gae(&mut buffer, t.gamma, t.gae_lambda);
        let lr = self.learning_rate();
        let stats = ppo_update(&mut self.policy, &mut self.adam, &buffer, &t, lr, &mut self.rng)?;
        self.updates += 1;
        Ok(UpdateReport {
            update: self.updates,
            steps: self.steps,
            stats,
            episodes,
            tolerance: self.curriculum.tolerance(),
        })
    }

    /// Runs updates until the step budget is spent, logging into `out_dir`
    /// and checkpointing every `checkpoint_interval` updates and at the end.
    pub fn train(&mut self, out_dir: &Path, mut on_update: impl FnMut(&UpdateReport)) -> Result<PathBuf, TrainerError> {
        fs::create_dir_all(out_dir.join("checkpoints"))?;
        let mut log = EpisodeLog::open(out_dir)?;
        while !self.is_done() {
            let report = self.run_update()?;
            log.record(&report)?;
            on_update(&report);
            let every = self.setup.train.checkpoint_interval;
            if every > 0 && self.updates.is_multiple_of(every) {
                let path = out_dir
                    .join("checkpoints")
                    .join(format!("update_{:06}.bin", self.updates));
                self.save_checkpoint(&path)?;
            }
        }
        log.flush()?;
        let last = out_dir.join("final.bin");
        self.save_checkpoint(&last)?;
        Ok(last)
    }

    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let state = TrainerState {
            compat_hash: self.setup.compat_hash(),
            adam: self.adam.clone(),
            curriculum: self.curriculum.clone(),
            workers: self.workers.iter().map(Worker::state).collect(),
            rng: self.rng.clone(),
            steps: self.steps,
            updates: self.updates,
        };
        let json = serde_json::to_vec(&state).expect("trainer state serializes");
        let mut out = self.policy.to_bytes();
        out.extend_from_slice(TRAINER_MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out
    }

    pub fn from_checkpoint_bytes(setup: TrainSetup, bytes: &[u8]) -> Result<Self, TrainerError> {
        let (policy, used) = Policy::decode(setup.policy_config(), bytes)?;
        let rest = &bytes[used..];
        if rest.len() < 16 || &rest[..8] != TRAINER_MAGIC {
            return Err(TrainerError::State("missing trainer section".into()));
        }
        let len = u64::from_le_bytes(rest[8..16].try_into().expect("8 bytes")) as usize;
        let json = rest
            .get(16..16 + len)
            .ok_or_else(|| TrainerError::State("truncated trainer section".into()))?;
        let state: TrainerState = serde_json::from_slice(json).map_err(|e| TrainerError::State(e.to_string()))?;
        if state.compat_hash != setup.compat_hash() {
            return Err(TrainerError::ConfigMismatch);
        }
        let mut trainer = Trainer::new(setup)?;
        if state.workers.len() != trainer.workers.len() {
            return Err(TrainerError::ConfigMismatch);
        }
        trainer.policy = policy;
        trainer.adam = state.adam;
        trainer.curriculum = state.curriculum;
        for (w, s) in trainer.workers.iter_mut().zip(state.workers) {
            w.restore(s)?;
        }
        trainer.rng = state.rng;
        trainer.steps = state.steps;
        trainer.updates = state.updates;
        Ok(trainer)
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<(), TrainerError> {
        fs::write(path, self.to_checkpoint_bytes())?;
        Ok(())
    }

    pub fn resume(setup: TrainSetup, path: &Path) -> Result<Self, TrainerError> {
        let bytes = fs::read(path)?;
        Self::from_checkpoint_bytes(setup, &bytes)
    }
}

/// Training logs: `episodes.csv`, `adr.csv` and `updates.jsonl`, appended to.
pub struct EpisodeLog {
    episodes: BufWriter<File>,
    adr: BufWriter<File>,
    updates: BufWriter<File>,
}

impl EpisodeLog {
    pub fn open(dir: &Path) -> io::Result<Self> {
        let open = |name: &str, header: Option<&str>| -> io::Result<BufWriter<File>> {
            let path = dir.join(name);
            let fresh = !path.exists();
            let mut f = BufWriter::new(OpenOptions::new().create(true).append(true).open(path)?);
            if let (true, Some(h)) = (fresh, header) {
                writeln!(f, "{h}")?;
            }
            Ok(f)
        };
        Ok(Self {
            episodes: open(
                "episodes.csv",
                Some("step,worker,episode,return,length,termination,tolerance,final_goal_distance"),
            )?,
            adr: open("adr.csv", Some("step,tolerance"))?,
            updates: open("updates.jsonl", None)?,
        })
    }

    pub fn record(&mut self, report: &UpdateReport) -> io::Result<()> {
        for e in &report.episodes {
            writeln!(
                self.episodes,
                "{},{},{},{},{},{},{},{}",
                e.step,
                e.worker,
                e.episode,
                e.episode_return,
                e.length,
                e.termination.as_str(),
                e.tolerance,
                e.final_goal_distance
            )?;
        }
        let changed = report
            .episodes
            .iter()
            .any(|e| matches!(e.adjustment, Some(AdrAdjustment::Tightened | AdrAdjustment::Loosened)));
        if changed || report.update == 1 {
            writeln!(self.adr, "{},{}", report.steps, report.tolerance)?;
        }
        #[derive(Serialize)]
        struct Line<'a> {
            update: u64,
            steps: u64,
            tolerance: f64,
            episodes: usize,
            #[serde(flatten)]
            stats: &'a UpdateStats,
        }
        serde_json::to_writer(
            &mut self.updates,
            &Line {
                update: report.update,
                steps: report.steps,
                tolerance: report.tolerance,
                episodes: report.episodes.len(),
                stats: &report.stats,
            },
        )?;
        self.updates.write_all(b"\n")
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.episodes.flush()?;
        self.adr.flush()?;
        self.updates.flush()
    }
}

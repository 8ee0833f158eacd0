use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::geometry::Pose2;
use crate::reward::{RewardTerms, Termination};
use crate::sim::{Action, RobotState};

use super::Scene;

/// One line of an episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum TraceRecord {
    /// Written once at the start of an episode.
    Episode {
        seed: u64,
        tolerance: f64,
        scene: Box<Scene>,
    },
    /// Written after every step; `state` is the post-step state.
    Step {
        step: u64,
        state: RobotState,
        action: Action,
        ee: Pose2,
        reward: f64,
        terms: RewardTerms,
        goal_distance: f64,
        termination: Option<Termination>,
    },
}

/// Appends [`TraceRecord`]s as JSON lines.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn write(&mut self, record: &TraceRecord) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Parses every non-empty line of a JSONL trace.
pub fn read_trace<R: BufRead>(input: R) -> io::Result<Vec<TraceRecord>> {
    let mut records = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(io::Error::other)?);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_record_round_trip() {
        let rec = TraceRecord::Step {
            step: 3,
            state: RobotState::at_rest(Pose2::new(0.1, 0.2, 0.3), vec![0.5, -0.25, 1.0 / 3.0]),
            action: Action::zero(3),
            ee: Pose2::new(1.0, 2.0, 0.1),
            reward: -0.1 / 3.0,
            terms: RewardTerms::default(),
            goal_distance: 0.7,
            termination: Some(Termination::Collision),
        };
        let mut w = TraceWriter::new(Vec::new());
        w.write(&rec).unwrap();
        w.write(&rec).unwrap();
        let bytes = w.into_inner();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.lines().next().unwrap().contains("\"record\":\"step\""));
        let back = read_trace(&bytes[..]).unwrap();
        assert_eq!(back, vec![rec.clone(), rec]);
    }
}

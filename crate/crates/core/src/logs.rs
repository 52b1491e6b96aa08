//! Line-delimited structured logs: per-step trajectory records and
//! per-iteration training records. One JSON document per line; field order is
//! fixed by the struct definitions here.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Rotation3;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::env::RewardBreakdown;
use crate::physics::{Mat3, QuadState};
use crate::{Error, Result};

/// One record per env step per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub time_s: f64,
    pub agent: usize,
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    /// Attitude quaternion (w, x, y, z).
    pub rotation: [f64; 4],
    pub action: [f64; 4],
    pub reward: RewardBreakdown,
    pub next_seq_index: usize,
    pub gates_passed_total: usize,
    pub laps_done: usize,
    pub crashed: bool,
    pub finished: bool,
}

impl TrajectoryRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn from_state(
        step: usize,
        time_s: f64,
        agent: usize,
        state: &QuadState,
        action: [f64; 4],
        reward: RewardBreakdown,
        status: &crate::env::RaceStatus,
    ) -> Self {
        Self {
            step,
            time_s,
            agent,
            position: [state.position.x, state.position.y, state.position.z],
            velocity: [state.lin_vel.x, state.lin_vel.y, state.lin_vel.z],
            rotation: quat_wxyz(&state.rotation),
            action,
            reward,
            next_seq_index: status.next_seq_index,
            gates_passed_total: status.gates_passed_total,
            laps_done: status.laps_done,
            crashed: status.crashed,
            finished: status.finished,
        }
    }

    pub fn speed(&self) -> f64 {
        (self.velocity[0] * self.velocity[0]
            + self.velocity[1] * self.velocity[1]
            + self.velocity[2] * self.velocity[2])
            .sqrt()
    }
}

/// Unit quaternion (w, x, y, z) of a rotation matrix.
pub fn quat_wxyz(rotation: &Mat3) -> [f64; 4] {
    let q = nalgebra::UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(
        *rotation,
    ));
    [q.w, q.i, q.j, q.k]
}

/// Append-only JSONL writer, flushed per record.
pub struct JsonlWriter<T> {
    out: BufWriter<File>,
    _marker: std::marker::PhantomData<T>,
}

impl<T: Serialize> JsonlWriter<T> {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        Ok(Self { out: BufWriter::new(File::create(path)?), _marker: std::marker::PhantomData })
    }

    pub fn append(&mut self, record: &T) -> Result<()> {
        let line =
            serde_json::to_string(record).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        self.out.write_all(line.as_bytes())?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}

/// Read a whole JSONL file back.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| Error::Io(std::io::Error::other(format!("line {}: {e}", n + 1))))?;
        out.push(record);
    }
    Ok(out)
}

//! Trajectory datasets and the `frame,agent_id,x,y[,vx,vy]` CSV format.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::state::{AgentId, AgentState, Snapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceTag {
    GroundTruth,
    Observation,
    Estimate,
}

/// One row of a trajectory file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub frame: u64,
    pub agent_id: AgentId,
    pub x: f64,
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vy: Option<f64>,
}

impl Record {
    pub fn new(frame: u64, agent_id: AgentId, position: Vec2) -> Self {
        Self { frame, agent_id, x: position.x, y: position.y, vx: None, vy: None }
    }

    pub fn with_velocity(mut self, v: Vec2) -> Self {
        self.vx = Some(v.x);
        self.vy = Some(v.y);
        self
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn velocity(&self) -> Option<Vec2> {
        Some(Vec2::new(self.vx?, self.vy?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    pub records: Vec<Record>,
    pub frame_rate: f64,
    pub source: SourceTag,
}

/// Per-record velocities derived from positions.
#[derive(Debug, Clone, Default)]
pub struct Velocities {
    pub values: BTreeMap<(u64, AgentId), Vec2>,
    /// Agents seen in a single frame only; their velocity is reported as zero.
    pub single_frame_agents: Vec<AgentId>,
}

impl TrajectoryDataset {
    pub fn new(records: Vec<Record>, frame_rate: f64, source: SourceTag) -> Self {
        Self { records, frame_rate, source }
    }

    /// Records sorted by (frame, agent_id).
    pub fn sorted(mut self) -> Self {
        self.records.sort_by_key(|r| (r.frame, r.agent_id));
        self
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.frame_rate
    }

    /// Checks finiteness and `(frame, agent_id)` uniqueness. Ground truth and
    /// estimates must additionally be contiguous per agent; observations may
    /// have occlusion gaps.
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return Err(Error::InvalidInput(format!("frame rate must be positive, got {}", self.frame_rate)));
        }
        let mut seen = HashSet::with_capacity(self.records.len());
        for r in &self.records {
            if !(r.x.is_finite() && r.y.is_finite()) {
                return Err(Error::Data(format!("non-finite position at frame {} agent {}", r.frame, r.agent_id)));
            }
            if !seen.insert((r.frame, r.agent_id)) {
                return Err(Error::Data(format!("duplicate record for frame {} agent {}", r.frame, r.agent_id)));
            }
        }
        if self.source != SourceTag::Observation {
            for (id, frames) in self.frames_by_agent() {
                let (first, last) = (frames[0], frames[frames.len() - 1]);
                if (last - first + 1) as usize != frames.len() {
                    return Err(Error::Data(format!("agent {id} has a gap between frames {first} and {last}")));
                }
            }
        }
        Ok(())
    }

    /// Distinct frame indices, ascending.
    pub fn frames(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.frame).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn agents(&self) -> Vec<AgentId> {
        self.records.iter().map(|r| r.agent_id).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn frame_range(&self) -> Option<(u64, u64)> {
        let min = self.records.iter().map(|r| r.frame).min()?;
        let max = self.records.iter().map(|r| r.frame).max()?;
        Some((min, max))
    }

    pub fn frames_by_agent(&self) -> BTreeMap<AgentId, Vec<u64>> {
        let mut out: BTreeMap<AgentId, Vec<u64>> = BTreeMap::new();
        for r in &self.records {
            out.entry(r.agent_id).or_default().push(r.frame);
        }
        for frames in out.values_mut() {
            frames.sort_unstable();
        }
        out
    }

    /// Positions grouped by frame then agent.
    pub fn positions_by_frame(&self) -> BTreeMap<u64, BTreeMap<AgentId, Vec2>> {
        let mut out: BTreeMap<u64, BTreeMap<AgentId, Vec2>> = BTreeMap::new();
        for r in &self.records {
            out.entry(r.frame).or_default().insert(r.agent_id, r.position());
        }
        out
    }

    /// Velocity at frame i is `(pos_i − pos_prev) · frame_rate / Δframes`; an
    /// agent's first frame copies its second frame's velocity.
    pub fn finite_difference_velocities(&self) -> Velocities {
        let mut tracks: BTreeMap<AgentId, Vec<(u64, Vec2)>> = BTreeMap::new();
        for r in &self.records {
            tracks.entry(r.agent_id).or_default().push((r.frame, r.position()));
        }
        let mut out = Velocities::default();
        for (id, mut track) in tracks {
            track.sort_by_key(|(f, _)| *f);
            if track.len() < 2 {
                out.single_frame_agents.push(id);
                out.values.insert((track[0].0, id), Vec2::ZERO);
                continue;
            }
            for w in track.windows(2) {
                let ((f0, p0), (f1, p1)) = (w[0], w[1]);
                out.values.insert((f1, id), (p1 - p0) * (self.frame_rate / (f1 - f0) as f64));
            }
            let second = out.values[&(track[1].0, id)];
            out.values.insert((track[0].0, id), second);
        }
        out
    }

    /// Snapshots of every frame, with velocities taken from the file when
    /// present and from finite differences otherwise.
    pub fn snapshots(&self) -> BTreeMap<u64, Snapshot> {
        let fd = self.finite_difference_velocities();
        let mut out: BTreeMap<u64, Snapshot> = BTreeMap::new();
        for r in &self.records {
            let v = r.velocity().unwrap_or_else(|| fd.values[&(r.frame, r.agent_id)]);
            out.entry(r.frame)
                .or_insert_with(|| Snapshot { frame: r.frame, agents: BTreeMap::new() })
                .agents
                .insert(r.agent_id, AgentState::new(r.position(), v));
        }
        out
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let with_velocity = self.records.iter().any(|r| r.vx.is_some() && r.vy.is_some());
        let mut w = csv::Writer::from_writer(writer);
        if with_velocity {
            w.write_record(["frame", "agent_id", "x", "y", "vx", "vy"])?;
        } else {
            w.write_record(["frame", "agent_id", "x", "y"])?;
        }
        for r in &self.records {
            let mut row = vec![r.frame.to_string(), r.agent_id.to_string(), fmt_f64(r.x), fmt_f64(r.y)];
            if with_velocity {
                row.push(r.vx.map(fmt_f64).unwrap_or_default());
                row.push(r.vy.map(fmt_f64).unwrap_or_default());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, frame_rate: f64, source: SourceTag) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        for required in ["frame", "agent_id", "x", "y"] {
            if !headers.iter().any(|h| h == required) {
                return Err(Error::InvalidInput(format!("trajectory file lacks column `{required}`")));
            }
        }
        let mut records = Vec::new();
        for row in rdr.deserialize() {
            let r: Record = row?;
            records.push(r);
        }
        let ds = Self { records, frame_rate, source };
        ds.validate()?;
        Ok(ds)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn read(path: impl AsRef<Path>, frame_rate: f64, source: SourceTag) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file), frame_rate, source)
    }
}

/// Shortest representation that parses back to the same bits.
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

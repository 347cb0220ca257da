//! Agent states and the sliding window of tracked snapshots.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{clamp_length, Vec2};

pub type AgentId = u32;

/// Default hard speed cap, m/s (pedestrian sprint bound).
pub const DEFAULT_V_CAP: f64 = 5.0;

/// Position and velocity of one pedestrian at one timestep, ground-space meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgentState {
    pub position: Vec2,
    pub velocity: Vec2,
}

impl AgentState {
    pub fn new(position: Vec2, velocity: Vec2) -> Self {
        Self { position, velocity }
    }

    pub fn at(x: f64, y: f64) -> Self {
        Self::new(Vec2::new(x, y), Vec2::ZERO)
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.velocity.is_finite()
    }

    pub fn with_speed_cap(mut self, v_cap: f64) -> Self {
        self.velocity = clamp_length(self.velocity, v_cap);
        self
    }
}

/// All present agents at one frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Snapshot {
    pub frame: u64,
    pub agents: BTreeMap<AgentId, AgentState>,
}

impl Snapshot {
    pub fn new(frame: u64, agents: BTreeMap<AgentId, AgentState>) -> Self {
        Self { frame, agents }
    }

    pub fn get(&self, id: AgentId) -> Option<&AgentState> {
        self.agents.get(&id)
    }
}

/// Agents that appeared in or vanished from a snapshot relative to its predecessor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Presence {
    pub entered: BTreeSet<AgentId>,
    pub exited: BTreeSet<AgentId>,
}

/// The last `k + 1` snapshots of tracked states.
///
/// Snapshots are reference-counted, so cloning the history hands a reader an
/// immutable view of the window without copying states.
#[derive(Debug, Clone)]
pub struct StateHistory {
    capacity: usize,
    dt: f64,
    window: VecDeque<Arc<Snapshot>>,
    presence: VecDeque<Presence>,
}

impl StateHistory {
    /// A window holding `k + 1` snapshots spaced `dt` seconds apart.
    pub fn new(k: usize, dt: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("window k must be at least 1".into()));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidInput(format!("timestep must be positive, got {dt}")));
        }
        Ok(Self {
            capacity: k + 1,
            dt,
            window: VecDeque::with_capacity(k + 1),
            presence: VecDeque::with_capacity(k + 1),
        })
    }

    /// Appends `snapshot`, evicting the oldest one when full.
    ///
    /// The snapshot's frame must directly follow the newest frame in the window.
    pub fn push(&mut self, snapshot: Snapshot) -> Result<()> {
        let presence = match self.window.back() {
            Some(last) => {
                if snapshot.frame != last.frame + 1 {
                    return Err(Error::FrameMismatch { expected: last.frame + 1, got: snapshot.frame });
                }
                let before: BTreeSet<_> = last.agents.keys().copied().collect();
                let after: BTreeSet<_> = snapshot.agents.keys().copied().collect();
                Presence {
                    entered: after.difference(&before).copied().collect(),
                    exited: before.difference(&after).copied().collect(),
                }
            }
            None => Presence::default(),
        };
        if self.window.len() == self.capacity {
            self.window.pop_front();
            self.presence.pop_front();
        }
        self.window.push_back(Arc::new(snapshot));
        self.presence.push_back(presence);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Window size parameter `k` (capacity − 1).
    pub fn k(&self) -> usize {
        self.capacity - 1
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn snapshots(&self) -> impl ExactSizeIterator<Item = &Snapshot> + DoubleEndedIterator {
        self.window.iter().map(|s| s.as_ref())
    }

    pub fn get(&self, index: usize) -> Option<&Snapshot> {
        self.window.get(index).map(|s| s.as_ref())
    }

    pub fn oldest(&self) -> Option<&Snapshot> {
        self.window.front().map(|s| s.as_ref())
    }

    pub fn newest(&self) -> Option<&Snapshot> {
        self.window.back().map(|s| s.as_ref())
    }

    /// Timestamp of a snapshot, seconds.
    pub fn timestamp(&self, snapshot: &Snapshot) -> f64 {
        snapshot.frame as f64 * self.dt
    }

    /// Entry/exit record of the snapshot at `index`.
    pub fn presence(&self, index: usize) -> Option<&Presence> {
        self.presence.get(index)
    }

    /// Agents present in every snapshot of the window, in id order.
    pub fn persistent_agents(&self) -> Vec<AgentId> {
        let Some(first) = self.window.front() else {
            return Vec::new();
        };
        first
            .agents
            .keys()
            .copied()
            .filter(|id| self.window.iter().all(|s| s.agents.contains_key(id)))
            .collect()
    }

    /// The positions of one agent across the window, oldest first, if it is
    /// present throughout.
    pub fn track_of(&self, id: AgentId) -> Option<Vec<AgentState>> {
        self.window.iter().map(|s| s.agents.get(&id).copied()).collect()
    }
}

//! Static world description: obstacles, goals, timestep and bounds.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Bounds, Segment, Vec2};
use crate::state::AgentId;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub dt: f64,
    pub bounds: Bounds,
    pub obstacles: Vec<Segment>,
    pub goals: BTreeMap<AgentId, Vec2>,
}

/// On-disk layout: `{"dt", "bounds": [xmin, ymin, xmax, ymax],
/// "obstacles": [[x0, y0, x1, y1], ...], "goals": {"id": [x, y]}}`.
#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    dt: f64,
    bounds: [f64; 4],
    #[serde(default)]
    obstacles: Vec<[f64; 4]>,
    #[serde(default)]
    goals: BTreeMap<AgentId, [f64; 2]>,
}

impl Scenario {
    pub fn new(dt: f64, bounds: Bounds) -> Self {
        Self { dt, bounds, obstacles: Vec::new(), goals: BTreeMap::new() }
    }

    pub fn goal(&self, id: AgentId) -> Result<Vec2> {
        self.goals.get(&id).copied().ok_or(Error::MissingGoal(id))
    }

    /// Checks `dt > 0`, bounds, and that obstacle endpoints lie inside the bounds.
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidInput(format!("scenario dt must be positive, got {}", self.dt)));
        }
        if !self.bounds.is_valid() {
            return Err(Error::InvalidInput("scenario bounds are empty or non-finite".into()));
        }
        for (i, s) in self.obstacles.iter().enumerate() {
            if !self.bounds.contains(s.a) || !self.bounds.contains(s.b) {
                return Err(Error::InvalidInput(format!("obstacle {i} lies outside the scenario bounds")));
            }
        }
        if let Some((id, _)) = self.goals.iter().find(|(_, g)| !g.is_finite()) {
            return Err(Error::InvalidInput(format!("goal of agent {id} is not finite")));
        }
        Ok(())
    }

    /// Checks that every listed agent has a goal.
    pub fn require_goals(&self, agents: impl IntoIterator<Item = AgentId>) -> Result<()> {
        for id in agents {
            self.goal(id)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ScenarioFile {
            dt: self.dt,
            bounds: [self.bounds.min[0], self.bounds.min[1], self.bounds.max[0], self.bounds.max[1]],
            obstacles: self.obstacles.iter().map(|s| [s.a.x, s.a.y, s.b.x, s.b.y]).collect(),
            goals: self.goals.iter().map(|(&id, g)| (id, g.to_array())).collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        let [x0, y0, x1, y1] = file.bounds;
        let scenario = Self {
            dt: file.dt,
            bounds: Bounds { min: [x0, y0], max: [x1, y1] },
            obstacles: file
                .obstacles
                .iter()
                .map(|o| Segment::new(Vec2::new(o[0], o[1]), Vec2::new(o[2], o[3])))
                .collect(),
            goals: file.goals.into_iter().map(|(id, g)| (id, Vec2::from_array(g))).collect(),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Scenario {
        let mut s = Scenario::new(0.04, Bounds::new(Vec2::new(-10.0, -5.0), Vec2::new(10.0, 5.0)));
        s.obstacles.push(Segment::new(Vec2::new(-10.0, 2.0), Vec2::new(10.0, 2.0)));
        s.goals.insert(3, Vec2::new(4.5, -1.25));
        s
    }

    #[test]
    fn json_round_trip() {
        let s = sample();
        let back = Scenario::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn json_uses_documented_keys() {
        let v: serde_json::Value = serde_json::from_str(&sample().to_json().unwrap()).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        assert_eq!(keys, vec!["bounds", "dt", "goals", "obstacles"]);
        assert_eq!(v["goals"]["3"], serde_json::json!([4.5, -1.25]));
    }

    #[test]
    fn rejects_bad_dt_and_outside_obstacles() {
        let mut s = sample();
        s.dt = 0.0;
        assert!(s.validate().is_err());
        let mut s = sample();
        s.obstacles.push(Segment::new(Vec2::new(0.0, 0.0), Vec2::new(20.0, 0.0)));
        assert!(s.validate().is_err());
    }

    #[test]
    fn missing_goal_names_agent() {
        let s = sample();
        assert!(matches!(s.require_goals([3, 4]), Err(Error::MissingGoal(4))));
    }
}

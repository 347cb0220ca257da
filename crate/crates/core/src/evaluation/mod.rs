//! Tracking scores against ground truth: CLEAR MOT, successful tracks and
//! RMS position error.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use pathfinding::prelude::{kuhn_munkres_min, Matrix};
use serde::{Deserialize, Serialize};

use crate::dataset::TrajectoryDataset;
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::state::AgentId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Association {
    /// Nearest pairs first, after keeping still-valid correspondences.
    #[default]
    Greedy,
    /// Minimum total distance over the pairs left after persistence.
    Hungarian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    /// Association gate, m.
    pub match_radius: f64,
    /// A track succeeds when its mean error is strictly below this, m.
    pub success_threshold: f64,
    pub association: Association,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { match_radius: 1.0, success_threshold: 0.8, association: Association::Greedy }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.match_radius > 0.0 && self.success_threshold > 0.0) {
            return Err(Error::InvalidInput("match_radius and success_threshold must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotScore {
    pub mota: f64,
    /// Mean distance over matches, m (0 when nothing matched).
    pub motp: f64,
    pub misses: usize,
    pub false_positives: usize,
    pub id_switches: usize,
    pub matches: usize,
    /// Ground-truth object-frames.
    pub gt_objects: usize,
}

type FrameMap = BTreeMap<u64, BTreeMap<AgentId, Vec2>>;

fn shared_frames(gt: &TrajectoryDataset, est: &TrajectoryDataset) -> Result<(FrameMap, FrameMap)> {
    let (g0, g1) = gt.frame_range().ok_or_else(|| Error::Data("ground truth is empty".into()))?;
    if let Some((e0, e1)) = est.frame_range() {
        if e1 < g0 || e0 > g1 {
            return Err(Error::Data(format!("estimate frames {e0}..={e1} do not overlap ground truth {g0}..={g1}")));
        }
    }
    Ok((gt.positions_by_frame(), est.positions_by_frame()))
}

/// CLEAR MOT over every ground-truth frame.
pub fn clear_mot(gt: &TrajectoryDataset, est: &TrajectoryDataset, cfg: &MatchConfig) -> Result<MotScore> {
    cfg.validate()?;
    let (gt_frames, est_frames) = shared_frames(gt, est)?;
    let empty = BTreeMap::new();
    let gate = cfg.match_radius;
    let mut previous: BTreeMap<AgentId, AgentId> = BTreeMap::new();
    let mut last_match: BTreeMap<AgentId, AgentId> = BTreeMap::new();
    let (mut misses, mut fps, mut switches, mut matches, mut objects) = (0, 0, 0, 0, 0);
    let mut distance_sum = 0.0;

    for (frame, g) in &gt_frames {
        let h = est_frames.get(frame).unwrap_or(&empty);
        let mut pairs: Vec<(AgentId, AgentId, f64)> = Vec::new();
        for (&gid, &eid) in &previous {
            if let (Some(gp), Some(ep)) = (g.get(&gid), h.get(&eid)) {
                let d = gp.distance(*ep);
                if d <= gate {
                    pairs.push((gid, eid, d));
                }
            }
        }
        let used_g: BTreeSet<AgentId> = pairs.iter().map(|p| p.0).collect();
        let used_h: BTreeSet<AgentId> = pairs.iter().map(|p| p.1).collect();
        let free_g: Vec<(AgentId, Vec2)> = g.iter().filter(|(id, _)| !used_g.contains(id)).map(|(i, p)| (*i, *p)).collect();
        let free_h: Vec<(AgentId, Vec2)> = h.iter().filter(|(id, _)| !used_h.contains(id)).map(|(i, p)| (*i, *p)).collect();
        pairs.extend(match cfg.association {
            Association::Greedy => greedy(&free_g, &free_h, gate),
            Association::Hungarian => hungarian(&free_g, &free_h, gate),
        });

        let mut current = BTreeMap::new();
        for &(gid, eid, d) in &pairs {
            if last_match.get(&gid).is_some_and(|&prev| prev != eid) {
                switches += 1;
            }
            last_match.insert(gid, eid);
            current.insert(gid, eid);
            distance_sum += d;
        }
        objects += g.len();
        matches += pairs.len();
        misses += g.len() - pairs.len();
        fps += h.len() - pairs.len();
        previous = current;
    }
    if objects == 0 {
        return Err(Error::Data("ground truth is empty".into()));
    }
    Ok(MotScore {
        mota: 1.0 - (misses + fps + switches) as f64 / objects as f64,
        motp: if matches > 0 { distance_sum / matches as f64 } else { 0.0 },
        misses,
        false_positives: fps,
        id_switches: switches,
        matches,
        gt_objects: objects,
    })
}

fn greedy(g: &[(AgentId, Vec2)], h: &[(AgentId, Vec2)], gate: f64) -> Vec<(AgentId, AgentId, f64)> {
    let mut candidates: Vec<(f64, AgentId, AgentId)> = g
        .iter()
        .flat_map(|(gi, gp)| h.iter().map(move |(hi, hp)| (gp.distance(*hp), *gi, *hi)))
        .filter(|c| c.0 <= gate)
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let (mut taken_g, mut taken_h) = (BTreeSet::new(), BTreeSet::new());
    let mut out = Vec::new();
    for (d, gi, hi) in candidates {
        if !taken_g.contains(&gi) && !taken_h.contains(&hi) {
            taken_g.insert(gi);
            taken_h.insert(hi);
            out.push((gi, hi, d));
        }
    }
    out
}

fn hungarian(g: &[(AgentId, Vec2)], h: &[(AgentId, Vec2)], gate: f64) -> Vec<(AgentId, AgentId, f64)> {
    if g.is_empty() || h.is_empty() {
        return Vec::new();
    }
    // Costs in micrometers; a gated pair costs more than any feasible total,
    // so the solution maximizes the number of matches first.
    let forbidden: i64 = 1 << 50;
    let (rows, cols, transposed) = if g.len() <= h.len() { (g, h, false) } else { (h, g, true) };
    let weights = Matrix::from_fn(rows.len(), cols.len(), |(r, c)| {
        let d = rows[r].1.distance(cols[c].1);
        if d <= gate { (d * 1e6).round() as i64 } else { forbidden }
    });
    let (_, assignment) = kuhn_munkres_min(&weights);
    assignment
        .into_iter()
        .enumerate()
        .filter_map(|(r, c)| {
            let d = rows[r].1.distance(cols[c].1);
            (d <= gate).then(|| if transposed { (cols[c].0, rows[r].0, d) } else { (rows[r].0, cols[c].0, d) })
        })
        .collect()
}

/// Per-agent success under identity pairing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSuccess {
    pub successful_tracks: usize,
    pub total_tracks: usize,
    pub id_switches: usize,
    /// Estimated agents absent from the ground truth.
    pub false_tracks: Vec<AgentId>,
    /// Mean error of each ground-truth agent over the frames it was
    /// estimated; infinite when it never was.
    pub mean_errors: BTreeMap<AgentId, f64>,
}

impl TrackSuccess {
    pub fn success_rate(&self) -> f64 {
        if self.total_tracks == 0 {
            0.0
        } else {
            self.successful_tracks as f64 / self.total_tracks as f64
        }
    }
}

pub fn success_and_switches(gt: &TrajectoryDataset, est: &TrajectoryDataset, cfg: &MatchConfig) -> Result<TrackSuccess> {
    let mot = clear_mot(gt, est, cfg)?;
    let est_pos: BTreeMap<(u64, AgentId), Vec2> = est.records.iter().map(|r| ((r.frame, r.agent_id), r.position())).collect();
    let mut sums: BTreeMap<AgentId, (f64, usize)> = BTreeMap::new();
    for r in &gt.records {
        let e = sums.entry(r.agent_id).or_insert((0.0, 0));
        if let Some(p) = est_pos.get(&(r.frame, r.agent_id)) {
            e.0 += p.distance(r.position());
            e.1 += 1;
        }
    }
    let mean_errors: BTreeMap<AgentId, f64> =
        sums.into_iter().map(|(id, (s, n))| (id, if n > 0 { s / n as f64 } else { f64::INFINITY })).collect();
    let gt_ids: BTreeSet<AgentId> = mean_errors.keys().copied().collect();
    let false_tracks = est.agents().into_iter().filter(|id| !gt_ids.contains(id)).collect();
    Ok(TrackSuccess {
        successful_tracks: mean_errors.values().filter(|&&e| e < cfg.success_threshold).count(),
        total_tracks: mean_errors.len(),
        id_switches: mot.id_switches,
        false_tracks,
        mean_errors,
    })
}

fn paired_errors(gt: &TrajectoryDataset, est: &TrajectoryDataset) -> Result<Vec<f64>> {
    let est_pos: BTreeMap<(u64, AgentId), Vec2> = est.records.iter().map(|r| ((r.frame, r.agent_id), r.position())).collect();
    let errors: Vec<f64> = gt
        .records
        .iter()
        .filter_map(|r| est_pos.get(&(r.frame, r.agent_id)).map(|p| p.distance(r.position())))
        .collect();
    if errors.is_empty() {
        return Err(Error::Data("no (frame, agent) pairs shared by ground truth and estimate".into()));
    }
    Ok(errors)
}

/// Root mean squared position error over shared (frame, agent) pairs.
pub fn rms_error(gt: &TrajectoryDataset, est: &TrajectoryDataset) -> Result<f64> {
    let e = paired_errors(gt, est)?;
    Ok((e.iter().map(|x| x * x).sum::<f64>() / e.len() as f64).sqrt())
}

/// Mean position error over shared (frame, agent) pairs.
pub fn mean_error(gt: &TrajectoryDataset, est: &TrajectoryDataset) -> Result<f64> {
    let e = paired_errors(gt, est)?;
    Ok(e.iter().sum::<f64>() / e.len() as f64)
}

/// Everything `eval` reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mota: f64,
    pub motp: f64,
    pub misses: usize,
    pub false_positives: usize,
    pub id_switches: usize,
    pub matches: usize,
    pub gt_objects: usize,
    pub successful_tracks: usize,
    pub total_tracks: usize,
    pub success_rate: f64,
    pub false_tracks: usize,
    pub rms_error: f64,
}

impl EvalReport {
    pub const KEYS: [&'static str; 12] = [
        "mota",
        "motp",
        "misses",
        "false_positives",
        "id_switches",
        "matches",
        "gt_objects",
        "successful_tracks",
        "total_tracks",
        "success_rate",
        "false_tracks",
        "rms_error",
    ];

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Header plus one row, ready for concatenation across runs.
    pub fn write_csv<W: Write>(&self, writer: W, header: bool) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(header).from_writer(writer);
        w.serialize(self)?;
        w.flush()?;
        Ok(())
    }
}

pub fn evaluate(gt: &TrajectoryDataset, est: &TrajectoryDataset, cfg: &MatchConfig) -> Result<EvalReport> {
    let mot = clear_mot(gt, est, cfg)?;
    let success = success_and_switches(gt, est, cfg)?;
    let rms = rms_error(gt, est)?;
    Ok(EvalReport {
        mota: mot.mota,
        motp: mot.motp,
        misses: mot.misses,
        false_positives: mot.false_positives,
        id_switches: mot.id_switches,
        matches: mot.matches,
        gt_objects: mot.gt_objects,
        successful_tracks: success.successful_tracks,
        total_tracks: success.total_tracks,
        success_rate: success.success_rate(),
        false_tracks: success.false_tracks.len(),
        rms_error: rms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Record, SourceTag};

    fn ds(points: &[(u64, AgentId, f64, f64)]) -> TrajectoryDataset {
        let records = points.iter().map(|&(f, id, x, y)| Record::new(f, id, Vec2::new(x, y))).collect();
        TrajectoryDataset::new(records, 25.0, SourceTag::GroundTruth)
    }

    #[test]
    fn boundary_mean_error_is_unsuccessful() {
        let gt = ds(&[(0, 1, 0.0, 0.0), (1, 1, 1.0, 0.0)]);
        let est = ds(&[(0, 1, 0.8, 0.0), (1, 1, 1.8, 0.0)]);
        let cfg = MatchConfig::default();
        let s = success_and_switches(&gt, &est, &cfg).unwrap();
        assert_eq!(s.successful_tracks, 0);
        let est = ds(&[(0, 1, 0.5, 0.0), (1, 1, 1.5, 0.0)]);
        assert_eq!(success_and_switches(&gt, &est, &cfg).unwrap().successful_tracks, 1);
    }

    #[test]
    fn estimate_only_agents_are_false_tracks() {
        let gt = ds(&[(0, 1, 0.0, 0.0)]);
        let est = ds(&[(0, 1, 0.0, 0.0), (0, 9, 5.0, 0.0)]);
        let s = success_and_switches(&gt, &est, &MatchConfig::default()).unwrap();
        assert_eq!(s.false_tracks, vec![9]);
    }

    #[test]
    fn rms_of_two_samples() {
        let gt = ds(&[(0, 1, 0.0, 0.0), (1, 1, 0.0, 0.0)]);
        let est = ds(&[(0, 1, 0.0, 0.0), (1, 1, 1.0, 0.0)]);
        assert!((rms_error(&gt, &est).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(rms_error(&gt, &ds(&[(5, 1, 0.0, 0.0)])).is_err());
    }

    #[test]
    fn empty_ground_truth_is_an_error() {
        assert!(clear_mot(&ds(&[]), &ds(&[(0, 1, 0.0, 0.0)]), &MatchConfig::default()).is_err());
    }

    #[test]
    fn hungarian_beats_greedy_on_a_trap() {
        // Greedy takes the closest pair and strands the other object.
        let gt = ds(&[(0, 1, 0.0, 0.0), (0, 2, 1.0, 0.0)]);
        let est = ds(&[(0, 10, 0.55, 0.0), (0, 11, 1.6, 0.0)]);
        let mut cfg = MatchConfig { match_radius: 0.7, ..Default::default() };
        let g = clear_mot(&gt, &est, &cfg).unwrap();
        cfg.association = Association::Hungarian;
        let h = clear_mot(&gt, &est, &cfg).unwrap();
        assert_eq!(g.matches, 1);
        assert_eq!(h.matches, 2);
    }
}

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::protocol::{DayIndex, Timestamp};

/// Position at a time; serialized as `[t, x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Waypoint {
    pub t_s: f64,
    pub x_m: f64,
    pub y_m: f64,
}

impl From<[f64; 3]> for Waypoint {
    fn from([t_s, x_m, y_m]: [f64; 3]) -> Self {
        Waypoint { t_s, x_m, y_m }
    }
}

impl From<Waypoint> for [f64; 3] {
    fn from(w: Waypoint) -> Self {
        [w.t_s, w.x_m, w.y_m]
    }
}

/// An agent moving piecewise-linearly between waypoints. It rests at the
/// first waypoint before its time and at the last one after.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Agent {
    pub id: u32,
    pub waypoints: Vec<Waypoint>,
}

impl Agent {
    pub fn stationary(id: u32, x_m: f64, y_m: f64) -> Self {
        Agent {
            id,
            waypoints: vec![Waypoint { t_s: 0.0, x_m, y_m }],
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.waypoints.is_empty() {
            return Err(SimError::ConfigInvalid(format!(
                "agent {} has no waypoints",
                self.id
            )));
        }
        if self
            .waypoints
            .iter()
            .any(|w| !(w.t_s.is_finite() && w.x_m.is_finite() && w.y_m.is_finite()))
        {
            return Err(SimError::ConfigInvalid(format!(
                "agent {} has a non-finite waypoint",
                self.id
            )));
        }
        if self.waypoints.windows(2).any(|w| w[1].t_s <= w[0].t_s) {
            return Err(SimError::ConfigInvalid(format!(
                "agent {} waypoint times must increase",
                self.id
            )));
        }
        Ok(())
    }

    pub fn position_at(&self, t: f64) -> (f64, f64) {
        let w = &self.waypoints;
        let first = w[0];
        if t <= first.t_s {
            return (first.x_m, first.y_m);
        }
        let i = w.partition_point(|p| p.t_s <= t);
        if i == w.len() {
            let last = w[w.len() - 1];
            return (last.x_m, last.y_m);
        }
        let (a, b) = (w[i - 1], w[i]);
        let f = (t - a.t_s) / (b.t_s - a.t_s);
        (a.x_m + f * (b.x_m - a.x_m), a.y_m + f * (b.y_m - a.y_m))
    }
}

pub(crate) fn distance(p: (f64, f64), q: (f64, f64)) -> f64 {
    (p.0 - q.0).hypot(p.1 - q.1)
}

/// Agent pair on one day. Ground truth keys are unordered (`agent_a < agent_b`);
/// simulator outcomes are ordered from diagnosed source to target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairDay {
    pub agent_a: u32,
    pub agent_b: u32,
    pub day: u32,
}

impl PairDay {
    pub fn unordered(a: u32, b: u32, day: u32) -> Self {
        PairDay {
            agent_a: a.min(b),
            agent_b: a.max(b),
            day,
        }
    }
}

pub(crate) fn step_times(duration_s: u64, scan_interval_s: u64) -> impl Iterator<Item = Timestamp> {
    (0..duration_s).step_by(scan_interval_s.max(1) as usize)
}

/// Seconds each unordered pair spends within `cutoff_m` per day, sampled
/// every `scan_interval_s` over `[0, duration_s)`.
pub fn ground_truth_close_time(
    agents: &[Agent],
    cutoff_m: f64,
    scan_interval_s: u64,
    duration_s: u64,
) -> BTreeMap<PairDay, u64> {
    let mut out = BTreeMap::new();
    for t in step_times(duration_s, scan_interval_s) {
        let pos: Vec<_> = agents.iter().map(|a| a.position_at(t as f64)).collect();
        let day = DayIndex::of(t).0;
        for i in 0..agents.len() {
            for j in i + 1..agents.len() {
                if distance(pos[i], pos[j]) <= cutoff_m {
                    *out.entry(PairDay::unordered(agents[i].id, agents[j].id, day))
                        .or_insert(0) += scan_interval_s;
                }
            }
        }
    }
    out
}

/// Pair-days whose close time reaches `min_duration_s`.
pub fn ground_truth_contacts(
    agents: &[Agent],
    cutoff_m: f64,
    min_duration_s: u64,
    scan_interval_s: u64,
    duration_s: u64,
) -> BTreeSet<PairDay> {
    ground_truth_close_time(agents, cutoff_m, scan_interval_s, duration_s)
        .into_iter()
        .filter(|(_, s)| *s >= min_duration_s)
        .map(|(k, _)| k)
        .collect()
}

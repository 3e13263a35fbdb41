use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::agent::{Agent, Waypoint};
use super::channel::PathLossModel;
use super::run::{run_scenario_observed, DiagnosisSnapshot};
use super::scenario::{Diagnosis, ScenarioConfig};
use super::SimError;
use crate::classifier::ThresholdClassifier;
use crate::protocol::{
    retention_days_window, rotate_id, slots_per_day, DayIndex, DeviceId, Mode, Token,
    SECONDS_PER_DAY,
};

/// (diagnosed source, alerted device, day)
pub type AlertKey = (u32, u32, u32);

/// A small random world: up to 6 agents wandering a room for up to 3 days,
/// scanning once a minute, with a few random diagnoses.
pub fn random_world(seed: u64) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let days = rng.random_range(1..=3u64);
    let duration_s = days * SECONDS_PER_DAY;
    let mut cfg = ScenarioConfig::empty(duration_s, rng.random(), Mode::Decentralized);
    cfg.scan_interval_s = 60;
    cfg.retention_days = rng.random_range(14..=21);
    cfg.channel = PathLossModel {
        p0_dbm: -60.0,
        n_exp: 2.0,
        sigma_dbm: [0.0, 2.0, 4.0, 6.0][rng.random_range(0..4)],
    };
    let room = rng.random_range(4.0..30.0);
    let n = rng.random_range(1..=6u32);
    for id in 0..n {
        let k = rng.random_range(1..=6usize);
        let mut times: Vec<f64> = (0..k)
            .map(|_| rng.random_range(0.0..duration_s as f64))
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let waypoints = times
            .into_iter()
            .map(|t| Waypoint {
                t_s: t,
                x_m: rng.random_range(0.0..room),
                y_m: rng.random_range(0.0..room),
            })
            .collect();
        cfg.agents.push(Agent { id, waypoints });
    }
    for _ in 0..rng.random_range(0..=3) {
        cfg.diagnoses.push(Diagnosis {
            agent: rng.random_range(0..n),
            time_s: rng.random_range(0..=duration_s),
            consent: rng.random_bool(0.8),
        });
    }
    cfg
}

/// Alerts recomputed from raw device stores by exhaustive scan: derive every
/// token of the source for its retention window, then sum matching close
/// time per device and day.
pub fn brute_force_alerts(
    snap: &DiagnosisSnapshot<'_>,
    cfg: &ScenarioConfig,
) -> BTreeSet<AlertKey> {
    let mut out = BTreeSet::new();
    if !snap.consent {
        return out;
    }
    let tokens = source_tokens(snap, cfg);
    for store in snap.stores {
        if store.device() == snap.source {
            continue;
        }
        let mut per_day: HashMap<u32, u64> = HashMap::new();
        for r in store.records() {
            if let Some((_, day)) = tokens.iter().find(|(t, _)| *t == r.observed_token) {
                *per_day.entry(*day).or_insert(0) += r.close_duration_s;
            }
        }
        for (day, close) in per_day {
            if close >= cfg.risk_threshold_s {
                out.insert((snap.source.0, store.device().0, day));
            }
        }
    }
    out
}

fn source_tokens(snap: &DiagnosisSnapshot<'_>, cfg: &ScenarioConfig) -> Vec<(Token, u32)> {
    let idx = snap
        .stores
        .iter()
        .position(|s| s.device() == snap.source)
        .expect("source is an agent");
    let key = snap.keys[idx];
    let mut tokens = Vec::new();
    for d in retention_days_window(snap.time_s, cfg.retention_days) {
        let seed = key.daily_seed(DayIndex(d));
        for slot in 0..slots_per_day(cfg.rotation_period_s) {
            tokens.push((
                rotate_id(&seed, DayIndex(d), slot, cfg.rotation_period_s)
                    .expect("slot in range")
                    .token,
                d,
            ));
        }
    }
    tokens
}

fn reported_alerts(snap: &DiagnosisSnapshot<'_>) -> BTreeSet<AlertKey> {
    snap.alerts
        .iter()
        .flat_map(|(dev, list)| {
            list.iter()
                .filter(|a| a.triggered)
                .map(move |a| (snap.source.0, dev.0, a.day.0))
        })
        .collect()
}

/// Outcome of running one world through both protocol flows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldCheck {
    pub seed: u64,
    pub agents: usize,
    pub diagnoses: usize,
    pub alerts: usize,
    /// Both flows alerted the same (source, device, day) set.
    pub equivalent: bool,
    pub centralized_matches_oracle: bool,
    pub decentralized_matches_oracle: bool,
    /// Every relay bundle is a set of daily seeds of a diagnosed device.
    pub relay_holds_only_seeds: bool,
    /// Every centrally alerted device logged at least one diagnosed token.
    pub central_alerts_hold_tokens: bool,
}

impl WorldCheck {
    pub fn ok(&self) -> bool {
        self.equivalent
            && self.centralized_matches_oracle
            && self.decentralized_matches_oracle
            && self.relay_holds_only_seeds
            && self.central_alerts_hold_tokens
    }
}

pub fn check_world(seed: u64) -> Result<WorldCheck, SimError> {
    let base = random_world(seed);
    let classifier = ThresholdClassifier {
        cutoff_dbm: base.default_cutoff_dbm(),
    };
    let mut alerted = Vec::new();
    let mut oracle_ok = Vec::new();
    let mut relay_ok = true;
    let mut central_ok = true;
    for mode in [Mode::Centralized, Mode::Decentralized] {
        let cfg = ScenarioConfig {
            mode,
            ..base.clone()
        };
        let mut got = BTreeSet::new();
        let mut expected = BTreeSet::new();
        run_scenario_observed(&cfg, &classifier, |snap| {
            let reported = reported_alerts(snap);
            expected.extend(brute_force_alerts(snap, &cfg));
            if let Some(relay) = snap.relay {
                relay_ok &= relay.published().iter().all(|p| {
                    p.bundle.seeds.iter().all(|(day, seed)| {
                        snap.stores.iter().zip(snap.keys).any(|(s, k)| {
                            cfg.diagnoses.iter().any(|d| d.agent == s.device().0)
                                && k.daily_seed(*day) == *seed
                        })
                    })
                });
            } else if !snap.alerts.is_empty() {
                let tokens: Vec<Token> = source_tokens(snap, &cfg)
                    .into_iter()
                    .map(|(t, _)| t)
                    .collect();
                central_ok &= snap.alerts.keys().all(|dev: &DeviceId| {
                    snap.stores
                        .iter()
                        .find(|s| s.device() == *dev)
                        .is_some_and(|s| {
                            s.records()
                                .iter()
                                .any(|r| tokens.contains(&r.observed_token))
                        })
                });
            }
            got.extend(reported);
        })?;
        oracle_ok.push(got == expected);
        alerted.push(got);
    }
    Ok(WorldCheck {
        seed,
        agents: base.agents.len(),
        diagnoses: base.diagnoses.len(),
        alerts: alerted[0].len(),
        equivalent: alerted[0] == alerted[1],
        centralized_matches_oracle: oracle_ok[0],
        decentralized_matches_oracle: oracle_ok[1],
        relay_holds_only_seeds: relay_ok,
        central_alerts_hold_tokens: central_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worlds_are_valid_and_reproducible() {
        for seed in 0..20 {
            let w = random_world(seed);
            w.validate().unwrap();
            assert!(w.agents.len() <= 6 && w.duration_s <= 3 * SECONDS_PER_DAY);
            assert_eq!(w, random_world(seed));
        }
    }

    #[test]
    fn a_few_worlds_check_out() {
        for seed in 0..3 {
            let c = check_world(seed).unwrap();
            assert!(c.ok(), "{c:?}");
        }
    }
}

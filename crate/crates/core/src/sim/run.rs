use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::agent::{distance, step_times, PairDay};
use super::channel::rss_at;
use super::scenario::{Diagnosis, ScenarioConfig};
use super::SimError;
use crate::classifier::ProximityDecider;
use crate::dataset::FeatureVector;
use crate::protocol::{
    client_match, retention_days_window, CentralizedServer, DayIndex, DecentralizedServer,
    DeviceId, DeviceKey, ExposureAlert, LocalStore, Mode, ProtocolError, Timestamp, Token,
    SECONDS_PER_DAY,
};

/// Co-located agents are treated as this far apart by the channel.
pub const MIN_DISTANCE_M: f64 = 0.1;

/// Outcome for one diagnosed source, one target and one day of the
/// source's retention window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub agent_a: u32,
    pub agent_b: u32,
    pub day: u32,
    pub true_contact: bool,
    pub alerted: bool,
    pub cumulative_close_s: u64,
    pub true_close_s: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub mode: Mode,
    /// Ordered (diagnosed source, target, day) triples.
    pub true_contact_pairs: BTreeSet<PairDay>,
    pub alerted_pairs: BTreeSet<PairDay>,
    pub sensitivity: f64,
    pub specificity: f64,
    pub rows: Vec<PairRow>,
    pub diagnoses_processed: usize,
    pub uploads_declined: usize,
    pub samples_exchanged: u64,
}

impl SimMetrics {
    fn from_rows(
        mode: Mode,
        rows: Vec<PairRow>,
        diagnoses: usize,
        declined: usize,
        samples: u64,
    ) -> Self {
        let key = |r: &PairRow| PairDay {
            agent_a: r.agent_a,
            agent_b: r.agent_b,
            day: r.day,
        };
        let true_contact_pairs: BTreeSet<_> =
            rows.iter().filter(|r| r.true_contact).map(key).collect();
        let alerted_pairs: BTreeSet<_> = rows.iter().filter(|r| r.alerted).map(key).collect();
        let negatives = rows.len() - true_contact_pairs.len();
        let hits = true_contact_pairs.intersection(&alerted_pairs).count();
        let false_alarms = alerted_pairs.difference(&true_contact_pairs).count();
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                1.0
            } else {
                num as f64 / den as f64
            }
        };
        SimMetrics {
            mode,
            sensitivity: ratio(hits, true_contact_pairs.len()),
            specificity: ratio(negatives - false_alarms, negatives),
            true_contact_pairs,
            alerted_pairs,
            rows,
            diagnoses_processed: diagnoses,
            uploads_declined: declined,
            samples_exchanged: samples,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }

    /// `agent_a,agent_b,day,true_contact,alerted,cumulative_close_s`
    pub fn pair_table_csv(&self) -> String {
        let mut out = String::from("agent_a,agent_b,day,true_contact,alerted,cumulative_close_s\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.agent_a, r.agent_b, r.day, r.true_contact, r.alerted, r.cumulative_close_s
            );
        }
        out
    }
}

/// State visible to an observer right after a diagnosis is matched.
pub struct DiagnosisSnapshot<'a> {
    pub source: DeviceId,
    pub time_s: Timestamp,
    pub consent: bool,
    /// Stores and keys in ascending agent-id order.
    pub stores: &'a [LocalStore],
    pub keys: &'a [DeviceKey],
    /// Alerts each device received for this diagnosis.
    pub alerts: &'a BTreeMap<DeviceId, Vec<ExposureAlert>>,
    /// Relay state in decentralized runs.
    pub relay: Option<&'a DecentralizedServer>,
}

enum Backend {
    Central(CentralizedServer),
    Relay(DecentralizedServer),
}

pub fn run_scenario(
    cfg: &ScenarioConfig,
    classifier: &dyn ProximityDecider,
) -> Result<SimMetrics, SimError> {
    run_scenario_observed(cfg, classifier, |_| {})
}

pub fn run_scenario_observed<F>(
    cfg: &ScenarioConfig,
    classifier: &dyn ProximityDecider,
    mut observer: F,
) -> Result<SimMetrics, SimError>
where
    F: FnMut(&DiagnosisSnapshot<'_>),
{
    cfg.validate()?;
    let pcfg = cfg.protocol_config();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);

    let mut agents = cfg.agents.clone();
    agents.sort_by_key(|a| a.id);
    let n = agents.len();
    let index: HashMap<u32, usize> = agents.iter().enumerate().map(|(i, a)| (a.id, i)).collect();

    let keys: Vec<DeviceKey> = (0..n).map(|_| DeviceKey(rng.random())).collect();
    let offsets: Vec<f64> = if cfg.device_offset_sigma_db > 0.0 {
        (0..n)
            .map(|_| cfg.device_offset_sigma_db * rng.sample::<f64, _>(StandardNormal))
            .collect()
    } else {
        vec![0.0; n]
    };
    let mut stores: Vec<LocalStore> = agents
        .iter()
        .zip(&keys)
        .map(|(a, k)| LocalStore::new(DeviceId(a.id), *k, pcfg))
        .collect();

    let mut backend = match cfg.mode {
        Mode::Centralized => {
            let mut s = CentralizedServer::new(pcfg);
            for (st, k) in stores.iter().zip(&keys) {
                s.register(st.device(), *k);
            }
            Backend::Central(s)
        }
        Mode::Decentralized => {
            let mut s = DecentralizedServer::new(cfg.retention_days);
            for st in &stores {
                s.register(st.device(), 0);
            }
            Backend::Relay(s)
        }
    };

    let mut pending: Vec<Diagnosis> = cfg.diagnoses.clone();
    pending.sort_by_key(|d| (d.time_s, d.agent));
    let mut pending: VecDeque<Diagnosis> = pending.into();

    let position_code = cfg.classifier.position.code();
    let mut truth: HashMap<PairDay, u64> = HashMap::new();
    let mut rows: BTreeMap<PairDay, PairRow> = BTreeMap::new();
    let mut declined = 0usize;
    let mut processed = 0usize;
    let mut samples = 0u64;
    let mut tokens: Vec<(u64, Token)> = vec![(u64::MAX, Token([0; 16])); n];

    let ctx = Ctx {
        cfg,
        agents_ids: agents.iter().map(|a| a.id).collect(),
        index: &index,
        keys: &keys,
    };

    for t in step_times(cfg.duration_s, cfg.scan_interval_s) {
        if t > 0 && t % SECONDS_PER_DAY == 0 {
            for s in &mut stores {
                s.purge_expired(t);
            }
            if let Backend::Relay(r) = &mut backend {
                r.prune(t);
            }
        }
        while pending.front().is_some_and(|d| d.time_s <= t) {
            let d = pending.pop_front().expect("front checked");
            declined += ctx.diagnose(
                &d,
                &mut stores,
                &mut backend,
                &truth,
                &mut rows,
                &mut observer,
            )?;
            processed += 1;
        }

        let slot = t / pcfg.rotation_period_s as u64;
        for (i, s) in stores.iter_mut().enumerate() {
            if tokens[i].0 != slot {
                tokens[i] = (slot, s.current_id(t).token);
            }
        }
        let pos: Vec<_> = agents.iter().map(|a| a.position_at(t as f64)).collect();
        let day = DayIndex::of(t).0;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d = distance(pos[i], pos[j]);
                if i < j && d <= cfg.cutoff_m {
                    *truth
                        .entry(PairDay::unordered(agents[i].id, agents[j].id, day))
                        .or_insert(0) += cfg.scan_interval_s;
                }
                if d > cfg.radio_range_m {
                    continue;
                }
                // i advertises, j listens.
                let rss = rss_at(&cfg.channel, d.max(MIN_DISTANCE_M), &mut rng)? + offsets[i];
                let verdict = classifier.decide(&FeatureVector::single(rss, position_code));
                stores[j].record_encounter(tokens[i].1, rss, t, verdict)?;
                samples += 1;
            }
        }
    }
    for d in pending {
        declined += ctx.diagnose(
            &d,
            &mut stores,
            &mut backend,
            &truth,
            &mut rows,
            &mut observer,
        )?;
        processed += 1;
    }

    Ok(SimMetrics::from_rows(
        cfg.mode,
        rows.into_values().collect(),
        processed,
        declined,
        samples,
    ))
}

struct Ctx<'a> {
    cfg: &'a ScenarioConfig,
    agents_ids: Vec<u32>,
    index: &'a HashMap<u32, usize>,
    keys: &'a [DeviceKey],
}

impl Ctx<'_> {
    /// Runs one diagnosis at its scheduled time; returns 1 if the upload was declined.
    fn diagnose<F>(
        &self,
        d: &Diagnosis,
        stores: &mut [LocalStore],
        backend: &mut Backend,
        truth: &HashMap<PairDay, u64>,
        rows: &mut BTreeMap<PairDay, PairRow>,
        observer: &mut F,
    ) -> Result<usize, SimError>
    where
        F: FnMut(&DiagnosisSnapshot<'_>),
    {
        let now = d.time_s;
        let src = self.index[&d.agent];
        let threshold = self.cfg.risk_threshold_s;

        for &target in &self.agents_ids {
            if target == d.agent {
                continue;
            }
            for day in retention_days_window(now, self.cfg.retention_days) {
                let true_close_s = truth
                    .get(&PairDay::unordered(d.agent, target, day))
                    .copied()
                    .unwrap_or(0);
                let key = PairDay {
                    agent_a: d.agent,
                    agent_b: target,
                    day,
                };
                let row = rows.entry(key).or_insert(PairRow {
                    agent_a: d.agent,
                    agent_b: target,
                    day,
                    true_contact: false,
                    alerted: false,
                    cumulative_close_s: 0,
                    true_close_s: 0,
                });
                row.true_close_s = true_close_s;
                row.true_contact = true_close_s >= threshold;
            }
        }

        let mut alerts: BTreeMap<DeviceId, Vec<ExposureAlert>> = BTreeMap::new();
        let declined = match stores[src].build_diagnosis_payload(self.cfg.mode, d.consent, now) {
            Err(ProtocolError::ConsentDeclined) => 1,
            Err(e) => return Err(e.into()),
            Ok(payload) => {
                match backend {
                    Backend::Relay(relay) => {
                        for delivery in relay.broadcast(&payload, now)? {
                            let got = client_match(
                                &stores[self.index[&delivery.device.0]],
                                &delivery.payload,
                            )?;
                            if !got.is_empty() {
                                alerts.insert(delivery.device, got);
                            }
                        }
                    }
                    Backend::Central(server) => {
                        for s in stores.iter() {
                            server.upload(s.sealed_log(now))?;
                        }
                        for m in server.server_match_centralized(&payload, now)? {
                            alerts.insert(m.device, m.alerts);
                        }
                    }
                }
                0
            }
        };

        for (device, list) in &alerts {
            for a in list {
                let key = PairDay {
                    agent_a: d.agent,
                    agent_b: device.0,
                    day: a.day.0,
                };
                if let Some(row) = rows.get_mut(&key) {
                    row.cumulative_close_s = a.cumulative_close_s;
                    row.alerted |= a.triggered;
                }
            }
        }

        observer(&DiagnosisSnapshot {
            source: DeviceId(d.agent),
            time_s: now,
            consent: d.consent,
            stores,
            keys: self.keys,
            alerts: &alerts,
            relay: match backend {
                Backend::Relay(r) => Some(r),
                Backend::Central(_) => None,
            },
        });
        Ok(declined)
    }
}

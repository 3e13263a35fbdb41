use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::ids::{day_tokens, slots_per_day, DailySeed, DeviceKey, EphemeralId, Token};
use super::payload::{DiagnosisPayload, SealedLog, SeedBundle};
use super::{
    retention_days_window, DayIndex, DeviceId, Mode, ProtocolConfig, ProtocolError, Timestamp,
};
use crate::dataset::{FeatureVector, ProximityLabel, RssStats};

/// One continuous observation of a foreign token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncounterRecord {
    pub observed_token: Token,
    pub first_seen: Timestamp,
    pub last_seen: Timestamp,
    pub rss: RssStats,
    pub close_duration_s: u64,
}

impl EncounterRecord {
    pub fn day(&self) -> DayIndex {
        DayIndex::of(self.first_seen)
    }

    pub fn rss_stats(&self) -> FeatureVector {
        FeatureVector::from_stats(&self.rss, 0)
    }
}

/// A device's own seeds plus everything it has heard, bounded by retention.
#[derive(Debug, Clone)]
pub struct LocalStore {
    device: DeviceId,
    key: DeviceKey,
    config: ProtocolConfig,
    records: Vec<EncounterRecord>,
    own_seeds: BTreeMap<DayIndex, DailySeed>,
    own_tokens: HashSet<Token>,
    /// Index of the latest record per token.
    latest: HashMap<Token, usize>,
    last_t: Option<Timestamp>,
}

impl LocalStore {
    pub fn new(device: DeviceId, key: DeviceKey, config: ProtocolConfig) -> Self {
        LocalStore {
            device,
            key,
            config,
            records: Vec::new(),
            own_seeds: BTreeMap::new(),
            own_tokens: HashSet::new(),
            latest: HashMap::new(),
            last_t: None,
        }
    }

    pub fn device(&self) -> DeviceId {
        self.device
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }

    pub fn records(&self) -> &[EncounterRecord] {
        &self.records
    }

    pub fn own_seeds(&self) -> &BTreeMap<DayIndex, DailySeed> {
        &self.own_seeds
    }

    pub fn retention_days(&self) -> u32 {
        self.config.retention_days
    }

    fn ensure_day(&mut self, day: DayIndex) -> DailySeed {
        if let Some(seed) = self.own_seeds.get(&day) {
            return *seed;
        }
        let seed = self.key.daily_seed(day);
        self.own_seeds.insert(day, seed);
        for id in day_tokens(&seed, day, self.config.rotation_period_s) {
            self.own_tokens.insert(id.token);
        }
        seed
    }

    /// The identifier this device broadcasts at `t`.
    pub fn current_id(&mut self, t: Timestamp) -> EphemeralId {
        let day = DayIndex::of(t);
        let seed = self.ensure_day(day);
        let slot = ((t - day.start()) / self.config.rotation_period_s as u64) as u32;
        debug_assert!(slot < slots_per_day(self.config.rotation_period_s));
        super::ids::rotate_id(&seed, day, slot, self.config.rotation_period_s)
            .expect("slot derived from t")
    }

    /// Logs a sighting of `token`.
    ///
    /// A sighting within `merge_gap_s` of the token's last sighting extends
    /// that record; a close verdict then credits `scan_interval_s` (capped by
    /// the elapsed time). Otherwise a fresh record starts with zero close time.
    /// Own tokens are ignored.
    pub fn record_encounter(
        &mut self,
        token: Token,
        rss_dbm: f64,
        t: Timestamp,
        verdict: ProximityLabel,
    ) -> Result<(), ProtocolError> {
        if let Some(last) = self.last_t {
            if t < last {
                return Err(ProtocolError::ClockRegression { last, t });
            }
        }
        self.last_t = Some(t);
        if self.own_tokens.contains(&token) {
            return Ok(());
        }
        if let Some(&i) = self.latest.get(&token) {
            let rec = &mut self.records[i];
            let gap = t - rec.last_seen;
            if gap <= self.config.merge_gap_s {
                if verdict == ProximityLabel::Close {
                    rec.close_duration_s += self.config.scan_interval_s.min(gap);
                }
                rec.last_seen = t;
                rec.rss.push(rss_dbm);
                return Ok(());
            }
        }
        self.records.push(EncounterRecord {
            observed_token: token,
            first_seen: t,
            last_seen: t,
            rss: RssStats::from_values([rss_dbm]),
            close_duration_s: 0,
        });
        self.latest.insert(token, self.records.len() - 1);
        Ok(())
    }

    /// Drops records last seen more than the retention period before `now`
    /// and seeds of days outside the retention window.
    pub fn purge_expired(&mut self, now: Timestamp) -> usize {
        let horizon = now.saturating_sub(self.config.retention_s());
        let before = self.records.len();
        self.records.retain(|r| r.last_seen >= horizon);
        let purged = before - self.records.len();

        let first_day = *retention_days_window(now, self.config.retention_days).start();
        let expired: Vec<DayIndex> = self
            .own_seeds
            .range(..DayIndex(first_day))
            .map(|(d, _)| *d)
            .collect();
        for day in expired {
            if let Some(seed) = self.own_seeds.remove(&day) {
                for id in day_tokens(&seed, day, self.config.rotation_period_s) {
                    self.own_tokens.remove(&id.token);
                }
            }
        }

        if purged > 0 {
            self.latest.clear();
            for (i, r) in self.records.iter().enumerate() {
                self.latest.insert(r.observed_token, i);
            }
        }
        purged
    }

    /// Seeds of the retention window, without touching stored encounters.
    pub fn seed_bundle(&self, now: Timestamp) -> SeedBundle {
        let window = retention_days_window(now, self.config.retention_days);
        SeedBundle {
            seeds: self
                .own_seeds
                .range(DayIndex(*window.start())..=DayIndex(*window.end()))
                .map(|(d, s)| (*d, *s))
                .collect(),
        }
    }

    /// Sealed copy of every record still inside retention at `now`.
    pub fn sealed_log(&self, now: Timestamp) -> SealedLog {
        let horizon = now.saturating_sub(self.config.retention_s());
        let live: Vec<EncounterRecord> = self
            .records
            .iter()
            .filter(|r| r.last_seen >= horizon)
            .cloned()
            .collect();
        SealedLog::seal(self.device, &live, &self.key.sealing_key())
    }

    /// What a diagnosed user uploads; nothing leaves without consent.
    pub fn build_diagnosis_payload(
        &self,
        mode: Mode,
        consent: bool,
        now: Timestamp,
    ) -> Result<DiagnosisPayload, ProtocolError> {
        if !consent {
            return Err(ProtocolError::ConsentDeclined);
        }
        Ok(match mode {
            Mode::Decentralized => DiagnosisPayload::Decentralized(self.seed_bundle(now)),
            Mode::Centralized => DiagnosisPayload::Centralized(self.sealed_log(now)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::SECONDS_PER_DAY;
    use proptest::prelude::*;
    use ProximityLabel::{Close, Far};

    const DAY: u64 = SECONDS_PER_DAY;

    fn store() -> LocalStore {
        LocalStore::new(DeviceId(1), DeviceKey([9u8; 32]), ProtocolConfig::default())
    }

    fn tok(b: u8) -> Token {
        Token([b; 16])
    }

    #[test]
    fn first_sighting_opens_record() {
        let mut s = store();
        s.record_encounter(tok(1), -60.0, 100, Close).unwrap();
        assert_eq!(s.records().len(), 1);
        assert_eq!(s.records()[0].close_duration_s, 0);
    }

    #[test]
    fn close_sightings_accrue_scan_interval() {
        let mut s = LocalStore::new(
            DeviceId(1),
            DeviceKey([9u8; 32]),
            ProtocolConfig {
                scan_interval_s: 5,
                ..Default::default()
            },
        );
        s.record_encounter(tok(1), -60.0, 100, Close).unwrap();
        s.record_encounter(tok(1), -61.0, 105, Close).unwrap();
        s.record_encounter(tok(1), -90.0, 110, Far).unwrap();
        assert_eq!(s.records().len(), 1);
        let r = &s.records()[0];
        assert_eq!(r.close_duration_s, 5);
        assert_eq!((r.first_seen, r.last_seen), (100, 110));
        assert_eq!(r.rss.count(), 3);
        assert_eq!(r.rss_stats().rss_min_dbm, -90.0);
    }

    #[test]
    fn long_gap_opens_second_record() {
        let mut s = store();
        s.record_encounter(tok(1), -60.0, 100, Close).unwrap();
        s.record_encounter(tok(1), -60.0, 700, Close).unwrap();
        assert_eq!(s.records().len(), 2);
        s.record_encounter(tok(1), -60.0, 701, Close).unwrap();
        assert_eq!(s.records()[1].close_duration_s, 1);
        assert_eq!(s.records()[0].close_duration_s, 0);
    }

    #[test]
    fn clock_regression_rejected() {
        let mut s = store();
        s.record_encounter(tok(1), -60.0, 100, Close).unwrap();
        assert_eq!(
            s.record_encounter(tok(2), -60.0, 99, Close),
            Err(ProtocolError::ClockRegression { last: 100, t: 99 })
        );
    }

    #[test]
    fn own_tokens_never_stored() {
        let mut s = store();
        let own = s.current_id(50).token;
        s.record_encounter(own, -40.0, 60, Close).unwrap();
        assert!(s.records().is_empty());
    }

    #[test]
    fn retention_examples() {
        let now = 30 * DAY;
        for (age_days, retention, kept) in [(15, 14, false), (1, 14, true), (20, 21, true)] {
            let mut s = LocalStore::new(
                DeviceId(1),
                DeviceKey([9u8; 32]),
                ProtocolConfig {
                    retention_days: retention,
                    ..Default::default()
                },
            );
            s.record_encounter(tok(1), -60.0, now - age_days * DAY, Close)
                .unwrap();
            let purged = s.purge_expired(now);
            assert_eq!(
                purged,
                usize::from(!kept),
                "age {age_days} retention {retention}"
            );
        }
    }

    #[test]
    fn purge_drops_old_seeds() {
        let mut s = store();
        for d in 0..20u64 {
            s.current_id(d * DAY + 10);
        }
        assert_eq!(s.own_seeds().len(), 20);
        s.purge_expired(19 * DAY + 10);
        assert_eq!(s.own_seeds().len(), 14);
        assert_eq!(*s.own_seeds().keys().next().unwrap(), DayIndex(6));
    }

    #[test]
    fn consent_gates_upload() {
        let mut s = store();
        s.current_id(0);
        assert_eq!(
            s.build_diagnosis_payload(Mode::Decentralized, false, 10),
            Err(ProtocolError::ConsentDeclined)
        );
        assert_eq!(
            s.build_diagnosis_payload(Mode::Centralized, false, 10),
            Err(ProtocolError::ConsentDeclined)
        );
    }

    #[test]
    fn decentralized_payload_carries_seeds_only() {
        let mut s = store();
        for d in 0..14u64 {
            s.current_id(d * DAY);
            s.record_encounter(tok(d as u8 + 1), -60.0, d * DAY + 1, Close)
                .unwrap();
        }
        match s
            .build_diagnosis_payload(Mode::Decentralized, true, 13 * DAY + 5)
            .unwrap()
        {
            DiagnosisPayload::Decentralized(b) => assert_eq!(b.seeds.len(), 14),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn centralized_payload_unseals_to_records() {
        let mut s = store();
        for b in 1..=3 {
            s.record_encounter(tok(b), -60.0 - b as f64, 10 * b as u64, Close)
                .unwrap();
        }
        let DiagnosisPayload::Centralized(log) = s
            .build_diagnosis_payload(Mode::Centralized, true, 100)
            .unwrap()
        else {
            panic!("expected centralized payload");
        };
        let records = log.open(&DeviceKey([9u8; 32]).sealing_key()).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(records, s.records());
    }

    proptest! {
        #[test]
        fn purge_leaves_no_expired_records(
            ages in proptest::collection::vec(0u64..40 * DAY, 0..60),
            retention in 14u32..=21,
            now_day in 40u64..60,
        ) {
            let now = now_day * DAY;
            let mut s = LocalStore::new(
                DeviceId(1),
                DeviceKey([3u8; 32]),
                ProtocolConfig { retention_days: retention, ..Default::default() },
            );
            let mut times: Vec<u64> = ages.iter().map(|a| now - a).collect();
            times.sort();
            for (i, t) in times.iter().enumerate() {
                s.record_encounter(Token([(i % 250) as u8 + 1; 16]), -70.0, *t, Close).unwrap();
            }
            s.purge_expired(now);
            let horizon = now - retention as u64 * DAY;
            prop_assert!(s.records().iter().all(|r| r.last_seen >= horizon));
            let snapshot = s.records().to_vec();
            prop_assert_eq!(s.purge_expired(now), 0);
            prop_assert_eq!(s.records(), snapshot.as_slice());
        }

        #[test]
        fn close_time_bounded_by_span(
            steps in proptest::collection::vec((0u64..400, proptest::bool::ANY, 0u8..3), 1..80),
            scan in 1u64..30,
        ) {
            let mut s = LocalStore::new(DeviceId(1), DeviceKey([3u8; 32]), ProtocolConfig { scan_interval_s: scan, ..Default::default() });
            let mut t = 0;
            for (dt, close, who) in steps {
                t += dt;
                s.record_encounter(tok(who + 1), -60.0, t, if close { Close } else { Far }).unwrap();
            }
            for r in s.records() {
                prop_assert!(r.first_seen <= r.last_seen);
                prop_assert!(r.close_duration_s <= r.last_seen - r.first_seen);
            }
        }
    }
}

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::ids::{day_tokens, Token};
use super::payload::{DiagnosisPayload, SeedBundle};
use super::store::{EncounterRecord, LocalStore};
use super::{DayIndex, Mode, ProtocolError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExposureAlert {
    pub day: DayIndex,
    pub cumulative_close_s: u64,
    pub triggered: bool,
}

/// Sums close time over the matched records of one day.
pub fn risk_score(matched: &[&EncounterRecord], day: DayIndex, threshold_s: u64) -> ExposureAlert {
    let cumulative_close_s = matched.iter().map(|r| r.close_duration_s).sum();
    ExposureAlert {
        day,
        cumulative_close_s,
        triggered: cumulative_close_s >= threshold_s,
    }
}

/// Token → day lookup for every token a seed bundle can produce.
pub(crate) fn expand_bundle(
    bundle: &SeedBundle,
    rotation_period_s: u32,
) -> HashMap<Token, DayIndex> {
    let mut out = HashMap::new();
    for (day, seed) in &bundle.seeds {
        for id in day_tokens(seed, *day, rotation_period_s) {
            out.insert(id.token, *day);
        }
    }
    out
}

/// One alert per day on which any record matches, in day order.
pub(crate) fn alerts_for<'a, I>(
    records: I,
    tokens: &HashMap<Token, DayIndex>,
    threshold_s: u64,
) -> Vec<ExposureAlert>
where
    I: IntoIterator<Item = &'a EncounterRecord>,
{
    let mut by_day: BTreeMap<DayIndex, Vec<&EncounterRecord>> = BTreeMap::new();
    for r in records {
        if let Some(day) = tokens.get(&r.observed_token) {
            by_day.entry(*day).or_default().push(r);
        }
    }
    by_day
        .into_iter()
        .map(|(day, recs)| risk_score(&recs, day, threshold_s))
        .collect()
}

/// Device-side matching of a relayed seed bundle against the local store.
pub fn client_match(
    store: &LocalStore,
    payload: &DiagnosisPayload,
) -> Result<Vec<ExposureAlert>, ProtocolError> {
    let DiagnosisPayload::Decentralized(bundle) = payload else {
        return Err(ProtocolError::WrongMode(Mode::Centralized));
    };
    let cfg = store.config();
    let tokens = expand_bundle(bundle, cfg.rotation_period_s);
    Ok(alerts_for(store.records(), &tokens, cfg.risk_threshold_s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ProximityLabel::Close;
    use crate::dataset::RssStats;
    use crate::protocol::{DeviceId, DeviceKey, ProtocolConfig};

    fn rec(close: u64) -> EncounterRecord {
        EncounterRecord {
            observed_token: Token([0; 16]),
            first_seen: 0,
            last_seen: close,
            rss: RssStats::from_values([-60.0]),
            close_duration_s: close,
        }
    }

    #[test]
    fn risk_threshold() {
        let twenty = rec(1200);
        let ten = rec(600);
        assert!(risk_score(&[&twenty], DayIndex(0), 900).triggered);
        let a = risk_score(&[&ten], DayIndex(0), 900);
        assert_eq!((a.cumulative_close_s, a.triggered), (600, false));
        let e = risk_score(&[], DayIndex(2), 900);
        assert_eq!(
            (e.cumulative_close_s, e.triggered, e.day),
            (0, false, DayIndex(2))
        );
    }

    fn sender() -> LocalStore {
        LocalStore::new(DeviceId(1), DeviceKey([1; 32]), ProtocolConfig::default())
    }

    fn receiver() -> LocalStore {
        LocalStore::new(DeviceId(2), DeviceKey([2; 32]), ProtocolConfig::default())
    }

    #[test]
    fn twenty_minutes_close_triggers() {
        let mut a = sender();
        let mut b = receiver();
        for t in 0..=1200u64 {
            let token = a.current_id(t).token;
            b.record_encounter(token, -55.0, t, Close).unwrap();
        }
        let payload = a
            .build_diagnosis_payload(Mode::Decentralized, true, 1300)
            .unwrap();
        let alerts = client_match(&b, &payload).unwrap();
        // Slots 0 and 1 give two records; each first sighting credits nothing.
        assert_eq!(alerts.len(), 1);
        assert_eq!(alerts[0].cumulative_close_s, 1199);
        assert!(alerts[0].triggered);
    }

    #[test]
    fn disjoint_tokens_no_alert() {
        let mut a = sender();
        a.current_id(0);
        let mut b = receiver();
        b.record_encounter(Token([42; 16]), -50.0, 10, Close)
            .unwrap();
        let payload = a
            .build_diagnosis_payload(Mode::Decentralized, true, 20)
            .unwrap();
        assert!(client_match(&b, &payload).unwrap().is_empty());
    }

    #[test]
    fn records_sum_per_day() {
        // 8 min then, after a gap longer than merge_gap, 9 min with the same token.
        let mut a = sender();
        let mut b = receiver();
        let token = a.current_id(0).token;
        for t in 0..=480u64 {
            b.record_encounter(token, -55.0, t, Close).unwrap();
        }
        for t in 0..=540u64 {
            b.record_encounter(token, -55.0, 800 + t, Close).unwrap();
        }
        assert_eq!(b.records().len(), 2);
        let payload = a
            .build_diagnosis_payload(Mode::Decentralized, true, 2000)
            .unwrap();
        let alerts = client_match(&b, &payload).unwrap();
        assert_eq!(alerts.len(), 1);
        assert_eq!(alerts[0].cumulative_close_s, 480 + 540);
        assert_eq!(alerts[0].cumulative_close_s, 17 * 60);
        assert!(alerts[0].triggered);
    }

    #[test]
    fn centralized_payload_rejected_by_client() {
        let a = sender();
        let b = receiver();
        let payload = a
            .build_diagnosis_payload(Mode::Centralized, true, 0)
            .unwrap();
        assert_eq!(
            client_match(&b, &payload),
            Err(ProtocolError::WrongMode(Mode::Centralized))
        );
    }
}

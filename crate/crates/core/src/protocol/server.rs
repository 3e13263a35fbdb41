use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::ids::{day_tokens, DeviceKey, Token};
use super::matching::{alerts_for, ExposureAlert};
use super::payload::{DiagnosisPayload, SealedLog, SeedBundle};
use super::{
    retention_days_window, DayIndex, DeviceId, Mode, ProtocolConfig, ProtocolError, Timestamp,
};

/// A seed bundle the relay keeps for late registrants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublishedBundle {
    pub bundle: SeedBundle,
    pub published_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub device: DeviceId,
    pub payload: DiagnosisPayload,
}

/// Relay of the decentralized flow.
///
/// Its whole state is the registry and the published seed bundles; there
/// is no place to put an encounter record.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecentralizedServer {
    registry: BTreeSet<DeviceId>,
    published: Vec<PublishedBundle>,
    retention_days: u32,
}

impl DecentralizedServer {
    pub fn new(retention_days: u32) -> Self {
        DecentralizedServer {
            registry: BTreeSet::new(),
            published: Vec::new(),
            retention_days,
        }
    }

    pub fn registry(&self) -> &BTreeSet<DeviceId> {
        &self.registry
    }

    pub fn published(&self) -> &[PublishedBundle] {
        &self.published
    }

    /// Forgets bundles published more than the retention period ago.
    pub fn prune(&mut self, now: Timestamp) {
        let horizon = now.saturating_sub(self.retention_days as u64 * super::SECONDS_PER_DAY);
        self.published.retain(|p| p.published_at >= horizon);
    }

    /// Adds a device and replays every bundle still within retention.
    pub fn register(&mut self, device: DeviceId, now: Timestamp) -> Vec<DiagnosisPayload> {
        self.prune(now);
        self.registry.insert(device);
        self.published
            .iter()
            .map(|p| DiagnosisPayload::Decentralized(p.bundle.clone()))
            .collect()
    }

    /// Pushes the payload to every registered device and keeps a copy.
    pub fn broadcast(
        &mut self,
        payload: &DiagnosisPayload,
        now: Timestamp,
    ) -> Result<Vec<Delivery>, ProtocolError> {
        let DiagnosisPayload::Decentralized(bundle) = payload else {
            return Err(ProtocolError::WrongMode(Mode::Centralized));
        };
        self.prune(now);
        self.published.push(PublishedBundle {
            bundle: bundle.clone(),
            published_at: now,
        });
        Ok(self
            .registry
            .iter()
            .map(|&device| Delivery {
                device,
                payload: payload.clone(),
            })
            .collect())
    }
}

/// Matching outcome for one device whose log holds diagnosed tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub device: DeviceId,
    pub alerts: Vec<ExposureAlert>,
}

impl MatchResult {
    pub fn notified(&self) -> bool {
        self.alerts.iter().any(|a| a.triggered)
    }
}

/// Server of the centralized flow: holds device keys and every uploaded log.
#[derive(Debug, Clone)]
pub struct CentralizedServer {
    config: ProtocolConfig,
    registry: BTreeMap<DeviceId, DeviceKey>,
    uploads: BTreeMap<DeviceId, SealedLog>,
}

impl CentralizedServer {
    pub fn new(config: ProtocolConfig) -> Self {
        CentralizedServer {
            config,
            registry: BTreeMap::new(),
            uploads: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, device: DeviceId, key: DeviceKey) {
        self.registry.insert(device, key);
    }

    pub fn uploads(&self) -> &BTreeMap<DeviceId, SealedLog> {
        &self.uploads
    }

    /// Stores a device's latest log, replacing the previous one.
    pub fn upload(&mut self, log: SealedLog) -> Result<(), ProtocolError> {
        let device = log.device();
        let key = self
            .registry
            .get(&device)
            .ok_or(ProtocolError::UnknownDevice(device))?;
        log.verify(&key.sealing_key())?;
        self.uploads.insert(device, log);
        Ok(())
    }

    fn diagnosed_tokens(&self, key: &DeviceKey, now: Timestamp) -> HashMap<Token, DayIndex> {
        let mut out = HashMap::new();
        for d in retention_days_window(now, self.config.retention_days) {
            let day = DayIndex(d);
            for id in day_tokens(&key.daily_seed(day), day, self.config.rotation_period_s) {
                out.insert(id.token, day);
            }
        }
        out
    }

    /// Stores the diagnosed device's log, then matches its tokens against
    /// every other uploaded log. Only devices with a matching token appear.
    pub fn server_match_centralized(
        &mut self,
        diagnosis: &DiagnosisPayload,
        now: Timestamp,
    ) -> Result<Vec<MatchResult>, ProtocolError> {
        let DiagnosisPayload::Centralized(log) = diagnosis else {
            return Err(ProtocolError::WrongMode(Mode::Decentralized));
        };
        let diagnosed = log.device();
        let key = *self
            .registry
            .get(&diagnosed)
            .ok_or(ProtocolError::UnknownDevice(diagnosed))?;
        self.upload(log.clone())?;
        let tokens = self.diagnosed_tokens(&key, now);
        let mut results = Vec::new();
        for (&device, upload) in &self.uploads {
            if device == diagnosed {
                continue;
            }
            let dkey = self
                .registry
                .get(&device)
                .ok_or(ProtocolError::UnknownDevice(device))?;
            let records = upload.open(&dkey.sealing_key())?;
            let alerts = alerts_for(&records, &tokens, self.config.risk_threshold_s);
            if !alerts.is_empty() {
                results.push(MatchResult { device, alerts });
            }
        }
        Ok(results)
    }
}

/// Devices that actually receive an alert.
pub fn notifications(results: &[MatchResult]) -> Vec<DeviceId> {
    results
        .iter()
        .filter(|r| r.notified())
        .map(|r| r.device)
        .collect()
}

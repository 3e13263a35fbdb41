//! Exposure-notification data flows.
//!
//! Devices broadcast rotating ephemeral IDs derived from daily seeds and keep
//! what they hear in a [`LocalStore`]. On diagnosis the flow splits:
//!
//! * **centralized**: every device uploads a sealed encounter log; the
//!   [`CentralizedServer`] re-derives the diagnosed device's tokens, matches
//!   them against all logs and notifies only the matched devices.
//! * **decentralized**: the diagnosed device uploads its daily seeds; the
//!   [`DecentralizedServer`] relays them to every registered device, which
//!   matches locally with [`client_match`].
//!
//! Sealing is framing plus an HMAC integrity tag. It is not encryption.

mod ids;
mod matching;
mod payload;
mod server;
mod store;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ids::{day_tokens, rotate_id, slots_per_day, DailySeed, DeviceKey, EphemeralId, Token};
pub use matching::{client_match, risk_score, ExposureAlert};
pub use payload::{DiagnosisPayload, SealedLog, SeedBundle, RECORD_WIRE_LEN};
pub use server::{
    notifications, CentralizedServer, DecentralizedServer, Delivery, MatchResult, PublishedBundle,
};
pub use store::{EncounterRecord, LocalStore};

/// Seconds since the start of the simulated epoch.
pub type Timestamp = u64;

pub const SECONDS_PER_DAY: u64 = 86_400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DayIndex(pub u32);

impl DayIndex {
    pub fn of(t: Timestamp) -> Self {
        DayIndex((t / SECONDS_PER_DAY) as u32)
    }

    pub fn start(self) -> Timestamp {
        self.0 as u64 * SECONDS_PER_DAY
    }
}

impl fmt::Display for DayIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Days whose tokens are still inside the retention window at `now`:
/// today and the `retention_days - 1` days before it.
pub fn retention_days_window(now: Timestamp, retention_days: u32) -> std::ops::RangeInclusive<u32> {
    let today = DayIndex::of(now).0;
    today.saturating_sub(retention_days.saturating_sub(1))..=today
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DeviceId(pub u32);

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Centralized,
    Decentralized,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Centralized => "centralized",
            Mode::Decentralized => "decentralized",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("slot {slot} out of range 0..{slots}")]
    SlotOutOfRange { slot: u32, slots: u32 },
    #[error("clock went backwards: {t} after {last}")]
    ClockRegression { last: Timestamp, t: Timestamp },
    #[error("user declined to upload")]
    ConsentDeclined,
    #[error("device {0} is not registered")]
    UnknownDevice(DeviceId),
    #[error("payload mode {0} not accepted here")]
    WrongMode(Mode),
    #[error("malformed frame: {0}")]
    Wire(String),
    #[error("sealed log failed its integrity check")]
    Integrity,
    #[error("invalid protocol configuration: {0}")]
    InvalidConfig(String),
}

/// Tunables shared by devices and servers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Lifetime of one ephemeral ID; must divide a day.
    pub rotation_period_s: u32,
    /// Sightings of one token closer than this extend the same record.
    pub merge_gap_s: u64,
    /// Close time credited per close sighting.
    pub scan_interval_s: u64,
    pub retention_days: u32,
    /// Cumulative close time per day that triggers an alert.
    pub risk_threshold_s: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            rotation_period_s: 900,
            merge_gap_s: 300,
            scan_interval_s: 1,
            retention_days: 14,
            risk_threshold_s: 900,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |m: &str| Err(ProtocolError::InvalidConfig(m.to_string()));
        if self.rotation_period_s == 0
            || !SECONDS_PER_DAY.is_multiple_of(self.rotation_period_s as u64)
        {
            return bad("rotation_period_s must divide 86400");
        }
        if !(14..=21).contains(&self.retention_days) {
            return bad("retention_days must be within 14..=21");
        }
        if self.scan_interval_s == 0 {
            return bad("scan_interval_s must be positive");
        }
        Ok(())
    }

    pub fn retention_s(&self) -> u64 {
        self.retention_days as u64 * SECONDS_PER_DAY
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_covers_retention_days() {
        let now = 20 * SECONDS_PER_DAY + 5;
        assert_eq!(retention_days_window(now, 14), 7..=20);
        assert_eq!(retention_days_window(3 * SECONDS_PER_DAY, 14), 0..=3);
    }

    #[test]
    fn config_validation() {
        assert!(ProtocolConfig::default().validate().is_ok());
        assert!(ProtocolConfig {
            retention_days: 13,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(ProtocolConfig {
            retention_days: 22,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(ProtocolConfig {
            rotation_period_s: 7,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}

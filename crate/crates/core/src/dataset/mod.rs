//! Ingestion of the smartphone and smartwatch BLE RSS corpora.
//!
//! Rows are mapped onto [`RssSample`] through a [`SchemaMap`], labelled
//! close/far at a cutoff distance, reduced to per-window [`FeatureVector`]s
//! and split into stratified train/test halves.

mod parse;
mod schema;
mod split;
mod window;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::{parse_dataset, write_canonical, MalformedRow, ParsedDataset, CANONICAL_HEADER};
pub use schema::SchemaMap;
pub use split::{split, SplitDataset};
pub use window::{window_corpus, window_features, RssStats, WindowSpec};

/// Default close/far cutoff distance in meters.
pub const DEFAULT_CUTOFF_M: f64 = 2.0;

/// Fraction of malformed rows tolerated before a parse is rejected.
pub const MAX_MALFORMED_FRACTION: f64 = 0.01;

/// Distances (m) at which the smartphone corpus was recorded.
pub const SMARTPHONE_DISTANCES_M: [f64; 13] = [
    0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0, 3.0, 4.0, 5.0,
];

/// Range (m) covered by the smartwatch corpus.
pub const SMARTWATCH_RANGE_M: (f64, f64) = (0.5, 5.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("schema names column `{0}` which is absent from the header")]
    MissingColumn(String),
    #[error("{malformed} of {total} rows malformed (limit {limit:.0}%)", limit = MAX_MALFORMED_FRACTION * 100.0)]
    ExcessiveMalformed { malformed: usize, total: usize },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("window input spans several strata: {0}")]
    MixedStrata(String),
    #[error("stratum {0} has fewer than 2 elements")]
    EmptyStratum(String),
    #[error("train fraction {0} outside (0, 1)")]
    InvalidFraction(f64),
    #[error("window length must be positive")]
    InvalidWindow,
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for DatasetError {
    fn from(e: std::io::Error) -> Self {
        DatasetError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceKind {
    Smartphone,
    Smartwatch,
}

impl fmt::Display for DeviceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeviceKind::Smartphone => "smartphone",
            DeviceKind::Smartwatch => "smartwatch",
        })
    }
}

impl FromStr for DeviceKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "smartphone" | "phone" => Ok(DeviceKind::Smartphone),
            "smartwatch" | "watch" => Ok(DeviceKind::Smartwatch),
            other => Err(format!("unknown device kind `{other}`")),
        }
    }
}

/// Placement of the two devices during a recording.
///
/// Smartphone pairs combine hand (H), pocket (P) and backpack (B); smartwatch
/// pairs combine the left (L) and right (R) wrist of each volunteer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PositionPair {
    HH,
    HP,
    HB,
    PB,
    PP,
    BB,
    LR,
    RL,
    LL,
    RR,
}

impl PositionPair {
    pub const SMARTPHONE: [PositionPair; 6] = [
        PositionPair::HH,
        PositionPair::HP,
        PositionPair::HB,
        PositionPair::PB,
        PositionPair::PP,
        PositionPair::BB,
    ];
    pub const SMARTWATCH: [PositionPair; 4] = [
        PositionPair::LR,
        PositionPair::RL,
        PositionPair::LL,
        PositionPair::RR,
    ];

    pub fn device_kind(self) -> DeviceKind {
        match self {
            PositionPair::LR | PositionPair::RL | PositionPair::LL | PositionPair::RR => {
                DeviceKind::Smartwatch
            }
            _ => DeviceKind::Smartphone,
        }
    }

    /// Direct/crosswise view for smartwatch pairs; `None` for smartphones.
    pub fn group(self) -> Option<PositionGroup> {
        match self {
            PositionPair::LR | PositionPair::RL => Some(PositionGroup::Direct),
            PositionPair::LL | PositionPair::RR => Some(PositionGroup::Crosswise),
            _ => None,
        }
    }

    /// Stable small-integer encoding used as a tree feature.
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PositionPair::HH => "HH",
            PositionPair::HP => "HP",
            PositionPair::HB => "HB",
            PositionPair::PB => "PB",
            PositionPair::PP => "PP",
            PositionPair::BB => "BB",
            PositionPair::LR => "LR",
            PositionPair::RL => "RL",
            PositionPair::LL => "LL",
            PositionPair::RR => "RR",
        }
    }

    pub fn long_name(self) -> &'static str {
        match self {
            PositionPair::HH => "hand-to-hand",
            PositionPair::HP => "hand-to-pocket",
            PositionPair::HB => "hand-to-backpack",
            PositionPair::PB => "pocket-to-backpack",
            PositionPair::PP => "pocket-to-pocket",
            PositionPair::BB => "backpack-to-backpack",
            PositionPair::LR => "left-to-right",
            PositionPair::RL => "right-to-left",
            PositionPair::LL => "left-to-left",
            PositionPair::RR => "right-to-right",
        }
    }
}

impl fmt::Display for PositionPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PositionPair {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['_', ' '], "-");
        let all = PositionPair::SMARTPHONE
            .iter()
            .chain(PositionPair::SMARTWATCH.iter());
        for &p in all {
            if norm == p.as_str().to_ascii_lowercase() || norm == p.long_name() {
                return Ok(p);
            }
        }
        Err(format!("unknown position pair `{}`", s.trim()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositionGroup {
    Direct,
    Crosswise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProximityLabel {
    Close,
    Far,
}

impl ProximityLabel {
    /// Index into `[close, far]` count pairs.
    pub fn index(self) -> usize {
        match self {
            ProximityLabel::Close => 0,
            ProximityLabel::Far => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            ProximityLabel::Close
        } else {
            ProximityLabel::Far
        }
    }
}

impl fmt::Display for ProximityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProximityLabel::Close => "close",
            ProximityLabel::Far => "far",
        })
    }
}

/// One RSS observation with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RssSample {
    pub rss_dbm: f64,
    pub distance_m: f64,
    pub position_pair: PositionPair,
    pub device_kind: DeviceKind,
    pub session_id: String,
    pub t_offset_s: Option<f64>,
}

impl RssSample {
    /// Checks the distance against the recording grid of the device kind.
    pub fn check_invariants(&self) -> Result<(), String> {
        if !(self.distance_m.is_finite() && self.distance_m > 0.0) {
            return Err(format!("distance {} is not positive", self.distance_m));
        }
        if !self.rss_dbm.is_finite() {
            return Err("rss is not finite".into());
        }
        if self.position_pair.device_kind() != self.device_kind {
            return Err(format!(
                "position {} does not belong to {}",
                self.position_pair, self.device_kind
            ));
        }
        match self.device_kind {
            DeviceKind::Smartphone => {
                if !SMARTPHONE_DISTANCES_M
                    .iter()
                    .any(|d| (d - self.distance_m).abs() < 1e-6)
                {
                    return Err(format!(
                        "distance {} m is not on the smartphone grid",
                        self.distance_m
                    ));
                }
            }
            DeviceKind::Smartwatch => {
                let (lo, hi) = SMARTWATCH_RANGE_M;
                if self.distance_m < lo - 1e-9 || self.distance_m > hi + 1e-9 {
                    return Err(format!(
                        "distance {} m is outside the smartwatch range",
                        self.distance_m
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn stratum(&self) -> Stratum {
        Stratum::new(self.distance_m, self.position_pair)
    }
}

/// Close iff the ground-truth distance is at or below the cutoff.
pub fn label_sample(sample: &RssSample, cutoff_m: f64) -> ProximityLabel {
    label_distance(sample.distance_m, cutoff_m)
}

pub fn label_distance(distance_m: f64, cutoff_m: f64) -> ProximityLabel {
    debug_assert!(cutoff_m > 0.0);
    if distance_m <= cutoff_m {
        ProximityLabel::Close
    } else {
        ProximityLabel::Far
    }
}

/// (distance, position) key used for windowing and stratified splitting.
///
/// Distances are held in micrometres so the key is totally ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Stratum {
    pub distance_um: i64,
    pub position_pair: PositionPair,
}

impl Stratum {
    pub fn new(distance_m: f64, position_pair: PositionPair) -> Self {
        Stratum {
            distance_um: (distance_m * 1e6).round() as i64,
            position_pair,
        }
    }

    pub fn distance_m(&self) -> f64 {
        self.distance_um as f64 / 1e6
    }
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}m", self.position_pair, self.distance_m())
    }
}

/// Summary statistics of one window plus the position encoding.
///
/// Feature indices: 0 mean, 1 std, 2 min, 3 max, 4 count, 5 position code.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub rss_mean_dbm: f64,
    pub rss_std_dbm: f64,
    pub rss_min_dbm: f64,
    pub rss_max_dbm: f64,
    pub sample_count: u32,
    pub position_code: u8,
}

impl FeatureVector {
    pub const LEN: usize = 6;
    pub const NAMES: [&'static str; 6] = [
        "rss_mean_dbm",
        "rss_std_dbm",
        "rss_min_dbm",
        "rss_max_dbm",
        "sample_count",
        "position_code",
    ];

    pub fn from_stats(stats: &RssStats, position_code: u8) -> Self {
        FeatureVector {
            rss_mean_dbm: stats.mean(),
            rss_std_dbm: stats.std(),
            rss_min_dbm: stats.min(),
            rss_max_dbm: stats.max(),
            sample_count: stats.count() as u32,
            position_code,
        }
    }

    /// A one-sample window, as seen by a scanner classifying a single advertisement.
    pub fn single(rss_dbm: f64, position_code: u8) -> Self {
        FeatureVector {
            rss_mean_dbm: rss_dbm,
            rss_std_dbm: 0.0,
            rss_min_dbm: rss_dbm,
            rss_max_dbm: rss_dbm,
            sample_count: 1,
            position_code,
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.rss_mean_dbm,
            self.rss_std_dbm,
            self.rss_min_dbm,
            self.rss_max_dbm,
            self.sample_count as f64,
            self.position_code as f64,
        ]
    }
}

/// A labelled window together with the stratum it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub features: FeatureVector,
    pub label: ProximityLabel,
    pub stratum: Stratum,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(d: f64) -> RssSample {
        RssSample {
            rss_dbm: -60.0,
            distance_m: d,
            position_pair: PositionPair::HH,
            device_kind: DeviceKind::Smartphone,
            session_id: "s".into(),
            t_offset_s: None,
        }
    }

    #[test]
    fn labels_at_two_metres() {
        assert_eq!(label_sample(&sample(0.2), 2.0), ProximityLabel::Close);
        assert_eq!(label_sample(&sample(5.0), 2.0), ProximityLabel::Far);
        assert_eq!(label_sample(&sample(2.0), 2.0), ProximityLabel::Close);
    }

    #[test]
    fn position_groups() {
        assert_eq!(PositionPair::LR.group(), Some(PositionGroup::Direct));
        assert_eq!(PositionPair::RL.group(), Some(PositionGroup::Direct));
        assert_eq!(PositionPair::LL.group(), Some(PositionGroup::Crosswise));
        assert_eq!(PositionPair::RR.group(), Some(PositionGroup::Crosswise));
        assert_eq!(PositionPair::HP.group(), None);
    }

    #[test]
    fn position_parsing_accepts_codes_and_names() {
        assert_eq!("hp".parse::<PositionPair>().unwrap(), PositionPair::HP);
        assert_eq!(
            "Hand-to-Pocket".parse::<PositionPair>().unwrap(),
            PositionPair::HP
        );
        assert_eq!(
            "pocket_to_backpack".parse::<PositionPair>().unwrap(),
            PositionPair::PB
        );
        assert!("XY".parse::<PositionPair>().is_err());
    }

    #[test]
    fn grid_invariants() {
        assert!(sample(1.4).check_invariants().is_ok());
        assert!(sample(2.5).check_invariants().is_err());
        assert!(sample(0.0).check_invariants().is_err());
        let mut w = sample(0.3);
        w.position_pair = PositionPair::LR;
        w.device_kind = DeviceKind::Smartwatch;
        assert!(w.check_invariants().is_err());
        w.distance_m = 0.75;
        assert!(w.check_invariants().is_ok());
    }

    proptest::proptest! {
        #[test]
        fn label_is_monotone(d1 in 0.01f64..10.0, d2 in 0.01f64..10.0, cutoff in 0.1f64..5.0) {
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            if label_distance(hi, cutoff) == ProximityLabel::Close {
                proptest::prop_assert_eq!(label_distance(lo, cutoff), ProximityLabel::Close);
            }
        }
    }
}

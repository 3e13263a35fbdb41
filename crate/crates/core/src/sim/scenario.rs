use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::agent::Agent;
use super::channel::PathLossModel;
use super::SimError;
use crate::classifier::{tree_from_json, ProximityDecider, ThresholdClassifier};
use crate::dataset::PositionPair;
use crate::protocol::{Mode, ProtocolConfig, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    Threshold,
    Tree,
}

/// How receivers label each sample.
///
/// `threshold` without `cutoff_dbm` uses the channel's mean RSS at the
/// scenario cutoff distance. `tree` loads a serialized tree from `path`,
/// resolved against the scenario file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff_dbm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Placement code fed to the classifier with every sample.
    #[serde(default = "default_position")]
    pub position: PositionPair,
}

fn default_position() -> PositionPair {
    PositionPair::HH
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec {
            kind: ClassifierKind::Threshold,
            cutoff_dbm: None,
            path: None,
            position: default_position(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnosis {
    pub agent: u32,
    pub time_s: Timestamp,
    #[serde(default = "yes")]
    pub consent: bool,
}

fn yes() -> bool {
    true
}

/// A scripted world. Parsed from TOML; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub duration_s: u64,
    #[serde(default = "d_scan")]
    pub scan_interval_s: u64,
    #[serde(default = "d_cutoff")]
    pub cutoff_m: f64,
    #[serde(default = "d_retention")]
    pub retention_days: u32,
    #[serde(default = "d_risk")]
    pub risk_threshold_s: u64,
    #[serde(default = "d_rotation")]
    pub rotation_period_s: u32,
    #[serde(default = "d_merge")]
    pub merge_gap_s: u64,
    pub rng_seed: u64,
    pub mode: Mode,
    #[serde(default = "d_range")]
    pub radio_range_m: f64,
    /// Spread of a per-agent constant RSS offset; absent or 0 disables it.
    #[serde(default)]
    pub device_offset_sigma_db: f64,
    #[serde(default)]
    pub channel: PathLossModel,
    #[serde(default)]
    pub classifier: ClassifierSpec,
    #[serde(default)]
    pub agents: Vec<Agent>,
    #[serde(default)]
    pub diagnoses: Vec<Diagnosis>,
}

fn d_scan() -> u64 {
    1
}
fn d_cutoff() -> f64 {
    2.0
}
fn d_retention() -> u32 {
    14
}
fn d_risk() -> u64 {
    900
}
fn d_rotation() -> u32 {
    900
}
fn d_merge() -> u64 {
    300
}
fn d_range() -> f64 {
    25.0
}

impl FromStr for ScenarioConfig {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        let cfg: ScenarioConfig =
            toml::from_str(s).map_err(|e| SimError::ConfigInvalid(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ScenarioConfig {
    pub fn empty(duration_s: u64, rng_seed: u64, mode: Mode) -> Self {
        ScenarioConfig {
            duration_s,
            scan_interval_s: d_scan(),
            cutoff_m: d_cutoff(),
            retention_days: d_retention(),
            risk_threshold_s: d_risk(),
            rotation_period_s: d_rotation(),
            merge_gap_s: d_merge(),
            rng_seed,
            mode,
            radio_range_m: d_range(),
            device_offset_sigma_db: 0.0,
            channel: PathLossModel::default(),
            classifier: ClassifierSpec::default(),
            agents: Vec::new(),
            diagnoses: Vec::new(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn protocol_config(&self) -> ProtocolConfig {
        ProtocolConfig {
            rotation_period_s: self.rotation_period_s,
            merge_gap_s: self.merge_gap_s,
            scan_interval_s: self.scan_interval_s,
            retention_days: self.retention_days,
            risk_threshold_s: self.risk_threshold_s,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::ConfigInvalid(m));
        if self.duration_s == 0 || self.scan_interval_s == 0 || self.risk_threshold_s == 0 {
            return bad("duration_s, scan_interval_s and risk_threshold_s must be positive".into());
        }
        if !(self.cutoff_m > 0.0 && self.cutoff_m.is_finite()) {
            return bad(format!("cutoff_m {} must be positive", self.cutoff_m));
        }
        if !(self.radio_range_m > 0.0) {
            return bad(format!(
                "radio_range_m {} must be positive",
                self.radio_range_m
            ));
        }
        if !(self.device_offset_sigma_db >= 0.0 && self.device_offset_sigma_db.is_finite()) {
            return bad("device_offset_sigma_db must be non-negative".into());
        }
        self.protocol_config()
            .validate()
            .map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
        self.channel.validate()?;
        let mut ids = BTreeSet::new();
        for a in &self.agents {
            a.validate()?;
            if !ids.insert(a.id) {
                return bad(format!("duplicate agent id {}", a.id));
            }
        }
        for d in &self.diagnoses {
            if !ids.contains(&d.agent) {
                return bad(format!("diagnosis names unknown agent {}", d.agent));
            }
            if d.time_s > self.duration_s {
                return bad(format!(
                    "diagnosis at {} s is beyond duration {} s",
                    d.time_s, self.duration_s
                ));
            }
        }
        match (
            self.classifier.kind,
            &self.classifier.path,
            self.classifier.cutoff_dbm,
        ) {
            (ClassifierKind::Tree, None, _) => return bad("tree classifier needs a path".into()),
            (ClassifierKind::Tree, _, Some(_)) => {
                return bad("cutoff_dbm applies to the threshold classifier".into())
            }
            (ClassifierKind::Threshold, Some(_), _) => {
                return bad("path applies to the tree classifier".into())
            }
            _ => {}
        }
        Ok(())
    }

    /// Threshold used when the scenario does not set one.
    pub fn default_cutoff_dbm(&self) -> f64 {
        self.channel.mean_rss(self.cutoff_m)
    }

    pub fn build_classifier(
        &self,
        base_dir: &Path,
    ) -> Result<Box<dyn ProximityDecider + Send + Sync>, SimError> {
        match self.classifier.kind {
            ClassifierKind::Threshold => Ok(Box::new(ThresholdClassifier {
                cutoff_dbm: self
                    .classifier
                    .cutoff_dbm
                    .unwrap_or_else(|| self.default_cutoff_dbm()),
            })),
            ClassifierKind::Tree => {
                let rel = self.classifier.path.as_ref().expect("validated");
                let path = base_dir.join(rel);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
                Ok(Box::new(tree_from_json(&text)?))
            }
        }
    }
}

//! Run manifests. Wall-clock timestamps live only here, so every other
//! output of a seeded run is byte-for-byte reproducible.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::SystemTime;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn file_digest(path: &Path) -> std::io::Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config_digest: Option<String>,
    /// Input path → SHA-256 of its contents.
    pub dataset_digests: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
    /// Output file name → SHA-256 of its contents.
    pub outputs: BTreeMap<String, String>,
}

fn now_rfc3339() -> String {
    humantime::format_rfc3339_seconds(SystemTime::now()).to_string()
}

impl RunManifest {
    pub fn start(command: &str, args: Vec<String>) -> Self {
        RunManifest {
            command: command.to_string(),
            args,
            config_digest: None,
            dataset_digests: BTreeMap::new(),
            seed: None,
            tool_version: TOOL_VERSION.to_string(),
            started_at: now_rfc3339(),
            finished_at: String::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn with_config(mut self, bytes: &[u8]) -> Self {
        self.config_digest = Some(sha256_hex(bytes));
        self
    }

    pub fn add_input(&mut self, name: impl Into<String>, bytes: &[u8]) {
        self.dataset_digests.insert(name.into(), sha256_hex(bytes));
    }

    pub fn add_output(&mut self, name: impl Into<String>, bytes: &[u8]) {
        self.outputs.insert(name.into(), sha256_hex(bytes));
    }

    pub fn finish(&mut self) {
        self.finished_at = now_rfc3339();
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_fields() {
        let mut m = RunManifest::start("simulate", vec!["x.toml".into()]).with_config(b"abc");
        m.seed = Some(7);
        m.add_input("a.csv", b"");
        m.add_output("metrics.json", b"{}");
        m.finish();
        assert!(m.started_at.ends_with('Z') && m.finished_at >= m.started_at);
        let back: RunManifest = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert_eq!(m.dataset_digests["a.csv"], sha256_hex(b""));
    }
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::channel::{rss_at, PathLossModel};
use super::SimError;
use crate::dataset::{DeviceKind, PositionPair, RssSample, SMARTPHONE_DISTANCES_M};

/// Recipe for a corpus shaped like the field recordings: one session per
/// placement and distance, sampled at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub device: DeviceKind,
    pub channel: PathLossModel,
    pub seconds_per_distance: f64,
    pub sample_rate_hz: f64,
    pub seed: u64,
}

impl CorpusSpec {
    pub fn distances(&self) -> Vec<f64> {
        match self.device {
            DeviceKind::Smartphone => SMARTPHONE_DISTANCES_M.to_vec(),
            DeviceKind::Smartwatch => (1..=10).map(|i| i as f64 * 0.5).collect(),
        }
    }

    pub fn positions(&self) -> &'static [PositionPair] {
        match self.device {
            DeviceKind::Smartphone => &PositionPair::SMARTPHONE,
            DeviceKind::Smartwatch => &PositionPair::SMARTWATCH,
        }
    }
}

/// Draws a timestamped corpus from the channel. Each placement adds a fixed
/// attenuation of one dB per body obstruction step, so the strata differ.
pub fn synthesize_corpus(spec: &CorpusSpec) -> Result<Vec<RssSample>, SimError> {
    if !(spec.seconds_per_distance > 0.0 && spec.sample_rate_hz > 0.0) {
        return Err(SimError::ConfigInvalid(
            "corpus duration and rate must be positive".into(),
        ));
    }
    spec.channel.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let per_session = (spec.seconds_per_distance * spec.sample_rate_hz)
        .round()
        .max(1.0) as usize;
    let mut out = Vec::new();
    for (k, &pos) in spec.positions().iter().enumerate() {
        let attenuation = k as f64;
        for &d in &spec.distances() {
            let session_id = format!("{}@{d}", pos.as_str());
            for i in 0..per_session {
                out.push(RssSample {
                    rss_dbm: rss_at(&spec.channel, d, &mut rng)? - attenuation,
                    distance_m: d,
                    position_pair: pos,
                    device_kind: spec.device,
                    session_id: session_id.clone(),
                    t_offset_s: Some(i as f64 / spec.sample_rate_hz),
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_matches_recordings() {
        let spec = CorpusSpec {
            device: DeviceKind::Smartwatch,
            channel: PathLossModel::default(),
            seconds_per_distance: 2.0,
            sample_rate_hz: 5.0,
            seed: 1,
        };
        let c = synthesize_corpus(&spec).unwrap();
        assert_eq!(c.len(), 4 * 10 * 10);
        assert!(c.iter().all(|s| s.check_invariants().is_ok()));
        assert_eq!(c, synthesize_corpus(&spec).unwrap());
    }
}

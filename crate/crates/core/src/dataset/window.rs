use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{label_distance, DatasetError, Example, FeatureVector, RssSample, Stratum};

/// Running mean/variance/extremes of RSS values (Welford).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RssStats {
    count: u64,
    mean: f64,
    m2: f64,
    min: f64,
    max: f64,
}

impl Default for RssStats {
    fn default() -> Self {
        RssStats {
            count: 0,
            mean: 0.0,
            m2: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }
}

impl RssStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    pub fn from_values<I: IntoIterator<Item = f64>>(values: I) -> Self {
        let mut s = RssStats::default();
        values.into_iter().for_each(|v| s.push(v));
        s
    }

    /// Rebuilds an accumulator from its raw state, as returned by [`RssStats::raw`].
    pub fn from_raw(count: u64, mean: f64, m2: f64, min: f64, max: f64) -> Self {
        RssStats {
            count,
            mean,
            m2,
            min,
            max,
        }
    }

    /// `(count, mean, sum of squared deviations, min, max)`.
    pub fn raw(&self) -> (u64, f64, f64, f64, f64) {
        (self.count, self.mean, self.m2, self.min, self.max)
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population standard deviation; 0 for fewer than two values.
    pub fn std(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / self.count as f64).max(0.0).sqrt()
        }
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }
}

/// How samples of one recording are grouped into feature windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum WindowSpec {
    /// Non-overlapping windows of `window_s` seconds; recordings without
    /// timestamps fall back to chunks of `window_n` consecutive samples.
    Timed { window_s: f64, window_n: usize },
    /// Every sample is its own window.
    PerSample,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec::Timed {
            window_s: 5.0,
            window_n: 5,
        }
    }
}

/// Reduces the samples of a single recording to labelled feature windows.
///
/// All samples must share one session, distance and position pair.
pub fn window_features(
    samples: &[RssSample],
    spec: WindowSpec,
    cutoff_m: f64,
) -> Result<Vec<Example>, DatasetError> {
    let Some(first) = samples.first() else {
        return Ok(Vec::new());
    };
    let stratum = first.stratum();
    if let Some(odd) = samples
        .iter()
        .find(|s| s.stratum() != stratum || s.session_id != first.session_id)
    {
        return Err(DatasetError::MixedStrata(format!(
            "{} in session {} vs {} in session {}",
            stratum,
            first.session_id,
            odd.stratum(),
            odd.session_id
        )));
    }
    let label = label_distance(first.distance_m, cutoff_m);
    let code = first.position_pair.code();
    let example = |stats: RssStats| Example {
        features: FeatureVector::from_stats(&stats, code),
        label,
        stratum,
    };

    let windows: Vec<RssStats> = match spec {
        WindowSpec::PerSample => samples
            .iter()
            .map(|s| RssStats::from_values([s.rss_dbm]))
            .collect(),
        WindowSpec::Timed { window_s, window_n } => {
            if !(window_s > 0.0) || window_n == 0 {
                return Err(DatasetError::InvalidWindow);
            }
            if samples.iter().all(|s| s.t_offset_s.is_some()) {
                let mut buckets: BTreeMap<i64, RssStats> = BTreeMap::new();
                for s in samples {
                    let t = s.t_offset_s.expect("checked above");
                    buckets
                        .entry((t / window_s).floor() as i64)
                        .or_default()
                        .push(s.rss_dbm);
                }
                buckets.into_values().collect()
            } else {
                samples
                    .chunks(window_n)
                    .map(|c| RssStats::from_values(c.iter().map(|s| s.rss_dbm)))
                    .collect()
            }
        }
    };
    Ok(windows.into_iter().map(example).collect())
}

/// Windows a whole corpus, recording by recording, in a stable order.
pub fn window_corpus(
    samples: &[RssSample],
    spec: WindowSpec,
    cutoff_m: f64,
) -> Result<Vec<Example>, DatasetError> {
    let mut groups: BTreeMap<(Stratum, &str), Vec<RssSample>> = BTreeMap::new();
    for s in samples {
        groups
            .entry((s.stratum(), s.session_id.as_str()))
            .or_default()
            .push(s.clone());
    }
    let mut out = Vec::new();
    for group in groups.values() {
        out.extend(window_features(group, spec, cutoff_m)?);
    }
    Ok(out)
}

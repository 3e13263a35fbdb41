use std::fmt::Write as _;
use std::str::FromStr;

use super::{DatasetError, DeviceKind, PositionPair};

/// Column mapping from a delimited source file onto [`super::RssSample`].
///
/// Written as `key=value` lines; `#` starts a comment. Recognised keys:
///
/// | key            | meaning                                            |
/// |----------------|----------------------------------------------------|
/// | `col.rss`      | RSS column (required)                              |
/// | `col.distance` | distance column (or constant `distance`)           |
/// | `col.position` | position-pair column (or constant `position`)      |
/// | `col.time`     | seconds since session start (optional)             |
/// | `col.session`  | session key column (optional)                      |
/// | `col.device`   | device kind column (optional)                      |
/// | `delimiter`    | `,` / `comma` / `tab`; auto-detected when absent   |
/// | `position`     | constant position pair for single-combination files|
/// | `distance`     | constant distance for single-distance files        |
/// | `device`       | constant device kind                               |
/// | `session`      | constant session key                               |
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SchemaMap {
    pub col_rss: String,
    pub col_distance: Option<String>,
    pub col_position: Option<String>,
    pub col_time: Option<String>,
    pub col_session: Option<String>,
    pub col_device: Option<String>,
    pub delimiter: Option<u8>,
    pub position: Option<PositionPair>,
    pub distance_m: Option<f64>,
    pub device: Option<DeviceKind>,
    pub session: Option<String>,
}

impl SchemaMap {
    /// Schema of the canonical dump written by [`super::write_canonical`].
    pub fn canonical() -> Self {
        SchemaMap {
            col_rss: "rss_dbm".into(),
            col_distance: Some("distance_m".into()),
            col_position: Some("position_pair".into()),
            col_time: Some("t_offset_s".into()),
            col_session: Some("session_id".into()),
            col_device: Some("device_kind".into()),
            delimiter: Some(b','),
            ..Default::default()
        }
    }

    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "col.rss={}", self.col_rss);
        let opt = |out: &mut String, k: &str, v: &Option<String>| {
            if let Some(v) = v {
                let _ = writeln!(out, "{k}={v}");
            }
        };
        opt(&mut out, "col.distance", &self.col_distance);
        opt(&mut out, "col.position", &self.col_position);
        opt(&mut out, "col.time", &self.col_time);
        opt(&mut out, "col.session", &self.col_session);
        opt(&mut out, "col.device", &self.col_device);
        if let Some(d) = self.delimiter {
            let _ = writeln!(out, "delimiter={}", if d == b'\t' { "tab" } else { "," });
        }
        if let Some(p) = self.position {
            let _ = writeln!(out, "position={p}");
        }
        if let Some(d) = self.distance_m {
            let _ = writeln!(out, "distance={d}");
        }
        if let Some(d) = self.device {
            let _ = writeln!(out, "device={d}");
        }
        opt(&mut out, "session", &self.session);
        out
    }
}

impl FromStr for SchemaMap {
    type Err = DatasetError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let bad = |m: String| DatasetError::InvalidSchema(m);
        let mut s = SchemaMap::default();
        let mut have_rss = false;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {}: expected key=value", n + 1)))?;
            let key = key.trim();
            let value = value.trim().to_string();
            match key {
                "col.rss" => {
                    s.col_rss = value;
                    have_rss = true;
                }
                "col.distance" => s.col_distance = Some(value),
                "col.position" => s.col_position = Some(value),
                "col.time" => s.col_time = Some(value),
                "col.session" => s.col_session = Some(value),
                "col.device" => s.col_device = Some(value),
                "delimiter" => {
                    s.delimiter = Some(match value.as_str() {
                        "," | "comma" => b',',
                        "\\t" | "tab" => b'\t',
                        ";" | "semicolon" => b';',
                        other => return Err(bad(format!("unsupported delimiter `{other}`"))),
                    })
                }
                "position" => s.position = Some(value.parse().map_err(bad)?),
                "distance" => {
                    s.distance_m = Some(
                        value
                            .parse()
                            .map_err(|_| bad(format!("distance `{value}` is not a number")))?,
                    )
                }
                "device" => s.device = Some(value.parse().map_err(bad)?),
                "session" => s.session = Some(value),
                other => return Err(bad(format!("unknown key `{other}`"))),
            }
        }
        if !have_rss {
            return Err(bad("`col.rss` is required".into()));
        }
        if s.col_distance.is_none() && s.distance_m.is_none() {
            return Err(bad("one of `col.distance` or `distance` is required".into()));
        }
        if s.col_position.is_none() && s.position.is_none() {
            return Err(bad("one of `col.position` or `position` is required".into()));
        }
        Ok(s)
    }
}

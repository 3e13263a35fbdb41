use std::io::{BufRead, BufReader, Read, Write};

use serde::Serialize;

use super::{DatasetError, DeviceKind, PositionPair, RssSample, SchemaMap, MAX_MALFORMED_FRACTION};

pub const CANONICAL_HEADER: &str =
    "rss_dbm,distance_m,position_pair,device_kind,session_id,t_offset_s";

/// A data row that could not be turned into a sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MalformedRow {
    /// 1-based line number in the source (the header is line 1).
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedDataset {
    pub samples: Vec<RssSample>,
    pub malformed: Vec<MalformedRow>,
    pub rows_read: usize,
}

struct Columns {
    rss: usize,
    distance: Option<usize>,
    position: Option<usize>,
    time: Option<usize>,
    session: Option<usize>,
    device: Option<usize>,
}

fn detect_delimiter(header: &str) -> u8 {
    if header.contains('\t') {
        b'\t'
    } else if header.contains(';') && !header.contains(',') {
        b';'
    } else {
        b','
    }
}

/// Parses a delimited RSS table according to `schema`.
///
/// Malformed rows are skipped and reported; the parse only fails when more
/// than 1% of the data rows are malformed or a mapped column is missing.
pub fn parse_dataset<R: Read>(
    source: R,
    schema: &SchemaMap,
) -> Result<ParsedDataset, DatasetError> {
    let mut reader = BufReader::new(source);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let header = header
        .trim_start_matches('\u{feff}')
        .trim_end_matches(['\r', '\n'])
        .to_string();
    if header.trim().is_empty() {
        return Err(DatasetError::MissingColumn(schema.col_rss.clone()));
    }
    let delimiter = schema
        .delimiter
        .unwrap_or_else(|| detect_delimiter(&header));
    let names: Vec<String> = header
        .split(delimiter as char)
        .map(|h| h.trim().trim_matches('"').to_string())
        .collect();
    let find = |name: &str| -> Result<usize, DatasetError> {
        names
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DatasetError::MissingColumn(name.to_string()))
    };
    let find_opt = |name: &Option<String>| -> Result<Option<usize>, DatasetError> {
        name.as_deref().map(find).transpose()
    };
    let cols = Columns {
        rss: find(&schema.col_rss)?,
        distance: find_opt(&schema.col_distance)?,
        position: find_opt(&schema.col_position)?,
        time: find_opt(&schema.col_time)?,
        session: find_opt(&schema.col_session)?,
        device: find_opt(&schema.col_device)?,
    };

    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut out = ParsedDataset::default();
    let mut record = csv::StringRecord::new();
    let mut line = 1usize;
    loop {
        match csv.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                line += 1;
                out.rows_read += 1;
                out.malformed.push(MalformedRow {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        }
        line = record
            .position()
            .map(|p| p.line() as usize + 1)
            .unwrap_or(line + 1);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        out.rows_read += 1;
        match parse_row(&record, &cols, schema) {
            Ok(s) => out.samples.push(s),
            Err(reason) => out.malformed.push(MalformedRow { line, reason }),
        }
    }

    if out.rows_read > 0
        && out.malformed.len() as f64 > MAX_MALFORMED_FRACTION * out.rows_read as f64
    {
        return Err(DatasetError::ExcessiveMalformed {
            malformed: out.malformed.len(),
            total: out.rows_read,
        });
    }
    Ok(out)
}

fn field<'a>(record: &'a csv::StringRecord, idx: usize, what: &str) -> Result<&'a str, String> {
    record
        .get(idx)
        .ok_or_else(|| format!("missing {what} field"))
}

fn number(record: &csv::StringRecord, idx: usize, what: &str) -> Result<f64, String> {
    let raw = field(record, idx, what)?;
    let v: f64 = raw
        .parse()
        .map_err(|_| format!("{what} `{raw}` is not numeric"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{what} `{raw}` is not finite"))
    }
}

fn parse_row(
    record: &csv::StringRecord,
    cols: &Columns,
    schema: &SchemaMap,
) -> Result<RssSample, String> {
    let rss_dbm = number(record, cols.rss, "rss")?;
    let distance_m = match cols.distance {
        Some(i) => number(record, i, "distance")?,
        None => schema.distance_m.expect("validated schema"),
    };
    let position_pair: PositionPair = match cols.position {
        Some(i) => field(record, i, "position")?.parse()?,
        None => schema.position.expect("validated schema"),
    };
    let device_kind = match (cols.device, schema.device) {
        (Some(i), _) => field(record, i, "device")?.parse::<DeviceKind>()?,
        (None, Some(d)) => d,
        (None, None) => position_pair.device_kind(),
    };
    let t_offset_s = match cols.time {
        Some(i) => {
            let raw = field(record, i, "time")?;
            if raw.is_empty() {
                None
            } else {
                Some(number(record, i, "time")?)
            }
        }
        None => None,
    };
    let session_id = match (cols.session, &schema.session) {
        (Some(i), _) => field(record, i, "session")?.to_string(),
        (None, Some(s)) => s.clone(),
        (None, None) => format!("{position_pair}@{distance_m}"),
    };
    let s = RssSample {
        rss_dbm,
        distance_m,
        position_pair,
        device_kind,
        session_id,
        t_offset_s,
    };
    s.check_invariants()?;
    Ok(s)
}

/// Writes samples in the canonical comma-separated layout.
pub fn write_canonical<W: Write>(samples: &[RssSample], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{CANONICAL_HEADER}")?;
    for s in samples {
        let t = s.t_offset_s.map(|t| t.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{}",
            s.rss_dbm, s.distance_m, s.position_pair, s.device_kind, s.session_id, t
        )?;
    }
    Ok(())
}

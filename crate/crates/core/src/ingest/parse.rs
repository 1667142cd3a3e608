use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};

use super::record::MeasurementRecord;
use crate::metric::Metric;

/// Input row encodings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    /// Comma-delimited text with a header row.
    Delimited,
    /// One JSON object per line with fixed key names.
    JsonLines,
}

impl Format {
    /// Guesses the format from a file name; anything not ending in
    /// `.jsonl`/`.ndjson`/`.json` is delimited.
    pub fn from_path(path: &std::path::Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") | Some("json") => Format::JsonLines,
            _ => Format::Delimited,
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "delimited" | "csv" => Ok(Format::Delimited),
            "json-lines" | "jsonl" => Ok(Format::JsonLines),
            other => Err(format!("unknown format `{other}` (expected delimited or json-lines)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Delimited => "delimited",
            Format::JsonLines => "json-lines",
        })
    }
}

/// Machine-readable rejection category.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// Row could not be split into fields at all (bad JSON, bad UTF-8).
    Malformed,
    MissingField,
    NonNumeric,
    BadTimestamp,
    /// Value violates a validity invariant (non-positive throughput, ASN 0, ...).
    OutOfRange,
    /// server_id does not start with the metro code.
    Inconsistent,
    /// Value outside a configured sanity bound.
    OutsideBounds,
}

impl RejectReason {
    pub fn code(self) -> &'static str {
        match self {
            RejectReason::Malformed => "malformed",
            RejectReason::MissingField => "missing_field",
            RejectReason::NonNumeric => "non_numeric",
            RejectReason::BadTimestamp => "bad_timestamp",
            RejectReason::OutOfRange => "out_of_range",
            RejectReason::Inconsistent => "inconsistent",
            RejectReason::OutsideBounds => "outside_bounds",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rejection {
    pub reason: RejectReason,
    pub field: Option<String>,
    pub detail: String,
}

impl Rejection {
    pub(crate) fn new(reason: RejectReason, field: Option<&str>, detail: impl Into<String>) -> Self {
        Rejection {
            reason,
            field: field.map(str::to_string),
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.field {
            Some(field) => write!(f, "{} ({}): {}", self.reason, field, self.detail),
            None => write!(f, "{}: {}", self.reason, self.detail),
        }
    }
}

impl std::error::Error for Rejection {}

pub const TIMESTAMP: &str = "timestamp";
pub const METRO: &str = "metro";
pub const SERVER_ID: &str = "server_id";
pub const SERVER_ASN: &str = "server_asn";
pub const CLIENT_ASN: &str = "client_asn";

/// Canonical column order for delimited files.
pub const CANONICAL_COLUMNS: [&str; 9] = [
    TIMESTAMP,
    METRO,
    SERVER_ID,
    SERVER_ASN,
    CLIENT_ASN,
    "download_mbps",
    "min_rtt_ms",
    "upload_mbps",
    "loss_rate",
];

/// Column positions resolved from a delimited header row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Columns {
    timestamp: usize,
    metro: usize,
    server_id: usize,
    server_asn: usize,
    client_asn: usize,
    metrics: Vec<(Metric, usize)>,
}

impl Default for Columns {
    fn default() -> Self {
        Columns {
            timestamp: 0,
            metro: 1,
            server_id: 2,
            server_asn: 3,
            client_asn: 4,
            metrics: Metric::ALL.iter().enumerate().map(|(i, m)| (*m, 5 + i)).collect(),
        }
    }
}

impl Columns {
    /// Resolves columns by name. Unknown columns are ignored; the identity
    /// columns must all be present.
    pub fn from_header<'a, I>(names: I) -> Result<Columns, Vec<String>>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let names: Vec<&str> = names.into_iter().map(str::trim).collect();
        let find = |name: &str| names.iter().position(|n| *n == name);
        let mut missing = Vec::new();
        let mut need = |name: &str| {
            find(name).unwrap_or_else(|| {
                missing.push(name.to_string());
                usize::MAX
            })
        };
        let cols = Columns {
            timestamp: need(TIMESTAMP),
            metro: need(METRO),
            server_id: need(SERVER_ID),
            server_asn: need(SERVER_ASN),
            client_asn: need(CLIENT_ASN),
            metrics: Metric::ALL
                .iter()
                .filter_map(|m| find(m.name()).map(|i| (*m, i)))
                .collect(),
        };
        if missing.is_empty() {
            Ok(cols)
        } else {
            Err(missing)
        }
    }

    /// Builds a record from already-split fields.
    pub fn parse_fields(&self, fields: &[&str]) -> Result<MeasurementRecord, Rejection> {
        let get = |idx: usize| fields.get(idx).map(|s| s.trim()).filter(|s| !s.is_empty());
        let required = |idx: usize, name: &str| {
            get(idx).ok_or_else(|| Rejection::new(RejectReason::MissingField, Some(name), "empty or absent"))
        };
        let timestamp = parse_timestamp(required(self.timestamp, TIMESTAMP)?)?;
        let metro = required(self.metro, METRO)?.to_string();
        let server_id = required(self.server_id, SERVER_ID)?.to_string();
        let server_asn = parse_asn(required(self.server_asn, SERVER_ASN)?, SERVER_ASN)?;
        let client_asn = parse_asn(required(self.client_asn, CLIENT_ASN)?, CLIENT_ASN)?;
        let mut metrics = BTreeMap::new();
        for (metric, idx) in &self.metrics {
            if let Some(text) = get(*idx) {
                let value: f64 = text.parse().map_err(|_| {
                    Rejection::new(RejectReason::NonNumeric, Some(metric.name()), format!("`{text}`"))
                })?;
                metrics.insert(*metric, value);
            }
        }
        finish(MeasurementRecord {
            timestamp,
            metro,
            server_id,
            server_asn,
            client_asn,
            metrics,
        })
    }
}

fn parse_timestamp(text: &str) -> Result<DateTime<Utc>, Rejection> {
    DateTime::parse_from_rfc3339(text)
        .map(|t| t.with_timezone(&Utc).trunc_subsecs(0))
        .map_err(|e| Rejection::new(RejectReason::BadTimestamp, Some(TIMESTAMP), format!("`{text}`: {e}")))
}

fn parse_asn(text: &str, field: &str) -> Result<u32, Rejection> {
    let wide: i128 = text
        .parse()
        .map_err(|_| Rejection::new(RejectReason::NonNumeric, Some(field), format!("`{text}`")))?;
    asn_in_range(wide, field)
}

fn asn_in_range(wide: i128, field: &str) -> Result<u32, Rejection> {
    if (1..=u32::MAX as i128).contains(&wide) {
        Ok(wide as u32)
    } else {
        Err(Rejection::new(
            RejectReason::OutOfRange,
            Some(field),
            format!("{wide} not in [1, 4294967295]"),
        ))
    }
}

fn finish(record: MeasurementRecord) -> Result<MeasurementRecord, Rejection> {
    if record.metrics.is_empty() {
        return Err(Rejection::new(RejectReason::MissingField, Some("metrics"), "no metric values"));
    }
    match record.check() {
        Ok(()) => Ok(record),
        Err(field @ (METRO | SERVER_ID)) => Err(Rejection::new(
            RejectReason::Inconsistent,
            Some(field),
            format!("server `{}` is not in metro `{}`", record.server_id, record.metro),
        )),
        Err(field) => {
            let detail = field
                .parse::<Metric>()
                .ok()
                .and_then(|m| record.metric(m))
                .map(|v| format!("{v}"))
                .unwrap_or_else(|| "invalid".into());
            Err(Rejection::new(RejectReason::OutOfRange, Some(field), detail))
        }
    }
}

/// Parses one JSON-lines row.
pub fn parse_json(line: &str) -> Result<MeasurementRecord, Rejection> {
    let value: serde_json::Value = serde_json::from_str(line)
        .map_err(|e| Rejection::new(RejectReason::Malformed, None, e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Rejection::new(RejectReason::Malformed, None, "row is not a JSON object"))?;
    let present = |key: &str| obj.get(key).filter(|v| !v.is_null());
    let string = |key: &str| -> Result<String, Rejection> {
        match present(key) {
            None => Err(Rejection::new(RejectReason::MissingField, Some(key), "absent")),
            Some(serde_json::Value::String(s)) if !s.trim().is_empty() => Ok(s.trim().to_string()),
            Some(serde_json::Value::String(_)) => {
                Err(Rejection::new(RejectReason::MissingField, Some(key), "empty"))
            }
            Some(other) => Err(Rejection::new(RejectReason::Malformed, Some(key), format!("expected string, got {other}"))),
        }
    };
    let asn = |key: &str| -> Result<u32, Rejection> {
        match present(key) {
            None => Err(Rejection::new(RejectReason::MissingField, Some(key), "absent")),
            Some(serde_json::Value::Number(n)) => match n.as_i64() {
                Some(i) => asn_in_range(i as i128, key),
                None if n.as_u64().is_some() => asn_in_range(n.as_u64().unwrap() as i128, key),
                None => Err(Rejection::new(RejectReason::NonNumeric, Some(key), format!("{n} is not an integer"))),
            },
            Some(other) => Err(Rejection::new(RejectReason::NonNumeric, Some(key), format!("{other}"))),
        }
    };
    let timestamp = parse_timestamp(&string(TIMESTAMP)?)?;
    let metro = string(METRO)?;
    let server_id = string(SERVER_ID)?;
    let server_asn = asn(SERVER_ASN)?;
    let client_asn = asn(CLIENT_ASN)?;
    let mut metrics = BTreeMap::new();
    for metric in Metric::ALL {
        match present(metric.name()) {
            None => {}
            Some(serde_json::Value::Number(n)) => {
                let v = n.as_f64().ok_or_else(|| {
                    Rejection::new(RejectReason::NonNumeric, Some(metric.name()), format!("{n}"))
                })?;
                metrics.insert(metric, v);
            }
            Some(other) => {
                return Err(Rejection::new(RejectReason::NonNumeric, Some(metric.name()), format!("{other}")))
            }
        }
    }
    finish(MeasurementRecord {
        timestamp,
        metro,
        server_id,
        server_asn,
        client_asn,
        metrics,
    })
}

/// Parses one delimited row laid out in canonical column order.
pub fn parse_delimited(line: &str) -> Result<MeasurementRecord, Rejection> {
    parse_delimited_with(line, &Columns::default())
}

pub fn parse_delimited_with(line: &str, columns: &Columns) -> Result<MeasurementRecord, Rejection> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(line.as_bytes());
    let mut row = csv::StringRecord::new();
    match reader.read_record(&mut row) {
        Ok(true) => {
            let fields: Vec<&str> = row.iter().collect();
            columns.parse_fields(&fields)
        }
        Ok(false) => Err(Rejection::new(RejectReason::Malformed, None, "empty row")),
        Err(e) => Err(Rejection::new(RejectReason::Malformed, None, e.to_string())),
    }
}

/// Parses one complete input row. Delimited rows use the canonical column
/// order; use [`Columns::from_header`] for files with a different layout.
pub fn parse_record(line: &str, format: Format) -> Result<MeasurementRecord, Rejection> {
    match format {
        Format::Delimited => parse_delimited(line),
        Format::JsonLines => parse_json(line),
    }
}

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::ops::AddAssign;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::parse::{parse_json, Columns, Format, RejectReason, Rejection, CANONICAL_COLUMNS};
use super::record::MeasurementRecord;
use crate::metric::Metric;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {source_name}: {error}")]
    Io {
        source_name: String,
        #[source]
        error: std::io::Error,
    },
    #[error("{source_name}: header is missing required columns: {}", missing.join(", "))]
    Header { source_name: String, missing: Vec<String> },
    #[error("invalid filter: {0}")]
    Filter(String),
}

/// Optional sanity bounds for one metric. Values outside are rejected.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

impl Bounds {
    fn contains(&self, v: f64) -> bool {
        self.min.is_none_or(|lo| v >= lo) && self.max.is_none_or(|hi| v <= hi)
    }
}

type Window = (Option<DateTime<Utc>>, Option<DateTime<Utc>>);

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IngestFilter {
    window: Option<Window>,
    metros: Option<BTreeSet<String>>,
    bounds: BTreeMap<Metric, Bounds>,
}

impl IngestFilter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Restricts to `[from, to)`; either end may be open.
    pub fn with_window(
        mut self,
        from: Option<DateTime<Utc>>,
        to: Option<DateTime<Utc>>,
    ) -> Result<Self, IngestError> {
        if let (Some(a), Some(b)) = (from, to) {
            if a >= b {
                return Err(IngestError::Filter(format!("window start {a} is not before end {b}")));
            }
        }
        self.window = if from.is_none() && to.is_none() { None } else { Some((from, to)) };
        Ok(self)
    }

    pub fn with_metros<I, S>(mut self, metros: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = metros.into_iter().map(Into::into).collect();
        self.metros = if set.is_empty() { None } else { Some(set) };
        self
    }

    pub fn with_bounds(mut self, metric: Metric, bounds: Bounds) -> Self {
        self.bounds.insert(metric, bounds);
        self
    }

    fn admits(&self, record: &MeasurementRecord) -> bool {
        if let Some((from, to)) = &self.window {
            if from.is_some_and(|f| record.timestamp < f) || to.is_some_and(|t| record.timestamp >= t) {
                return false;
            }
        }
        self.metros.as_ref().is_none_or(|m| m.contains(&record.metro))
    }

    fn check_bounds(&self, record: &MeasurementRecord) -> Result<(), Rejection> {
        for (metric, bounds) in &self.bounds {
            if let Some(v) = record.metric(*metric) {
                if !bounds.contains(v) {
                    return Err(Rejection::new(
                        RejectReason::OutsideBounds,
                        Some(metric.name()),
                        format!("{v} outside {:?}..{:?}", bounds.min, bounds.max),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Per-run ingest counters. Mergeable by addition across partitions.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub total: u64,
    pub accepted: u64,
    pub filtered: u64,
    pub rejected: BTreeMap<RejectReason, u64>,
}

impl IngestStats {
    pub fn rejected_total(&self) -> u64 {
        self.rejected.values().sum()
    }

    /// accepted + rejected + filtered == total
    pub fn is_conserved(&self) -> bool {
        self.accepted + self.filtered + self.rejected_total() == self.total
    }
}

impl AddAssign<&IngestStats> for IngestStats {
    fn add_assign(&mut self, rhs: &IngestStats) {
        self.total += rhs.total;
        self.accepted += rhs.accepted;
        self.filtered += rhs.filtered;
        for (reason, n) in &rhs.rejected {
            *self.rejected.entry(*reason).or_default() += n;
        }
    }
}

struct Tally<'a, F> {
    filter: &'a IngestFilter,
    stats: IngestStats,
    source_name: &'a str,
    sink: F,
}

impl<F: FnMut(MeasurementRecord)> Tally<'_, F> {
    fn row(&mut self, row_number: u64, parsed: Result<MeasurementRecord, Rejection>) {
        self.stats.total += 1;
        let outcome = parsed.and_then(|r| {
            if !self.filter.admits(&r) {
                return Ok(None);
            }
            self.filter.check_bounds(&r).map(|_| Some(r))
        });
        match outcome {
            Ok(Some(record)) => {
                self.stats.accepted += 1;
                (self.sink)(record);
            }
            Ok(None) => self.stats.filtered += 1,
            Err(rejection) => {
                log::debug!("{}:{}: rejected: {}", self.source_name, row_number, rejection);
                *self.stats.rejected.entry(rejection.reason).or_default() += 1;
            }
        }
    }
}

/// Visits every row of `source` once, handing accepted records to `sink`.
///
/// Delimited sources must start with a header row. Blank lines are not rows.
pub fn ingest_with<R, F>(
    source: R,
    source_name: &str,
    format: Format,
    filter: &IngestFilter,
    sink: F,
) -> Result<IngestStats, IngestError>
where
    R: Read,
    F: FnMut(MeasurementRecord),
{
    let io_err = |error| IngestError::Io { source_name: source_name.to_string(), error };
    let mut tally = Tally { filter, stats: IngestStats::default(), source_name, sink };
    match format {
        Format::Delimited => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(false)
                .flexible(true)
                .from_reader(source);
            let mut row = csv::ByteRecord::new();
            let mut columns: Option<Columns> = None;
            let mut row_number = 0u64;
            loop {
                match reader.read_byte_record(&mut row) {
                    Ok(false) => break,
                    Ok(true) => {}
                    Err(e) => match e.into_kind() {
                        csv::ErrorKind::Io(error) => return Err(io_err(error)),
                        other => {
                            row_number += 1;
                            let rej = Rejection::new(RejectReason::Malformed, None, format!("{other:?}"));
                            tally.row(row_number, Err(rej));
                            continue;
                        }
                    },
                }
                row_number += 1;
                let fields: Result<Vec<&str>, _> = row.iter().map(std::str::from_utf8).collect();
                match (&columns, fields) {
                    (None, Ok(names)) => {
                        columns = Some(Columns::from_header(names).map_err(|missing| IngestError::Header {
                            source_name: source_name.to_string(),
                            missing,
                        })?);
                    }
                    (None, Err(_)) => {
                        return Err(IngestError::Header {
                            source_name: source_name.to_string(),
                            missing: CANONICAL_COLUMNS[..5].iter().map(|s| s.to_string()).collect(),
                        })
                    }
                    (Some(cols), Ok(fields)) => tally.row(row_number, cols.parse_fields(&fields)),
                    (Some(_), Err(_)) => tally.row(
                        row_number,
                        Err(Rejection::new(RejectReason::Malformed, None, "invalid UTF-8")),
                    ),
                }
            }
        }
        Format::JsonLines => {
            let mut reader = BufReader::new(source);
            let mut buf = Vec::new();
            let mut row_number = 0u64;
            loop {
                buf.clear();
                if reader.read_until(b'\n', &mut buf).map_err(io_err)? == 0 {
                    break;
                }
                let parsed = match std::str::from_utf8(&buf) {
                    Ok(line) if line.trim().is_empty() => continue,
                    Ok(line) => parse_json(line),
                    Err(_) => Err(Rejection::new(RejectReason::Malformed, None, "invalid UTF-8")),
                };
                row_number += 1;
                tally.row(row_number, parsed);
            }
        }
    }
    Ok(tally.stats)
}

/// Collecting variant of [`ingest_with`].
pub fn ingest_stream<R: Read>(
    source: R,
    source_name: &str,
    format: Format,
    filter: &IngestFilter,
) -> Result<(Vec<MeasurementRecord>, IngestStats), IngestError> {
    let mut records = Vec::new();
    let stats = ingest_with(source, source_name, format, filter, |r| records.push(r))?;
    Ok((records, stats))
}

pub fn open_source(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|error| IngestError::Io { source_name: path.display().to_string(), error })
}

#[derive(Serialize)]
struct JsonRow<'a> {
    timestamp: String,
    metro: &'a str,
    server_id: &'a str,
    server_asn: u32,
    client_asn: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    download_mbps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_rtt_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    upload_mbps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    loss_rate: Option<f64>,
}

fn timestamp_text(t: &DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// Writes records in an ingestible form. Delimited output always carries the
/// canonical header, even when `records` is empty.
pub fn write_records<'a, W, I>(mut out: W, format: Format, records: I) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a MeasurementRecord>,
{
    match format {
        Format::Delimited => {
            writeln!(out, "{}", CANONICAL_COLUMNS.join(","))?;
            for r in records {
                write!(
                    out,
                    "{},{},{},{},{}",
                    timestamp_text(&r.timestamp),
                    r.metro,
                    r.server_id,
                    r.server_asn,
                    r.client_asn
                )?;
                for m in Metric::ALL {
                    match r.metric(m) {
                        Some(v) => write!(out, ",{v}")?,
                        None => write!(out, ",")?,
                    }
                }
                writeln!(out)?;
            }
        }
        Format::JsonLines => {
            for r in records {
                let row = JsonRow {
                    timestamp: timestamp_text(&r.timestamp),
                    metro: &r.metro,
                    server_id: &r.server_id,
                    server_asn: r.server_asn,
                    client_asn: r.client_asn,
                    download_mbps: r.metric(Metric::DownloadMbps),
                    min_rtt_ms: r.metric(Metric::MinRttMs),
                    upload_mbps: r.metric(Metric::UploadMbps),
                    loss_rate: r.metric(Metric::LossRate),
                };
                serde_json::to_writer(&mut out, &row)?;
                writeln!(out)?;
            }
        }
    }
    Ok(())
}

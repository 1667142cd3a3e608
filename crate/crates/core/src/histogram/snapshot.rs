//! Flat-table histogram snapshots.
//!
//! ```text
//! # midpath histogram snapshot v1
//! # scheme metric=download_mbps bins_per_decade=30 reference=1 underflow_below=0.01 overflow_above=100000
//! ...one scheme line per metric...
//! metro,server_id,client_asn,metric,bin_index,count
//! gru,gru02,28573,download_mbps,58,3
//! ```
//!
//! Rows are sorted by cell then bin. `bin_index` is an integer or one of
//! `underflow`/`overflow`.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use super::binning::{Bin, BinningScheme, SchemeSet};
use super::sparse::{CellKey, HistogramError, SparseHistogram};
use crate::metric::Metric;
use crate::scalar::Scalar;

const MAGIC: &str = "# midpath histogram snapshot v1";
const TABLE_HEADER: [&str; 6] = ["metro", "server_id", "client_asn", "metric", "bin_index", "count"];

pub fn save<T: Scalar, W: Write>(hist: &SparseHistogram<T>, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{MAGIC}")?;
    for (metric, s) in hist.schemes().iter() {
        writeln!(
            out,
            "# scheme metric={} bins_per_decade={} reference={} underflow_below={} overflow_above={}",
            metric, s.bins_per_decade, s.reference, s.underflow_below, s.overflow_above
        )?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TABLE_HEADER)?;
    for (key, cell) in hist.cells() {
        for (bin, count) in cell.bins() {
            w.write_record([
                key.metro.as_str(),
                key.server_id.as_str(),
                &key.client_asn.to_string(),
                key.metric.name(),
                &bin.to_string(),
                &count.to_string(),
            ])?;
        }
    }
    w.flush()
}

fn bad(line: usize, message: impl Into<String>) -> HistogramError {
    HistogramError::Snapshot { line, message: message.into() }
}

fn parse_scheme<T: Scalar>(line_no: usize, text: &str) -> Result<(Metric, BinningScheme<T>), HistogramError> {
    let mut metric = None;
    let mut bpd = None;
    let mut reference = None;
    let mut under = None;
    let mut over = None;
    for part in text.split_whitespace() {
        let (k, v) = part.split_once('=').ok_or_else(|| bad(line_no, format!("bad scheme field `{part}`")))?;
        let num = |v: &str| v.parse::<T>().map_err(|_| bad(line_no, format!("bad number `{v}`")));
        match k {
            "metric" => metric = Some(v.parse::<Metric>().map_err(|e| bad(line_no, e.to_string()))?),
            "bins_per_decade" => bpd = Some(v.parse::<u32>().map_err(|_| bad(line_no, format!("bad bins_per_decade `{v}`")))?),
            "reference" => reference = Some(num(v)?),
            "underflow_below" => under = Some(num(v)?),
            "overflow_above" => over = Some(num(v)?),
            other => return Err(bad(line_no, format!("unknown scheme field `{other}`"))),
        }
    }
    match (metric, bpd, reference, under, over) {
        (Some(m), Some(b), Some(r), Some(u), Some(o)) => {
            let s = BinningScheme::new(b, r, u, o).map_err(|e| bad(line_no, e.to_string()))?;
            Ok((m, s))
        }
        _ => Err(bad(line_no, "incomplete scheme line")),
    }
}

pub fn load<T: Scalar, R: Read>(mut input: R) -> Result<SparseHistogram<T>, HistogramError> {
    let mut text = String::new();
    input
        .read_to_string(&mut text)
        .map_err(|e| bad(0, e.to_string()))?;
    let mut lines = text.lines().enumerate().peekable();
    match lines.next() {
        Some((_, MAGIC)) => {}
        _ => return Err(bad(1, "not a histogram snapshot")),
    }
    let mut schemes = SchemeSet::<T>::default();
    let mut seen = BTreeSet::new();
    let mut table_start = None;
    for (i, line) in lines {
        match line.strip_prefix("# scheme ") {
            Some(rest) => {
                let (metric, scheme) = parse_scheme(i + 1, rest)?;
                if !seen.insert(metric) {
                    return Err(bad(i + 1, format!("duplicate scheme for {metric}")));
                }
                schemes = schemes.with(metric, scheme);
            }
            None => {
                table_start = Some(i);
                break;
            }
        }
    }
    if seen.len() != Metric::ALL.len() {
        return Err(bad(1, "snapshot must declare a scheme for every metric"));
    }
    let mut hist = SparseHistogram::new(schemes);
    let Some(start) = table_start else { return Ok(hist) };
    let body: String = text.lines().skip(start).flat_map(|l| [l, "\n"]).collect();
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    let header = reader.headers().map_err(|e| bad(start + 1, e.to_string()))?;
    if header.iter().ne(TABLE_HEADER) {
        return Err(bad(start + 1, "unexpected table header"));
    }
    let mut seen_rows = BTreeSet::new();
    for (i, row) in reader.records().enumerate() {
        let line = start + i + 2;
        let row = row.map_err(|e| bad(line, e.to_string()))?;
        let field = |n: usize| row.get(n).ok_or_else(|| bad(line, "short row"));
        let asn: u32 = field(2)?.parse().map_err(|_| bad(line, "bad client_asn"))?;
        let metric: Metric = field(3)?.parse().map_err(|e: crate::metric::UnknownMetric| bad(line, e.to_string()))?;
        let bin: Bin = field(4)?.parse().map_err(|e: String| bad(line, e))?;
        let count: u64 = field(5)?.parse().map_err(|_| bad(line, "bad count"))?;
        if count == 0 {
            return Err(bad(line, "zero count"));
        }
        let key = CellKey::new(field(0)?, field(1)?, asn, metric);
        if !seen_rows.insert((key.clone(), bin)) {
            return Err(bad(line, "duplicate row"));
        }
        hist.add_count(key, bin, count).map_err(|e| bad(line, e.to_string()))?;
    }
    Ok(hist)
}

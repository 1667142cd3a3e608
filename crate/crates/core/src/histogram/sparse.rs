use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::binning::{Bin, BinningError, SchemeSet};
use crate::ingest::MeasurementRecord;
use crate::metric::Metric;
use crate::scalar::Scalar;
use crate::stats::BinnedDistribution;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HistogramError {
    #[error(transparent)]
    Binning(#[from] BinningError),
    #[error("binning schemes differ; histograms cannot be combined")]
    SchemeMismatch,
    #[error("invalid cell key: {0}")]
    BadKey(String),
    #[error("snapshot line {line}: {message}")]
    Snapshot { line: usize, message: String },
}

/// Histogram axes other than the value bin.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub metro: String,
    pub server_id: String,
    pub client_asn: u32,
    pub metric: Metric,
}

impl CellKey {
    pub fn new(metro: impl Into<String>, server_id: impl Into<String>, client_asn: u32, metric: Metric) -> Self {
        CellKey { metro: metro.into(), server_id: server_id.into(), client_asn, metric }
    }

    fn check(&self) -> Result<(), HistogramError> {
        if self.metro.is_empty() || self.server_id.is_empty() || self.client_asn == 0 {
            return Err(HistogramError::BadKey(format!("{self:?}")));
        }
        Ok(())
    }
}

/// Bin counts of one cell. Never holds a zero count.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Cell {
    bins: BTreeMap<Bin, u64>,
    total: u64,
}

impl Cell {
    fn add(&mut self, bin: Bin, count: u64) {
        if count == 0 {
            return;
        }
        *self.bins.entry(bin).or_default() += count;
        self.total += count;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn bins(&self) -> impl Iterator<Item = (Bin, u64)> + '_ {
        self.bins.iter().map(|(b, c)| (*b, *c))
    }
}

/// Bin counts for one cell, sorted by bin.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CellDistribution {
    pub entries: Vec<(Bin, u64)>,
    pub total: u64,
}

/// Counts keyed by (metro, server, client ASN, metric, bin). Zero-count
/// entries are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseHistogram<T> {
    schemes: SchemeSet<T>,
    cells: BTreeMap<CellKey, Cell>,
}

impl<T: Scalar> Default for SparseHistogram<T> {
    fn default() -> Self {
        Self::new(SchemeSet::default())
    }
}

impl<T: Scalar> SparseHistogram<T> {
    pub fn new(schemes: SchemeSet<T>) -> Self {
        SparseHistogram { schemes, cells: BTreeMap::new() }
    }

    pub fn schemes(&self) -> &SchemeSet<T> {
        &self.schemes
    }

    /// Bin for one observation. Zero loss rate is legal but has no logarithm
    /// and lands in the underflow bin.
    pub fn bin_for(&self, metric: Metric, value: f64) -> Result<Bin, BinningError> {
        if metric == Metric::LossRate && value == 0.0 {
            return Ok(Bin::Underflow);
        }
        self.schemes.get(metric).bin_index(T::of(value))
    }

    /// Counts each present metric of `record` into exactly one bin. The
    /// histogram is unchanged if any metric fails to bin.
    pub fn insert(&mut self, record: &MeasurementRecord) -> Result<(), HistogramError> {
        let bins = record
            .metrics
            .iter()
            .map(|(m, v)| self.bin_for(*m, *v).map(|b| (*m, b)))
            .collect::<Result<Vec<_>, _>>()?;
        for (metric, bin) in bins {
            let key = CellKey::new(record.metro.clone(), record.server_id.clone(), record.client_asn, metric);
            self.cells.entry(key).or_default().add(bin, 1);
        }
        Ok(())
    }

    /// Adds `count` observations to one bin directly.
    pub fn add_count(&mut self, key: CellKey, bin: Bin, count: u64) -> Result<(), HistogramError> {
        key.check()?;
        if count > 0 {
            self.cells.entry(key).or_default().add(bin, count);
        }
        Ok(())
    }

    pub fn merge_from(&mut self, other: &SparseHistogram<T>) -> Result<(), HistogramError> {
        if self.schemes != other.schemes {
            return Err(HistogramError::SchemeMismatch);
        }
        for (key, cell) in &other.cells {
            let mine = self.cells.entry(key.clone()).or_default();
            for (bin, count) in cell.bins() {
                mine.add(bin, count);
            }
        }
        Ok(())
    }

    pub fn merge(a: &SparseHistogram<T>, b: &SparseHistogram<T>) -> Result<SparseHistogram<T>, HistogramError> {
        let mut out = a.clone();
        out.merge_from(b)?;
        Ok(out)
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> impl Iterator<Item = (&CellKey, &Cell)> {
        self.cells.iter()
    }

    pub fn cell(&self, key: &CellKey) -> Option<&Cell> {
        self.cells.get(key)
    }

    pub fn cell_total(&self, key: &CellKey) -> u64 {
        self.cells.get(key).map_or(0, Cell::total)
    }

    /// Number of stored (cell, bin) entries.
    pub fn entry_count(&self) -> usize {
        self.cells.values().map(|c| c.bins.len()).sum()
    }

    /// Sum of every count in the histogram.
    pub fn grand_total(&self) -> u64 {
        self.cells.values().map(Cell::total).sum()
    }

    pub fn cell_distribution(&self, key: &CellKey) -> CellDistribution {
        match self.cells.get(key) {
            Some(cell) => CellDistribution { entries: cell.bins().collect(), total: cell.total },
            None => CellDistribution::default(),
        }
    }

    /// The cell as a statistics operand, or `None` for an empty cell.
    pub fn distribution(&self, key: &CellKey) -> Option<BinnedDistribution<T>> {
        let cell = self.cells.get(key)?;
        BinnedDistribution::new(*self.schemes.get(key.metric), cell.bins().collect()).ok()
    }

    pub fn metros(&self) -> BTreeSet<&str> {
        self.cells.keys().map(|k| k.metro.as_str()).collect()
    }

    pub fn servers(&self, metro: &str) -> BTreeSet<&str> {
        self.cells
            .keys()
            .filter(|k| k.metro == metro)
            .map(|k| k.server_id.as_str())
            .collect()
    }

    /// Total counts per client ASN in a metro, across servers and metrics.
    pub fn isp_totals(&self, metro: &str) -> BTreeMap<u32, u64> {
        let mut out = BTreeMap::new();
        for (k, cell) in self.cells.iter().filter(|(k, _)| k.metro == metro) {
            *out.entry(k.client_asn).or_default() += cell.total;
        }
        out
    }
}

//! Difference statistics between two binned distributions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::histogram::{Bin, BinningScheme};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("distribution is empty")]
    Empty,
    #[error("distribution entries must have positive counts in strictly increasing bin order")]
    Unsorted,
    #[error("distributions use different binning schemes")]
    SchemeMismatch,
}

/// Share of mass in a sentinel bin above which a distribution is reported as
/// truncated.
pub const SENTINEL_MASS_LIMIT: f64 = 0.01;

/// Sorted per-bin counts of one sample, total ≥ 1.
#[derive(Clone, Debug, PartialEq)]
pub struct BinnedDistribution<T> {
    scheme: BinningScheme<T>,
    entries: Vec<(Bin, u64)>,
    total: u64,
}

impl<T: Scalar> BinnedDistribution<T> {
    pub fn new(scheme: BinningScheme<T>, entries: Vec<(Bin, u64)>) -> Result<Self, StatsError> {
        if entries.is_empty() {
            return Err(StatsError::Empty);
        }
        if entries.iter().any(|e| e.1 == 0) || entries.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(StatsError::Unsorted);
        }
        let total = entries.iter().map(|e| e.1).sum();
        Ok(BinnedDistribution { scheme, entries, total })
    }

    /// Bins raw positive values. Values that cannot be binned are skipped.
    pub fn from_values(scheme: BinningScheme<T>, values: impl IntoIterator<Item = T>) -> Result<Self, StatsError> {
        let mut counts = std::collections::BTreeMap::<Bin, u64>::new();
        for v in values {
            if let Ok(bin) = scheme.bin_index(v) {
                *counts.entry(bin).or_default() += 1;
            }
        }
        Self::new(scheme, counts.into_iter().collect())
    }

    pub fn scheme(&self) -> &BinningScheme<T> {
        &self.scheme
    }

    pub fn entries(&self) -> &[(Bin, u64)] {
        &self.entries
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// The same counts moved `delta` index bins along the axis. Sentinel
    /// entries keep their position.
    pub fn shifted(&self, delta: i32) -> Self {
        BinnedDistribution {
            scheme: self.scheme,
            entries: self.entries.iter().map(|(b, c)| (b.shifted(delta), *c)).collect(),
            total: self.total,
        }
    }

    pub fn sentinel_fraction(&self) -> T {
        let n: u64 = self.entries.iter().filter(|e| e.0.is_sentinel()).map(|e| e.1).sum();
        T::of_count(n) / T::of_count(self.total)
    }

    /// Per-bin fraction of the total.
    pub fn density(&self) -> Vec<(Bin, T)> {
        let total = T::of_count(self.total);
        self.entries.iter().map(|(b, c)| (*b, T::of_count(*c) / total)).collect()
    }
}

/// Cumulative fraction at the upper boundary of each occupied bin.
/// Strictly increasing and ending at exactly 1.
pub fn cdf<T: Scalar>(dist: &BinnedDistribution<T>) -> Vec<(Bin, T)> {
    let total = T::of_count(dist.total);
    let mut running = 0u64;
    dist.entries
        .iter()
        .map(|(b, c)| {
            running += c;
            (*b, T::of_count(running) / total)
        })
        .collect()
}

fn same_scheme<T: Scalar>(a: &BinnedDistribution<T>, b: &BinnedDistribution<T>) -> Result<(), StatsError> {
    if a.scheme == b.scheme {
        Ok(())
    } else {
        Err(StatsError::SchemeMismatch)
    }
}

/// Largest |CDF_a − CDF_b| over the union of occupied bin boundaries.
pub fn ks_distance<T: Scalar>(a: &BinnedDistribution<T>, b: &BinnedDistribution<T>) -> Result<T, StatsError> {
    same_scheme(a, b)?;
    let (na, nb) = (T::of_count(a.total), T::of_count(b.total));
    let (mut i, mut j) = (0, 0);
    let (mut ca, mut cb) = (0u64, 0u64);
    let mut worst = T::zero();
    while i < a.entries.len() || j < b.entries.len() {
        let next_a = a.entries.get(i).map(|e| e.0);
        let next_b = b.entries.get(j).map(|e| e.0);
        let bin = match (next_a, next_b) {
            (Some(x), Some(y)) => x.min(y),
            (Some(x), None) => x,
            (None, Some(y)) => y,
            (None, None) => unreachable!(),
        };
        if next_a == Some(bin) {
            ca += a.entries[i].1;
            i += 1;
        }
        if next_b == Some(bin) {
            cb += b.entries[j].1;
            j += 1;
        }
        let gap = (T::of_count(ca) / na - T::of_count(cb) / nb).abs();
        worst = worst.max(gap);
    }
    Ok(worst)
}

/// exp of the count-weighted mean log of bin centers.
pub fn geometric_mean<T: Scalar>(dist: &BinnedDistribution<T>) -> T {
    let total = T::of_count(dist.total);
    let log_sum = dist
        .entries
        .iter()
        .fold(T::zero(), |acc, (b, c)| acc + T::of_count(*c) * dist.scheme.center(*b).ln());
    (log_sum / total).exp()
}

/// `(GM_a / GM_b, max(r, 1/r))`.
pub fn spread<T: Scalar>(a: &BinnedDistribution<T>, b: &BinnedDistribution<T>) -> Result<(T, T), StatsError> {
    same_scheme(a, b)?;
    let ratio = geometric_mean(a) / geometric_mean(b);
    Ok((ratio, fold(ratio)))
}

fn fold<T: Scalar>(ratio: T) -> T {
    ratio.max(ratio.recip())
}

/// Pain score flavor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PainMode {
    /// Ten times the KS distance.
    Ks,
    /// Folded spread.
    Spread,
}

impl PainMode {
    pub const ALL: [PainMode; 2] = [PainMode::Ks, PainMode::Spread];

    pub fn name(self) -> &'static str {
        match self {
            PainMode::Ks => "ks",
            PainMode::Spread => "spread",
        }
    }
}

impl fmt::Display for PainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PainMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ks" => Ok(PainMode::Ks),
            "spread" => Ok(PainMode::Spread),
            other => Err(format!("unknown pain mode `{other}` (expected ks or spread)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifferenceStat<T> {
    pub ks_distance: T,
    /// GM of `a` over GM of `b`.
    pub spread: T,
    pub spread_folded: T,
    pub pain_ks: T,
    pub n_a: u64,
    pub n_b: u64,
    /// More than [`SENTINEL_MASS_LIMIT`] of the mass sits in a sentinel bin.
    pub truncated_a: bool,
    pub truncated_b: bool,
}

impl<T: Scalar> DifferenceStat<T> {
    pub fn between(a: &BinnedDistribution<T>, b: &BinnedDistribution<T>) -> Result<Self, StatsError> {
        let ks = ks_distance(a, b)?;
        let (spread, spread_folded) = spread(a, b)?;
        let limit = T::of(SENTINEL_MASS_LIMIT);
        Ok(DifferenceStat {
            ks_distance: ks,
            spread,
            spread_folded,
            pain_ks: T::of(10.0) * ks,
            n_a: a.total,
            n_b: b.total,
            truncated_a: a.sentinel_fraction() > limit,
            truncated_b: b.sentinel_fraction() > limit,
        })
    }
}

pub fn pain_score<T: Scalar>(stat: &DifferenceStat<T>, mode: PainMode) -> T {
    match mode {
        PainMode::Ks => stat.pain_ks,
        PainMode::Spread => stat.spread_folded,
    }
}

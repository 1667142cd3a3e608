use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::metric::Metric;
use crate::scalar::Scalar;

/// A logarithmic bin, or one of the two catch-all sentinels.
///
/// Ordering follows the value axis: underflow < every index < overflow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bin {
    Underflow,
    Index(i32),
    Overflow,
}

impl Bin {
    pub fn is_sentinel(self) -> bool {
        !matches!(self, Bin::Index(_))
    }

    /// Moves an index bin by `delta` positions; sentinels stay put.
    pub fn shifted(self, delta: i32) -> Bin {
        match self {
            Bin::Index(i) => Bin::Index(i + delta),
            other => other,
        }
    }
}

impl fmt::Display for Bin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bin::Underflow => f.write_str("underflow"),
            Bin::Index(i) => write!(f, "{i}"),
            Bin::Overflow => f.write_str("overflow"),
        }
    }
}

impl FromStr for Bin {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "underflow" => Ok(Bin::Underflow),
            "overflow" => Ok(Bin::Overflow),
            other => other.parse().map(Bin::Index).map_err(|_| format!("bad bin `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BinningError {
    #[error("value {0} cannot be log-binned (must be finite and positive)")]
    BadValue(f64),
    #[error("invalid binning scheme: {0}")]
    BadScheme(String),
}

/// Logarithmic bin geometry.
///
/// Index bins are half-open `[lower, upper)` with
/// `lower(i) = reference * 10^(i / bins_per_decade)`. Values at or below
/// `underflow_below` go to [`Bin::Underflow`], values at or above
/// `overflow_above` to [`Bin::Overflow`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinningScheme<T> {
    pub bins_per_decade: u32,
    pub reference: T,
    pub underflow_below: T,
    pub overflow_above: T,
}

impl<T: Scalar> Default for BinningScheme<T> {
    fn default() -> Self {
        BinningScheme {
            bins_per_decade: 30,
            reference: T::one(),
            underflow_below: T::of(0.01),
            overflow_above: T::of(1e5),
        }
    }
}

impl<T: Scalar> BinningScheme<T> {
    pub fn new(bins_per_decade: u32, reference: T, underflow_below: T, overflow_above: T) -> Result<Self, BinningError> {
        let scheme = BinningScheme { bins_per_decade, reference, underflow_below, overflow_above };
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn validate(&self) -> Result<(), BinningError> {
        let positive = |v: T| v.is_finite() && v > T::zero();
        if self.bins_per_decade == 0 {
            return Err(BinningError::BadScheme("bins_per_decade must be positive".into()));
        }
        if !positive(self.reference) || !positive(self.underflow_below) || !positive(self.overflow_above) {
            return Err(BinningError::BadScheme("reference and range limits must be finite and positive".into()));
        }
        if self.underflow_below >= self.overflow_above {
            return Err(BinningError::BadScheme(format!(
                "underflow_below {} must be below overflow_above {}",
                self.underflow_below, self.overflow_above
            )));
        }
        Ok(())
    }

    fn decade_power(&self, steps: T) -> T {
        self.reference * T::of(10.0).powf(steps / T::of_count(self.bins_per_decade as u64))
    }

    /// Lower boundary of index bin `i`.
    pub fn lower(&self, index: i32) -> T {
        self.decade_power(T::of(index as f64))
    }

    pub fn upper(&self, index: i32) -> T {
        self.lower(index + 1)
    }

    /// Representative value of a bin: the log-midpoint for index bins, the
    /// range limit for sentinels.
    pub fn center(&self, bin: Bin) -> T {
        match bin {
            Bin::Underflow => self.underflow_below,
            Bin::Index(i) => self.decade_power(T::of(i as f64 + 0.5)),
            Bin::Overflow => self.overflow_above,
        }
    }

    pub fn bin_index(&self, value: T) -> Result<Bin, BinningError> {
        if !(value.is_finite() && value > T::zero()) {
            return Err(BinningError::BadValue(value.to_f64_lossy()));
        }
        if value <= self.underflow_below {
            return Ok(Bin::Underflow);
        }
        if value >= self.overflow_above {
            return Ok(Bin::Overflow);
        }
        let bpd = T::of_count(self.bins_per_decade as u64);
        let guess = (bpd * (value / self.reference).log10()).floor();
        let mut index = guess.to_i32().ok_or(BinningError::BadValue(value.to_f64_lossy()))?;
        // log10 rounding can land one bin off near a boundary; settle against
        // the same boundary function used everywhere else
        while self.lower(index + 1) <= value {
            index += 1;
        }
        while self.lower(index) > value {
            index -= 1;
        }
        Ok(Bin::Index(index))
    }
}

/// One binning scheme per metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeSet<T> {
    schemes: BTreeMap<Metric, BinningScheme<T>>,
}

impl<T: Scalar> Default for SchemeSet<T> {
    fn default() -> Self {
        Self::uniform(BinningScheme::default())
    }
}

impl<T: Scalar> SchemeSet<T> {
    /// Loss rate keeps its own underflow limit (`1e-4`) since typical values
    /// sit far below the throughput/RTT default.
    pub fn uniform(scheme: BinningScheme<T>) -> Self {
        let mut schemes = BTreeMap::new();
        for metric in Metric::ALL {
            let mut s = scheme;
            if metric == Metric::LossRate {
                s.underflow_below = T::of(1e-4).min(scheme.underflow_below);
            }
            schemes.insert(metric, s);
        }
        SchemeSet { schemes }
    }

    pub fn with(mut self, metric: Metric, scheme: BinningScheme<T>) -> Self {
        self.schemes.insert(metric, scheme);
        self
    }

    pub fn get(&self, metric: Metric) -> &BinningScheme<T> {
        &self.schemes[&metric]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Metric, &BinningScheme<T>)> {
        self.schemes.iter().map(|(m, s)| (*m, s))
    }

    pub fn validate(&self) -> Result<(), BinningError> {
        for metric in Metric::ALL {
            self.schemes
                .get(&metric)
                .ok_or_else(|| BinningError::BadScheme(format!("no scheme for {metric}")))?
                .validate()?;
        }
        Ok(())
    }
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Per-test observables carried by a measurement record.
///
/// The declared order is the canonical column order and the sort order used
/// in every report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    DownloadMbps,
    MinRttMs,
    UploadMbps,
    LossRate,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::DownloadMbps,
        Metric::MinRttMs,
        Metric::UploadMbps,
        Metric::LossRate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::DownloadMbps => "download_mbps",
            Metric::MinRttMs => "min_rtt_ms",
            Metric::UploadMbps => "upload_mbps",
            Metric::LossRate => "loss_rate",
        }
    }

    /// Throughput metrics, where a larger value is better.
    pub fn is_throughput(self) -> bool {
        matches!(self, Metric::DownloadMbps | Metric::UploadMbps)
    }

    /// Whether `value` is a legal observation of this metric.
    pub fn accepts(self, value: f64) -> bool {
        if !value.is_finite() {
            return false;
        }
        match self {
            Metric::LossRate => (0.0..=1.0).contains(&value),
            _ => value > 0.0,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown metric `{0}` (expected one of download_mbps, min_rtt_ms, upload_mbps, loss_rate)")]
pub struct UnknownMetric(pub String);

impl FromStr for Metric {
    type Err = UnknownMetric;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| UnknownMetric(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!("rtt".parse::<Metric>().is_err());
    }

    #[test]
    fn validity_ranges() {
        assert!(Metric::DownloadMbps.accepts(0.5));
        assert!(!Metric::DownloadMbps.accepts(0.0));
        assert!(!Metric::MinRttMs.accepts(f64::INFINITY));
        assert!(Metric::LossRate.accepts(0.0));
        assert!(Metric::LossRate.accepts(1.0));
        assert!(!Metric::LossRate.accepts(1.5));
    }
}

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::metric::Metric;

/// One test result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub timestamp: DateTime<Utc>,
    pub metro: String,
    pub server_id: String,
    pub server_asn: u32,
    pub client_asn: u32,
    pub metrics: BTreeMap<Metric, f64>,
}

impl MeasurementRecord {
    pub fn metric(&self, metric: Metric) -> Option<f64> {
        self.metrics.get(&metric).copied()
    }

    /// Checks the record-level invariants, returning the offending field name.
    pub fn check(&self) -> Result<(), &'static str> {
        if self.metro.is_empty() {
            return Err("metro");
        }
        if !self.server_id.starts_with(&self.metro) {
            return Err("server_id");
        }
        if self.server_asn == 0 {
            return Err("server_asn");
        }
        if self.client_asn == 0 {
            return Err("client_asn");
        }
        for (metric, value) in &self.metrics {
            if !metric.accepts(*value) {
                return Err(metric.name());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> MeasurementRecord {
        MeasurementRecord {
            timestamp: "2025-11-24T03:00:00Z".parse().unwrap(),
            metro: "gru".into(),
            server_id: "gru02".into(),
            server_asn: 1234,
            client_asn: 28573,
            metrics: BTreeMap::from([(Metric::DownloadMbps, 87.5)]),
        }
    }

    #[test]
    fn invariants() {
        assert!(record().check().is_ok());
        let mut r = record();
        r.server_id = "lhr01".into();
        assert_eq!(r.check(), Err("server_id"));
        let mut r = record();
        r.metrics.insert(Metric::MinRttMs, 0.0);
        assert_eq!(r.check(), Err("min_rtt_ms"));
    }
}

//! Effective run configuration: built-in defaults, then the `--config`
//! file, then command-line flags.

use std::collections::BTreeMap;
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisConfig;
use crate::histogram::{BinningScheme, SchemeSet};
use crate::ingest::{Bounds, Format, IngestError, IngestFilter};
use crate::metric::Metric;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub from: Option<DateTime<Utc>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub to: Option<DateTime<Utc>>,
    pub metros: Vec<String>,
    pub bounds: BTreeMap<Metric, Bounds>,
}

impl FilterConfig {
    pub fn to_filter(&self) -> Result<IngestFilter, IngestError> {
        let mut f = IngestFilter::new().with_window(self.from, self.to)?.with_metros(self.metros.iter().cloned());
        for (m, b) in &self.bounds {
            f = f.with_bounds(*m, *b);
        }
        Ok(f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BinningConfig {
    pub bins_per_decade: u32,
    pub reference: f64,
    pub underflow_below: f64,
    pub overflow_above: f64,
    pub loss_rate_underflow_below: f64,
}

impl Default for BinningConfig {
    fn default() -> Self {
        BinningConfig {
            bins_per_decade: 30,
            reference: 1.0,
            underflow_below: 0.01,
            overflow_above: 1e5,
            loss_rate_underflow_below: 1e-4,
        }
    }
}

impl BinningConfig {
    pub const MIN_BINS_PER_DECADE: u32 = 5;

    pub fn schemes(&self) -> Result<SchemeSet<f64>, String> {
        let base = BinningScheme::new(self.bins_per_decade, self.reference, self.underflow_below, self.overflow_above)
            .map_err(|e| e.to_string())?;
        let loss = BinningScheme::new(self.bins_per_decade, self.reference, self.loss_rate_underflow_below, self.overflow_above)
            .map_err(|e| format!("loss_rate: {e}"))?;
        Ok(SchemeSet::uniform(base).with(Metric::LossRate, loss))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// ISP display names keyed by ASN (as a string, since TOML keys are strings).
    pub asn_names: BTreeMap<String, String>,
}

impl ReportConfig {
    pub fn names(&self) -> Result<BTreeMap<u32, String>, String> {
        self.asn_names
            .iter()
            .map(|(k, v)| k.parse::<u32>().map(|asn| (asn, v.clone())).map_err(|_| format!("report.asn_names: `{k}` is not an ASN")))
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub filter: FilterConfig,
    pub binning: BinningConfig,
    pub analysis: AnalysisConfig,
    pub report: ReportConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<RunConfig, String> {
        toml::from_str(text).map_err(|e: toml::de::Error| e.to_string())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Format for one input path: explicit setting, else by extension.
    pub fn format_for(&self, path: &std::path::Path) -> Format {
        self.format.unwrap_or_else(|| Format::from_path(path))
    }

    /// Every inconsistency, one message each.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut problems = Vec::new();
        if self.binning.bins_per_decade < BinningConfig::MIN_BINS_PER_DECADE {
            problems.push(format!(
                "binning.bins_per_decade must be at least {}",
                BinningConfig::MIN_BINS_PER_DECADE
            ));
        }
        if let Err(e) = self.binning.schemes() {
            problems.push(format!("binning: {e}"));
        }
        if let (Some(a), Some(b)) = (self.filter.from, self.filter.to) {
            if a >= b {
                problems.push("filter.from must be before filter.to".to_string());
            }
        }
        if let Err(e) = self.analysis.validate() {
            problems.push(format!("analysis: {e}"));
        }
        if let Err(e) = self.report.names() {
            problems.push(e);
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }

    /// Configuration as echoed into report metadata. The output location is
    /// left out so trees written to different directories compare equal.
    pub fn echo(&self) -> serde_json::Value {
        let mut c = self.clone();
        c.out = None;
        serde_json::to_value(&c).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::PainMode;

    #[test]
    fn toml_round_trip_with_defaults() {
        let mut c = RunConfig::default();
        c.analysis.pain_modes.insert(Metric::MinRttMs, PainMode::Spread);
        c.filter.bounds.insert(Metric::DownloadMbps, Bounds { min: Some(0.1), max: None });
        c.report.asn_names.insert("28573".into(), "Claro".into());
        let text = c.to_toml_string();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), c);
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_file_keeps_other_defaults() {
        let c = RunConfig::from_toml_str("[analysis]\ntop_n_isps = 3\n").unwrap();
        assert_eq!(c.analysis.top_n_isps, 3);
        assert_eq!(c.analysis.min_samples_per_cell, 100);
        assert_eq!(c.binning.bins_per_decade, 30);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = RunConfig::from_toml_str("[analysis]\ntop_isps = 3\n").unwrap_err();
        assert!(err.contains("top_isps"), "{err}");
    }

    #[test]
    fn validation_collects_problems() {
        let mut c = RunConfig::default();
        c.binning.bins_per_decade = 4;
        c.analysis.top_n_isps = 0;
        c.report.asn_names.insert("claro".into(), "x".into());
        let p = c.validate().unwrap_err();
        assert_eq!(p.len(), 3, "{p:?}");
    }
}

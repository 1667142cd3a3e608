use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::{top_isps, AnalysisConfig, CalibrationStatus, SkippedCell};
use crate::histogram::CellKey;
use crate::ingest::IngestStats;
use crate::metric::Metric;
use crate::stats::cdf;
use crate::{Analysis, MetroSummary, PairResult, SparseHistogram};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    /// SHA-256 of the input bytes, in read order.
    pub input_digest: String,
    pub inputs: Vec<String>,
    /// Earliest and latest accepted record timestamps.
    pub data_start: Option<String>,
    pub data_end: Option<String>,
    pub ingest: IngestStats,
    /// Effective configuration, defaults included.
    pub config: serde_json::Value,
}

impl RunMetadata {
    pub fn new(config: serde_json::Value) -> Self {
        RunMetadata {
            schema_version: SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME").to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            input_digest: String::new(),
            inputs: Vec::new(),
            data_start: None,
            data_end: None,
            ingest: IngestStats::default(),
            config,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub bin: String,
    /// Bin geometric center; plotted on a log axis.
    pub x: f64,
    pub density: f64,
    pub cumulative: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub server_id: String,
    pub label: String,
    pub samples: u64,
    pub points: Vec<PlotPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotFootnote {
    pub server_id: String,
    pub samples: u64,
}

/// Per-server distributions of one ISP and metric in one metro.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub metro: String,
    pub client_asn: u32,
    pub metric: Metric,
    pub x_axis: String,
    pub series: Vec<PlotSeries>,
    /// Servers omitted for falling under the sample gate.
    pub below_gate: Vec<PlotFootnote>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub metro: String,
    pub server_id: String,
    pub status: CalibrationStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub metadata: RunMetadata,
    pub summaries: Vec<MetroSummary>,
    pub pairs: Vec<PairResult>,
    pub skipped: Vec<SkippedCell>,
    pub calibration: Vec<CalibrationRow>,
    pub plots: Vec<PlotData>,
}

/// Series label: server, ASN, optional ISP name and sample size.
pub fn series_label(server_id: &str, client_asn: u32, name: Option<&str>, samples: u64) -> String {
    match name {
        Some(n) => format!("{server_id}: AS{client_asn} {n} (n={samples})"),
        None => format!("{server_id}: AS{client_asn} (n={samples})"),
    }
}

fn plot_for(
    hist: &SparseHistogram,
    config: &AnalysisConfig,
    asn_names: &BTreeMap<u32, String>,
    metro: &str,
    client_asn: u32,
    metric: Metric,
) -> PlotData {
    let mut plot = PlotData {
        metro: metro.to_string(),
        client_asn,
        metric,
        x_axis: "log10".to_string(),
        series: Vec::new(),
        below_gate: Vec::new(),
        note: None,
    };
    let scheme = hist.schemes().get(metric);
    for server in hist.servers(metro) {
        let key = CellKey::new(metro, server, client_asn, metric);
        let n = hist.cell_total(&key);
        let dist = match hist.distribution(&key) {
            Some(d) if n >= config.min_samples_per_cell => d,
            _ => {
                plot.below_gate.push(PlotFootnote { server_id: server.to_string(), samples: n });
                continue;
            }
        };
        let steps = cdf(&dist);
        let points = dist
            .density()
            .into_iter()
            .zip(steps)
            .map(|((bin, density), (_, cumulative))| PlotPoint {
                bin: bin.to_string(),
                x: scheme.center(bin),
                density,
                cumulative,
            })
            .collect();
        plot.series.push(PlotSeries {
            server_id: server.to_string(),
            label: series_label(server, client_asn, asn_names.get(&client_asn).map(String::as_str), n),
            samples: n,
            points,
        });
    }
    plot
}

impl ReportBundle {
    /// Assembles a bundle. Plot data is produced for every analyzed
    /// (metro, ISP, metric) with at least one eligible server.
    pub fn build(
        metadata: RunMetadata,
        hist: &SparseHistogram,
        analysis: &Analysis,
        config: &AnalysisConfig,
        asn_names: &BTreeMap<u32, String>,
    ) -> ReportBundle {
        let mut plots = Vec::new();
        for metro in hist.metros() {
            let mut isps = top_isps(hist, metro, config.top_n_isps);
            isps.sort();
            for asn in isps {
                for &metric in &config.metrics {
                    let plot = plot_for(hist, config, asn_names, metro, asn, metric);
                    if !plot.series.is_empty() {
                        plots.push(plot);
                    }
                }
            }
        }
        ReportBundle {
            metadata,
            summaries: analysis.summaries.clone(),
            pairs: analysis.pairs.results.clone(),
            skipped: analysis.pairs.skipped.clone(),
            calibration: analysis
                .calibration
                .iter()
                .map(|((metro, server), status)| CalibrationRow {
                    metro: metro.clone(),
                    server_id: server.clone(),
                    status: *status,
                })
                .collect(),
            plots,
        }
    }

    pub fn metrics(&self) -> Vec<Metric> {
        let mut out: Vec<Metric> = self.summaries.iter().flat_map(|s| s.metrics.iter().map(|m| m.metric)).collect();
        out.sort();
        out.dedup();
        out
    }
}

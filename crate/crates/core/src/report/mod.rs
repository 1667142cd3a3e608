//! Report serialization.
//!
//! A report tree written by [`write_tree`] looks like:
//!
//! ```text
//! <out>/summary.json                      canonical machine-readable report
//! <out>/summary.csv                       one row per (metro, metric)
//! <out>/pairs.csv                         every pair result
//! <out>/skipped.csv                       cells below the sample gate
//! <out>/calibration.csv                   per-server calibration status
//! <out>/bars_<metric>_<mode>.svg          worst case per metro, mode = ks | spread
//! <out>/metro/<metro>/<asn>/<metric>.json per-server plot series
//! <out>/metro/<metro>/<asn>/<metric>.svg  rendered density overlay
//! ```

mod bundle;
mod svg;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use bundle::{
    series_label, CalibrationRow, PlotData, PlotFootnote, PlotPoint, PlotSeries, ReportBundle, RunMetadata,
    SCHEMA_VERSION,
};
pub use svg::{bars, render_bars, render_plot, Bar};

use crate::analysis::SkippedCell;
use crate::metric::Metric;
use crate::stats::PainMode;
use crate::{MetroSummary, PairResult};

#[derive(Debug, thiserror::Error)]
#[error("cannot write {}: {error}", path.display())]
pub struct ReportError {
    pub path: PathBuf,
    #[source]
    pub error: std::io::Error,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SummaryFormat {
    Json,
    Delimited,
}

#[derive(Serialize)]
struct SummaryDocument<'a> {
    schema_version: u32,
    metadata: &'a RunMetadata,
    summaries: &'a [MetroSummary],
    pairs: &'a [PairResult],
    skipped: &'a [SkippedCell],
    calibration: &'a [CalibrationRow],
    plots: Vec<String>,
}

fn csv_text<F>(header: &[&str], fill: F) -> String
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    fill(&mut w).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// Relative path of a plot document without extension.
pub fn plot_stem(metro: &str, client_asn: u32, metric: Metric) -> String {
    format!("metro/{metro}/{client_asn}/{metric}")
}

pub fn bars_file_name(metric: Metric, mode: PainMode) -> String {
    format!("bars_{metric}_{mode}.svg")
}

/// Summary document. JSON holds the full bundle minus plot series (listed by
/// path); delimited holds one row per (metro, metric).
pub fn emit_summary(bundle: &ReportBundle, format: SummaryFormat) -> String {
    match format {
        SummaryFormat::Json => {
            let doc = SummaryDocument {
                schema_version: SCHEMA_VERSION,
                metadata: &bundle.metadata,
                summaries: &bundle.summaries,
                pairs: &bundle.pairs,
                skipped: &bundle.skipped,
                calibration: &bundle.calibration,
                plots: bundle.plots.iter().map(|p| format!("{}.json", plot_stem(&p.metro, p.client_asn, p.metric))).collect(),
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
            s.push('\n');
            s
        }
        SummaryFormat::Delimited => csv_text(
            &[
                "metro", "metric", "pain_mode", "servers", "eligible_isps", "pairs", "flagged_pairs",
                "worst_pain", "worst_client_asn", "worst_server_a", "worst_server_b", "worst_ks_distance",
                "worst_spread", "worst_n_a", "worst_n_b",
            ],
            |w| {
                for s in &bundle.summaries {
                    for m in &s.metrics {
                        let r = &m.worst;
                        w.write_record([
                            s.metro.clone(),
                            m.metric.to_string(),
                            m.pain_mode.to_string(),
                            s.servers.to_string(),
                            m.eligible_isps.to_string(),
                            m.pairs.to_string(),
                            m.flagged_pairs.to_string(),
                            r.pain.to_string(),
                            r.client_asn.to_string(),
                            r.server_a.clone(),
                            r.server_b.clone(),
                            r.stat.ks_distance.to_string(),
                            r.stat.spread.to_string(),
                            r.stat.n_a.to_string(),
                            r.stat.n_b.to_string(),
                        ])?;
                    }
                }
                Ok(())
            },
        ),
    }
}

pub const PAIR_COLUMNS: [&str; 17] = [
    "metro", "client_asn", "server_a", "server_b", "metric", "n_a", "n_b", "ks_distance", "spread",
    "spread_folded", "pain_ks", "pain_mode", "pain", "flagged", "interpretation", "truncated_a", "truncated_b",
];

pub fn emit_pairs_csv(pairs: &[PairResult]) -> String {
    csv_text(&PAIR_COLUMNS, |w| {
        for r in pairs {
            w.write_record([
                r.metro.clone(),
                r.client_asn.to_string(),
                r.server_a.clone(),
                r.server_b.clone(),
                r.metric.to_string(),
                r.stat.n_a.to_string(),
                r.stat.n_b.to_string(),
                r.stat.ks_distance.to_string(),
                r.stat.spread.to_string(),
                r.stat.spread_folded.to_string(),
                r.stat.pain_ks.to_string(),
                r.pain_mode.to_string(),
                r.pain.to_string(),
                r.flagged.to_string(),
                r.interpretation().to_string(),
                r.stat.truncated_a.to_string(),
                r.stat.truncated_b.to_string(),
            ])?;
        }
        Ok(())
    })
}

pub fn emit_skipped_csv(skipped: &[SkippedCell]) -> String {
    csv_text(&["metro", "client_asn", "server_id", "metric", "samples"], |w| {
        for s in skipped {
            w.write_record([
                s.metro.clone(),
                s.client_asn.to_string(),
                s.server_id.clone(),
                s.metric.to_string(),
                s.samples.to_string(),
            ])?;
        }
        Ok(())
    })
}

pub fn emit_calibration_csv(rows: &[CalibrationRow]) -> String {
    csv_text(&["metro", "server_id", "status"], |w| {
        for r in rows {
            w.write_record([r.metro.as_str(), r.server_id.as_str(), r.status.name()])?;
        }
        Ok(())
    })
}

/// Plot series for one (metro, ISP, metric). Unknown keys give an empty
/// document carrying an explanatory note.
pub fn emit_plot_data(bundle: &ReportBundle, metro: &str, client_asn: u32, metric: Metric) -> PlotData {
    bundle
        .plots
        .iter()
        .find(|p| p.metro == metro && p.client_asn == client_asn && p.metric == metric)
        .cloned()
        .unwrap_or_else(|| PlotData {
            metro: metro.to_string(),
            client_asn,
            metric,
            x_axis: "log10".to_string(),
            series: Vec::new(),
            below_gate: Vec::new(),
            note: Some(format!(
                "no eligible cells for AS{client_asn} {metric} in metro {metro}"
            )),
        })
}

pub fn plot_json(plot: &PlotData) -> String {
    let mut s = serde_json::to_string_pretty(plot).expect("plot serializes");
    s.push('\n');
    s
}

fn write_file(path: &Path, contents: &str) -> Result<(), ReportError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|error| ReportError { path: parent.to_path_buf(), error })?;
    }
    fs::write(path, contents).map_err(|error| ReportError { path: path.to_path_buf(), error })
}

/// Writes plot JSON and SVG for one plot under `dir`.
pub fn write_plot(dir: &Path, plot: &PlotData) -> Result<(), ReportError> {
    let stem = dir.join(plot_stem(&plot.metro, plot.client_asn, plot.metric));
    write_file(&stem.with_extension("json"), &plot_json(plot))?;
    write_file(&stem.with_extension("svg"), &render_plot(plot))
}

/// Writes the full report tree. Bar charts are written for each of
/// `metrics` in both pain modes.
pub fn write_tree(bundle: &ReportBundle, dir: &Path, metrics: &[Metric]) -> Result<(), ReportError> {
    write_file(&dir.join("summary.json"), &emit_summary(bundle, SummaryFormat::Json))?;
    write_file(&dir.join("summary.csv"), &emit_summary(bundle, SummaryFormat::Delimited))?;
    write_file(&dir.join("pairs.csv"), &emit_pairs_csv(&bundle.pairs))?;
    write_file(&dir.join("skipped.csv"), &emit_skipped_csv(&bundle.skipped))?;
    write_file(&dir.join("calibration.csv"), &emit_calibration_csv(&bundle.calibration))?;
    for &metric in metrics {
        for mode in PainMode::ALL {
            write_file(&dir.join(bars_file_name(metric, mode)), &render_bars(&bundle.summaries, metric, mode))?;
        }
    }
    for plot in &bundle.plots {
        write_plot(dir, plot)?;
    }
    Ok(())
}

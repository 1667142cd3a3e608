//! Pair enumeration, eligibility gates, per-metro worst cases and server
//! calibration.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::histogram::{CellKey, SparseHistogram};
use crate::metric::Metric;
use crate::scalar::Scalar;
use crate::stats::{pain_score, DifferenceStat, PainMode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub top_n_isps: usize,
    pub min_samples_per_cell: u64,
    pub metrics: Vec<Metric>,
    pub calibration_ks_threshold: f64,
    /// Pain flavor per metric; metrics not listed use KS.
    pub pain_modes: BTreeMap<Metric, PainMode>,
    /// A pair is flagged when its KS-mode pain reaches this value.
    pub flag_pain_ks: f64,
    /// A pair is flagged when its spread-mode pain reaches this value.
    pub flag_pain_spread: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            top_n_isps: 5,
            min_samples_per_cell: 100,
            metrics: vec![Metric::DownloadMbps, Metric::MinRttMs],
            calibration_ks_threshold: 0.05,
            pain_modes: BTreeMap::new(),
            flag_pain_ks: 1.0,
            flag_pain_spread: 1.1,
        }
    }
}

impl AnalysisConfig {
    pub fn pain_mode(&self, metric: Metric) -> PainMode {
        self.pain_modes.get(&metric).copied().unwrap_or(PainMode::Ks)
    }

    pub fn flag_threshold(&self, mode: PainMode) -> f64 {
        match mode {
            PainMode::Ks => self.flag_pain_ks,
            PainMode::Spread => self.flag_pain_spread,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let mut problems = Vec::new();
        if self.top_n_isps == 0 {
            problems.push("top_n_isps must be at least 1".to_string());
        }
        if self.min_samples_per_cell == 0 {
            problems.push("min_samples_per_cell must be at least 1".to_string());
        }
        if self.metrics.is_empty() {
            problems.push("metrics must not be empty".to_string());
        }
        if !(self.calibration_ks_threshold > 0.0 && self.calibration_ks_threshold < 1.0) {
            problems.push("calibration_ks_threshold must lie in (0, 1)".to_string());
        }
        if self.flag_pain_ks.is_nan() || self.flag_pain_ks < 0.0 || self.flag_pain_spread.is_nan() || self.flag_pain_spread < 1.0 {
            problems.push("flag thresholds must be >= 0 (ks) and >= 1 (spread)".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems.join("; "))
        }
    }
}

/// Reading of a flagged pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpretation {
    None,
    /// Throughput differs between servers: a mid-path bottleneck or traffic
    /// management on one of the wide-area paths.
    MidPathBottleneck,
    /// minRTT differs: a longer route, e.g. hairpinning through a distant
    /// interconnection.
    SuboptimalRouting,
    MidPathLoss,
}

impl Interpretation {
    pub fn name(self) -> &'static str {
        match self {
            Interpretation::None => "none",
            Interpretation::MidPathBottleneck => "mid_path_bottleneck",
            Interpretation::SuboptimalRouting => "suboptimal_routing",
            Interpretation::MidPathLoss => "mid_path_loss",
        }
    }
}

impl fmt::Display for Interpretation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairResult<T> {
    pub metro: String,
    pub client_asn: u32,
    /// Lexicographically smaller server id.
    pub server_a: String,
    pub server_b: String,
    pub metric: Metric,
    pub stat: DifferenceStat<T>,
    pub pain_mode: PainMode,
    pub pain: T,
    pub flagged: bool,
}

impl<T: Scalar> PairResult<T> {
    fn sort_key(&self) -> (&str, Metric, u32, &str, &str) {
        (&self.metro, self.metric, self.client_asn, &self.server_a, &self.server_b)
    }

    pub fn involves(&self, server: &str) -> bool {
        self.server_a == server || self.server_b == server
    }

    pub fn interpretation(&self) -> Interpretation {
        if !self.flagged {
            return Interpretation::None;
        }
        match self.metric {
            Metric::DownloadMbps | Metric::UploadMbps => Interpretation::MidPathBottleneck,
            Metric::MinRttMs => Interpretation::SuboptimalRouting,
            Metric::LossRate => Interpretation::MidPathLoss,
        }
    }
}

/// A cell excluded by the sample gate.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SkippedCell {
    pub metro: String,
    pub client_asn: u32,
    pub server_id: String,
    pub metric: Metric,
    pub samples: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pairwise<T> {
    pub results: Vec<PairResult<T>>,
    pub skipped: Vec<SkippedCell>,
}

/// Largest ISPs of a metro by total test count over all servers and
/// metrics; ties go to the smaller ASN.
pub fn top_isps<T: Scalar>(hist: &SparseHistogram<T>, metro: &str, n: usize) -> Vec<u32> {
    let mut ranked: Vec<(u32, u64)> = hist.isp_totals(metro).into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.into_iter().take(n).map(|(asn, _)| asn).collect()
}

/// One result per (metro, top ISP, metric, server pair) with both cells at
/// or above the sample gate.
pub fn pairwise_diffs<T: Scalar>(hist: &SparseHistogram<T>, config: &AnalysisConfig) -> Pairwise<T> {
    let mut out = Pairwise { results: Vec::new(), skipped: Vec::new() };
    for metro in hist.metros() {
        let servers = hist.servers(metro);
        for asn in top_isps(hist, metro, config.top_n_isps) {
            for &metric in &config.metrics {
                let mut eligible = Vec::new();
                for &server in &servers {
                    let key = CellKey::new(metro, server, asn, metric);
                    let n = hist.cell_total(&key);
                    match hist.distribution(&key) {
                        Some(d) if n >= config.min_samples_per_cell => eligible.push((server, d)),
                        _ => out.skipped.push(SkippedCell {
                            metro: metro.to_string(),
                            client_asn: asn,
                            server_id: server.to_string(),
                            metric,
                            samples: n,
                        }),
                    }
                }
                let mode = config.pain_mode(metric);
                let flag_at = T::of(config.flag_threshold(mode));
                for (i, (server_a, da)) in eligible.iter().enumerate() {
                    for (server_b, db) in &eligible[i + 1..] {
                        let stat = DifferenceStat::between(da, db)
                            .expect("cells of one metric share a scheme and are non-empty");
                        let pain = pain_score(&stat, mode);
                        out.results.push(PairResult {
                            metro: metro.to_string(),
                            client_asn: asn,
                            server_a: server_a.to_string(),
                            server_b: server_b.to_string(),
                            metric,
                            stat,
                            pain_mode: mode,
                            pain,
                            flagged: pain >= flag_at,
                        });
                    }
                }
            }
        }
    }
    out.results.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    out.skipped.sort();
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CalibrationStatus {
    Calibrated,
    Suspect,
    InsufficientData,
}

impl CalibrationStatus {
    pub fn name(self) -> &'static str {
        match self {
            CalibrationStatus::Calibrated => "CALIBRATED",
            CalibrationStatus::Suspect => "SUSPECT",
            CalibrationStatus::InsufficientData => "INSUFFICIENT_DATA",
        }
    }
}

/// Calibration status keyed by (metro, server).
pub type CalibrationFlags = BTreeMap<(String, String), CalibrationStatus>;

/// A server is calibrated when at least one of its download pairs, for any
/// ISP, has KS at or below the threshold. Every server appearing in
/// `results` gets a status.
pub fn calibration_check<T: Scalar>(results: &[PairResult<T>], config: &AnalysisConfig) -> CalibrationFlags {
    let threshold = T::of(config.calibration_ks_threshold);
    let mut flags = CalibrationFlags::new();
    for r in results {
        for server in [&r.server_a, &r.server_b] {
            let key = (r.metro.clone(), server.clone());
            let current = flags.entry(key).or_insert(CalibrationStatus::InsufficientData);
            if r.metric != Metric::DownloadMbps {
                continue;
            }
            if r.stat.ks_distance <= threshold {
                *current = CalibrationStatus::Calibrated;
            } else if *current == CalibrationStatus::InsufficientData {
                *current = CalibrationStatus::Suspect;
            }
        }
    }
    flags
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary<T> {
    pub metric: Metric,
    pub pain_mode: PainMode,
    pub eligible_isps: usize,
    pub pairs: usize,
    pub flagged_pairs: usize,
    /// Worst pair under the configured pain mode.
    pub worst: PairResult<T>,
    pub worst_ks: PairResult<T>,
    pub worst_spread: PairResult<T>,
}

impl<T: Scalar> MetricSummary<T> {
    pub fn worst_for(&self, mode: PainMode) -> &PairResult<T> {
        match mode {
            PainMode::Ks => &self.worst_ks,
            PainMode::Spread => &self.worst_spread,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetroSummary<T> {
    pub metro: String,
    pub servers: usize,
    pub metrics: Vec<MetricSummary<T>>,
    pub calibration: BTreeMap<String, CalibrationStatus>,
}

impl<T: Scalar> MetroSummary<T> {
    pub fn metric(&self, metric: Metric) -> Option<&MetricSummary<T>> {
        self.metrics.iter().find(|m| m.metric == metric)
    }
}

fn worst_by<'a, T: Scalar>(results: &[&'a PairResult<T>], mode: PainMode) -> &'a PairResult<T> {
    let mut best = results[0];
    for r in &results[1..] {
        let (p, q) = (pain_score(&r.stat, mode), pain_score(&best.stat, mode));
        let tie_wins = p == q
            && (r.client_asn, &r.server_a, &r.server_b) < (best.client_asn, &best.server_a, &best.server_b);
        if p > q || tie_wins {
            best = r;
        }
    }
    best
}

/// One summary per metro with at least two servers among its results.
pub fn metro_summaries<T: Scalar>(results: &[PairResult<T>], config: &AnalysisConfig) -> Vec<MetroSummary<T>> {
    let mut by_metro: BTreeMap<&str, Vec<&PairResult<T>>> = BTreeMap::new();
    for r in results {
        by_metro.entry(&r.metro).or_default().push(r);
    }
    let calibration = calibration_check(results, config);
    let mut out = Vec::new();
    for (metro, rs) in by_metro {
        let servers: BTreeSet<&str> = rs.iter().flat_map(|r| [r.server_a.as_str(), r.server_b.as_str()]).collect();
        if servers.len() < 2 {
            continue;
        }
        let mut metrics = Vec::new();
        for &metric in &config.metrics {
            let of_metric: Vec<&PairResult<T>> = rs.iter().copied().filter(|r| r.metric == metric).collect();
            if of_metric.is_empty() {
                continue;
            }
            let mode = config.pain_mode(metric);
            let isps: BTreeSet<u32> = of_metric.iter().map(|r| r.client_asn).collect();
            metrics.push(MetricSummary {
                metric,
                pain_mode: mode,
                eligible_isps: isps.len(),
                pairs: of_metric.len(),
                flagged_pairs: of_metric.iter().filter(|r| r.flagged).count(),
                worst: worst_by(&of_metric, mode).clone(),
                worst_ks: worst_by(&of_metric, PainMode::Ks).clone(),
                worst_spread: worst_by(&of_metric, PainMode::Spread).clone(),
            });
        }
        let calibration = calibration
            .iter()
            .filter(|((m, _), _)| m == metro)
            .map(|((_, s), status)| (s.clone(), *status))
            .collect();
        out.push(MetroSummary { metro: metro.to_string(), servers: servers.len(), metrics, calibration });
    }
    out
}

/// Full analysis of one histogram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Analysis<T> {
    pub pairs: Pairwise<T>,
    pub summaries: Vec<MetroSummary<T>>,
    /// Every server in the histogram, including those without eligible pairs.
    pub calibration: CalibrationFlags,
}

pub fn analyze<T: Scalar>(hist: &SparseHistogram<T>, config: &AnalysisConfig) -> Analysis<T> {
    let pairs = pairwise_diffs(hist, config);
    let summaries = metro_summaries(&pairs.results, config);
    let mut calibration = calibration_check(&pairs.results, config);
    for metro in hist.metros() {
        for server in hist.servers(metro) {
            calibration
                .entry((metro.to_string(), server.to_string()))
                .or_insert(CalibrationStatus::InsufficientData);
        }
    }
    Analysis { pairs, summaries, calibration }
}

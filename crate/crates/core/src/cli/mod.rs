//! Command-line front end.
//!
//! Exit status is 0 on success, 1 when a run fails (I/O, incompatible
//! snapshots, unwritable output) and 2 for usage errors (bad flags, bad
//! configuration or scenario files, refusing to overwrite unrelated data).

mod config;

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

pub use config::{BinningConfig, FilterConfig, ReportConfig, RunConfig};

use crate::analysis::analyze;
use crate::histogram::{snapshot, CellKey};
use crate::ingest::{ingest_with, open_source, write_records, Format, IngestStats};
use crate::metric::Metric;
use crate::report::{emit_plot_data, write_plot, write_tree, ReportBundle, RunMetadata};
use crate::simulator::{run_scenarios, Scenario};
use crate::stats::{DifferenceStat, PainMode};
use crate::SparseHistogram;

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "midpath", version, about = "Find mid-path bottlenecks by comparing servers within a metro")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ingest measurements, compare servers and write a report tree.
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
        /// Output directory for the report tree.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate synthetic measurements from scenario files.
    Simulate {
        /// Scenario file (TOML); repeat for several metros.
        #[arg(long = "scenario", required = true)]
        scenarios: Vec<PathBuf>,
        /// Overrides the seed; scenario i gets seed + i.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for the records and ground truth.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        format: Option<Format>,
    },
    /// Ingest measurements and save the histogram.
    Snapshot {
        #[command(flatten)]
        common: CommonArgs,
        /// Snapshot file to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the same cells across two snapshots.
    DiffSnapshots {
        a: PathBuf,
        b: PathBuf,
        /// Cells with fewer samples on either side are not compared.
        #[arg(long)]
        min_samples: Option<u64>,
        /// Write the comparison here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write distribution plots for one metro.
    Plot {
        #[command(flatten)]
        common: CommonArgs,
        /// Restrict to one ISP.
        #[arg(long)]
        asn: Option<u32>,
        /// Restrict to one metric.
        #[arg(long)]
        metric: Option<Metric>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    show_config: bool,
    /// Measurement file; repeatable, `-` reads standard input.
    #[arg(long = "input", short = 'i')]
    input: Vec<PathBuf>,
    /// Read a saved histogram instead of measurement files.
    #[arg(long, conflicts_with = "input")]
    snapshot: Option<PathBuf>,
    #[arg(long)]
    format: Option<Format>,
    /// Window start (inclusive, RFC 3339).
    #[arg(long)]
    from: Option<DateTime<Utc>>,
    /// Window end (exclusive, RFC 3339).
    #[arg(long)]
    to: Option<DateTime<Utc>>,
    /// Keep only this metro; repeatable.
    #[arg(long = "metro")]
    metro: Vec<String>,
    #[arg(long)]
    bins_per_decade: Option<u32>,
    #[arg(long)]
    top_isps: Option<usize>,
    #[arg(long)]
    min_samples: Option<u64>,
    /// `ks`, `spread`, or `<metric>=<mode>`; repeatable.
    #[arg(long = "pain-mode")]
    pain_mode: Vec<String>,
    /// Metrics to analyze, comma separated.
    #[arg(long, value_delimiter = ',')]
    metrics: Vec<Metric>,
}

impl CommonArgs {
    fn resolve(&self) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
                RunConfig::from_toml_str(&text)
                    .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        if !self.input.is_empty() {
            cfg.input = self.input.clone();
        }
        if self.snapshot.is_some() {
            cfg.snapshot = self.snapshot.clone();
            cfg.input.clear();
        }
        if self.format.is_some() {
            cfg.format = self.format;
        }
        if self.from.is_some() {
            cfg.filter.from = self.from;
        }
        if self.to.is_some() {
            cfg.filter.to = self.to;
        }
        if !self.metro.is_empty() {
            cfg.filter.metros = self.metro.clone();
        }
        if let Some(b) = self.bins_per_decade {
            cfg.binning.bins_per_decade = b;
        }
        if let Some(n) = self.top_isps {
            cfg.analysis.top_n_isps = n;
        }
        if let Some(n) = self.min_samples {
            cfg.analysis.min_samples_per_cell = n;
        }
        if !self.metrics.is_empty() {
            cfg.analysis.metrics = self.metrics.clone();
        }
        for spec in &self.pain_mode {
            match spec.split_once('=') {
                Some((metric, mode)) => {
                    let metric: Metric = metric.parse().map_err(|e| CliError::Usage(format!("--pain-mode: {e}")))?;
                    let mode: PainMode = mode.parse().map_err(|e| CliError::Usage(format!("--pain-mode: {e}")))?;
                    cfg.analysis.pain_modes.insert(metric, mode);
                }
                None => {
                    let mode: PainMode = spec.parse().map_err(|e| CliError::Usage(format!("--pain-mode: {e}")))?;
                    for m in Metric::ALL {
                        cfg.analysis.pain_modes.insert(m, mode);
                    }
                }
            }
        }
        cfg.validate().map_err(|p| CliError::Usage(format!("invalid configuration: {}", p.join("; "))))?;
        Ok(cfg)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(rendered.as_bytes()) } else { stderr.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let (kind, msg) = match &e {
                CliError::Usage(m) => ("usage error", m),
                CliError::Runtime(m) => ("error", m),
            };
            let _ = writeln!(stderr, "midpath: {kind}: {msg}");
            e.code()
        }
    }
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> CliResult<()> {
    match command {
        Command::Analyze { common, out } => {
            let mut cfg = common.resolve()?;
            if out.is_some() {
                cfg.out = out;
            }
            if common.show_config {
                return show_config(&cfg, stdout);
            }
            cmd_analyze(&cfg, stdout)
        }
        Command::Snapshot { common, out } => {
            let mut cfg = common.resolve()?;
            if out.is_some() {
                cfg.out = out;
            }
            if common.show_config {
                return show_config(&cfg, stdout);
            }
            cmd_snapshot(&cfg, stdout)
        }
        Command::Plot { common, asn, metric, out } => {
            let mut cfg = common.resolve()?;
            cfg.out = Some(out);
            if common.show_config {
                return show_config(&cfg, stdout);
            }
            cmd_plot(&cfg, asn, metric, stdout)
        }
        Command::Simulate { scenarios, seed, out, format } => cmd_simulate(&scenarios, seed, &out, format, stdout),
        Command::DiffSnapshots { a, b, min_samples, out } => {
            let gate = min_samples.unwrap_or(crate::analysis::AnalysisConfig::default().min_samples_per_cell);
            cmd_diff(&a, &b, gate, out.as_deref(), stdout)
        }
    }
}

fn show_config(cfg: &RunConfig, stdout: &mut dyn Write) -> CliResult<()> {
    stdout.write_all(cfg.to_toml_string().as_bytes()).map_err(runtime)
}

/// Hashes every byte read through it.
struct DigestReader<'a, R> {
    inner: R,
    hasher: &'a mut Sha256,
}

impl<R: Read> Read for DigestReader<'_, R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }
}

struct Loaded {
    hist: SparseHistogram,
    metadata: RunMetadata,
}

/// Builds the histogram from the configured source, reading each input once.
fn load_histogram(cfg: &RunConfig) -> CliResult<Loaded> {
    let mut metadata = RunMetadata::new(cfg.echo());
    if let Some(path) = &cfg.snapshot {
        let mut hasher = Sha256::new();
        let file = fs::File::open(path).map_err(|e| runtime(format!("cannot read {}: {e}", path.display())))?;
        let reader = io::BufReader::new(DigestReader { inner: file, hasher: &mut hasher });
        let hist = snapshot::load::<f64, _>(reader).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
        metadata.input_digest = hex::encode(hasher.finalize());
        metadata.inputs = vec![path.display().to_string()];
        return Ok(Loaded { hist, metadata });
    }
    if cfg.input.is_empty() {
        return Err(CliError::Usage("no input given (use --input or --snapshot)".to_string()));
    }
    let schemes = cfg.binning.schemes().map_err(CliError::Usage)?;
    let filter = cfg.filter.to_filter().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut hist = SparseHistogram::new(schemes);
    let mut hasher = Sha256::new();
    let mut stats = IngestStats::default();
    let mut range: Option<(DateTime<Utc>, DateTime<Utc>)> = None;
    let mut insert_error = None;
    for path in &cfg.input {
        let name = path.display().to_string();
        let format = cfg.format_for(path);
        let source: Box<dyn Read> = if path.as_os_str() == "-" {
            Box::new(io::stdin().lock())
        } else {
            Box::new(open_source(path).map_err(runtime)?)
        };
        let reader = DigestReader { inner: source, hasher: &mut hasher };
        let file_stats = ingest_with(reader, &name, format, &filter, |record| {
            range = Some(match range {
                None => (record.timestamp, record.timestamp),
                Some((a, b)) => (a.min(record.timestamp), b.max(record.timestamp)),
            });
            if let Err(e) = hist.insert(&record) {
                insert_error.get_or_insert(e);
            }
        })
        .map_err(runtime)?;
        log::info!("{name}: {} rows, {} accepted, {} rejected", file_stats.total, file_stats.accepted, file_stats.rejected_total());
        stats += &file_stats;
    }
    if let Some(e) = insert_error {
        return Err(runtime(e));
    }
    metadata.input_digest = hex::encode(hasher.finalize());
    metadata.inputs = cfg.input.iter().map(|p| p.display().to_string()).collect();
    metadata.data_start = range.map(|r| timestamp(r.0));
    metadata.data_end = range.map(|r| timestamp(r.1));
    metadata.ingest = stats;
    Ok(Loaded { hist, metadata })
}

fn timestamp(t: DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

fn build_bundle(cfg: &RunConfig, loaded: Loaded) -> CliResult<(ReportBundle, SparseHistogram)> {
    let names = cfg.report.names().map_err(CliError::Usage)?;
    let analysis = analyze(&loaded.hist, &cfg.analysis);
    let bundle = ReportBundle::build(loaded.metadata, &loaded.hist, &analysis, &cfg.analysis, &names);
    Ok((bundle, loaded.hist))
}

fn cmd_analyze(cfg: &RunConfig, stdout: &mut dyn Write) -> CliResult<()> {
    let out = cfg.out.clone().ok_or_else(|| CliError::Usage("no output directory given (use --out)".to_string()))?;
    check_replaceable(&out)?;
    let loaded = load_histogram(cfg)?;
    let ingest = loaded.metadata.ingest.clone();
    let (bundle, _) = build_bundle(cfg, loaded)?;
    publish_dir(&out, |staging| write_tree(&bundle, staging, &cfg.analysis.metrics).map_err(runtime))?;
    let flagged: u64 = bundle.summaries.iter().flat_map(|s| s.metrics.iter()).map(|m| m.flagged_pairs as u64).sum();
    writeln!(
        stdout,
        "{} rows ({} accepted, {} filtered, {} rejected); {} metros, {} pairs, {} flagged; report in {}",
        ingest.total,
        ingest.accepted,
        ingest.filtered,
        ingest.rejected_total(),
        bundle.summaries.len(),
        bundle.pairs.len(),
        flagged,
        out.display()
    )
    .map_err(runtime)
}

/// A directory may be replaced when it does not exist, is empty, or holds a
/// previous report.
fn check_replaceable(out: &Path) -> CliResult<()> {
    match fs::read_dir(out) {
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(()),
        Err(_) if out.exists() => Err(CliError::Usage(format!("{} exists and is not a directory", out.display()))),
        Err(e) => Err(runtime(format!("{}: {e}", out.display()))),
        Ok(mut entries) => {
            if entries.next().is_none() || out.join("summary.json").is_file() {
                Ok(())
            } else {
                Err(CliError::Usage(format!(
                    "refusing to overwrite {}: it is not empty and holds no previous report",
                    out.display()
                )))
            }
        }
    }
}

/// Writes into a sibling staging directory, then swaps it into place. A
/// failed write leaves `out` untouched and removes the staging directory.
fn publish_dir<F>(out: &Path, write: F) -> CliResult<()>
where
    F: FnOnce(&Path) -> CliResult<()>,
{
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| runtime(format!("cannot create {}: {e}", parent.display())))?;
    let name = out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    let staging = parent.join(format!(".{name}.partial-{}", std::process::id()));
    let _ = fs::remove_dir_all(&staging);
    let result = fs::create_dir(&staging)
        .map_err(|e| runtime(format!("cannot create {}: {e}", staging.display())))
        .and_then(|_| write(&staging))
        .and_then(|_| {
            if out.exists() {
                fs::remove_dir_all(out).map_err(|e| runtime(format!("cannot replace {}: {e}", out.display())))?;
            }
            fs::rename(&staging, out).map_err(|e| runtime(format!("cannot move report into {}: {e}", out.display())))
        });
    if result.is_err() {
        let _ = fs::remove_dir_all(&staging);
    }
    result
}

fn cmd_snapshot(cfg: &RunConfig, stdout: &mut dyn Write) -> CliResult<()> {
    let out = cfg.out.clone().ok_or_else(|| CliError::Usage("no snapshot file given (use --out)".to_string()))?;
    let loaded = load_histogram(cfg)?;
    let mut buf = Vec::new();
    snapshot::save(&loaded.hist, &mut buf).map_err(runtime)?;
    write_file(&out, &buf)?;
    writeln!(
        stdout,
        "{} cells, {} samples; snapshot in {}",
        loaded.hist.cells().count(),
        loaded.hist.grand_total(),
        out.display()
    )
    .map_err(runtime)
}

fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| runtime(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, contents).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

fn cmd_plot(cfg: &RunConfig, asn: Option<u32>, metric: Option<Metric>, stdout: &mut dyn Write) -> CliResult<()> {
    let out = cfg.out.clone().expect("plot output is required by the parser");
    let metro = match cfg.filter.metros.as_slice() {
        [m] => m.clone(),
        _ => return Err(CliError::Usage("plot needs exactly one --metro".to_string())),
    };
    let loaded = load_histogram(cfg)?;
    let (bundle, _) = build_bundle(cfg, loaded)?;
    let metrics: Vec<Metric> = match metric {
        Some(m) => vec![m],
        None => cfg.analysis.metrics.clone(),
    };
    let plots: Vec<_> = match asn {
        Some(asn) => metrics.iter().map(|&m| emit_plot_data(&bundle, &metro, asn, m)).collect(),
        None => bundle
            .plots
            .iter()
            .filter(|p| p.metro == metro && metrics.contains(&p.metric))
            .cloned()
            .collect(),
    };
    for plot in &plots {
        write_plot(&out, plot).map_err(runtime)?;
        if let Some(note) = &plot.note {
            writeln!(stdout, "{note}").map_err(runtime)?;
        }
    }
    writeln!(stdout, "{} plots in {}", plots.len(), out.display()).map_err(runtime)
}

fn cmd_simulate(
    paths: &[PathBuf],
    seed: Option<u64>,
    out: &Path,
    format: Option<Format>,
    stdout: &mut dyn Write,
) -> CliResult<()> {
    let mut scenarios = Vec::with_capacity(paths.len());
    for (i, path) in paths.iter().enumerate() {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read scenario {}: {e}", path.display())))?;
        let mut scenario =
            Scenario::from_toml_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        if let Some(seed) = seed {
            scenario.seed = seed.wrapping_add(i as u64);
        }
        scenarios.push(scenario);
    }
    let metros: BTreeSet<&str> = scenarios.iter().map(|s| s.metro.as_str()).collect();
    if metros.len() != scenarios.len() {
        return Err(CliError::Usage("two scenario files describe the same metro".to_string()));
    }
    let sim = run_scenarios(&scenarios);
    let format = format.unwrap_or(Format::Delimited);
    let file = match format {
        Format::Delimited => "records.csv",
        Format::JsonLines => "records.jsonl",
    };
    let mut buf = Vec::new();
    write_records(&mut buf, format, sim.records()).map_err(runtime)?;
    let digest = hex::encode(Sha256::digest(&buf));
    write_file(&out.join(file), &buf)?;
    write_file(&out.join("ground_truth.json"), sim.ground_truth.to_json().as_bytes())?;
    writeln!(stdout, "{} records (sha256 {digest}) in {}", sim.samples.len(), out.join(file).display()).map_err(runtime)
}

/// Columns of the snapshot comparison table.
pub const DIFF_COLUMNS: [&str; 11] = [
    "metro",
    "server_id",
    "client_asn",
    "metric",
    "status",
    "n_a",
    "n_b",
    "ks_distance",
    "spread",
    "spread_folded",
    "pain_ks",
];

fn cmd_diff(a: &Path, b: &Path, gate: u64, out: Option<&Path>, stdout: &mut dyn Write) -> CliResult<()> {
    let load = |p: &Path| -> CliResult<SparseHistogram> {
        let file = fs::File::open(p).map_err(|e| runtime(format!("cannot read {}: {e}", p.display())))?;
        snapshot::load::<f64, _>(io::BufReader::new(file)).map_err(|e| runtime(format!("{}: {e}", p.display())))
    };
    let ha = load(a)?;
    let hb = load(b)?;
    if ha.schemes() != hb.schemes() {
        return Err(runtime("snapshots use different binning schemes and cannot be compared"));
    }
    let keys: BTreeSet<&CellKey> = ha.cells().map(|(k, _)| k).chain(hb.cells().map(|(k, _)| k)).collect();
    let mut rows: BTreeMap<&CellKey, Vec<String>> = BTreeMap::new();
    for key in keys {
        let (na, nb) = (ha.cell_total(key), hb.cell_total(key));
        let status = match (na, nb) {
            (0, _) => "only_b",
            (_, 0) => "only_a",
            _ if na < gate || nb < gate => "below_gate",
            _ => "compared",
        };
        let mut row = vec![
            key.metro.clone(),
            key.server_id.clone(),
            key.client_asn.to_string(),
            key.metric.name().to_string(),
            status.to_string(),
            na.to_string(),
            nb.to_string(),
        ];
        match (status, ha.distribution(key), hb.distribution(key)) {
            ("compared", Some(da), Some(db)) => {
                let stat = DifferenceStat::between(&da, &db).map_err(runtime)?;
                row.extend([stat.ks_distance, stat.spread, stat.spread_folded, stat.pain_ks].iter().map(|v| v.to_string()));
            }
            _ => row.extend(std::iter::repeat_n(String::new(), 4)),
        }
        rows.insert(key, row);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(DIFF_COLUMNS).map_err(runtime)?;
    for row in rows.values() {
        w.write_record(row).map_err(runtime)?;
    }
    let buf = w.into_inner().map_err(runtime)?;
    match out {
        Some(path) => write_file(path, &buf),
        None => stdout.write_all(&buf).map_err(runtime),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("midpath").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let (code, _, err) = run_args(&["analyze", "--bogus"]);
        assert_eq!(code, 2);
        assert!(err.contains("--bogus"));
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = run_args(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("analyze"));
    }

    #[test]
    fn flags_override_defaults_in_shown_config() {
        let (code, out, _) = run_args(&[
            "analyze",
            "--show-config",
            "--top-isps",
            "3",
            "--pain-mode",
            "min_rtt_ms=spread",
            "--bins-per-decade",
            "20",
        ]);
        assert_eq!(code, 0);
        let cfg = RunConfig::from_toml_str(&out).unwrap();
        assert_eq!(cfg.analysis.top_n_isps, 3);
        assert_eq!(cfg.binning.bins_per_decade, 20);
        assert_eq!(cfg.analysis.pain_mode(Metric::MinRttMs), PainMode::Spread);
        assert_eq!(cfg.analysis.pain_mode(Metric::DownloadMbps), PainMode::Ks);
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        assert_eq!(run_args(&["analyze", "--show-config", "--bins-per-decade", "2"]).0, 2);
        assert_eq!(run_args(&["analyze", "--show-config", "--pain-mode", "loud"]).0, 2);
        assert_eq!(run_args(&["analyze", "--show-config", "--top-isps", "0"]).0, 2);
        assert_eq!(run_args(&["analyze", "--out", "x"]).0, 2, "missing input");
    }

    #[test]
    fn missing_input_file_is_runtime_error() {
        let (code, _, err) = run_args(&["snapshot", "--input", "/nonexistent/x.csv", "--out", "/tmp/never"]);
        assert_eq!(code, 1, "{err}");
    }
}

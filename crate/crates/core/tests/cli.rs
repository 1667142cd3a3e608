mod common;

use std::fs;
use std::path::{Path, PathBuf};

use common::cli;
use sha2::{Digest, Sha256};

fn simulate(dir: &Path, extra: &[&str]) -> PathBuf {
    let scenario = common::fixture("golden_scenario.toml");
    let mut args = vec!["simulate".to_string(), "--scenario".into(), scenario.display().to_string()];
    args.extend(["--out".to_string(), dir.display().to_string()]);
    args.extend(extra.iter().map(|s| s.to_string()));
    let (code, out, err) = cli(&args);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("records"), "{out}");
    dir.join("records.csv")
}

fn analyze(input: &Path, out: &Path, extra: &[&str]) -> (i32, String, String) {
    let mut args = vec!["analyze".to_string(), "--input".into(), input.display().to_string()];
    args.extend(["--out".to_string(), out.display().to_string()]);
    args.extend(extra.iter().map(|s| s.to_string()));
    cli(&args)
}

#[test]
fn report_tree_layout_and_metadata() {
    let tmp = tempfile::tempdir().unwrap();
    let records = simulate(&tmp.path().join("sim"), &[]);
    let out = tmp.path().join("report");
    let (code, stdout, err) = analyze(&records, &out, &[]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("flagged"), "{stdout}");
    for f in [
        "summary.json",
        "summary.csv",
        "pairs.csv",
        "skipped.csv",
        "calibration.csv",
        "bars_download_mbps_ks.svg",
        "bars_download_mbps_spread.svg",
        "bars_min_rtt_ms_ks.svg",
        "metro/gru/28573/download_mbps.json",
        "metro/gru/28573/download_mbps.svg",
        "metro/gru/26599/min_rtt_ms.json",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let meta = &summary["metadata"];
    assert_eq!(meta["schema_version"], 1);
    let digest = hex::encode(Sha256::digest(fs::read(&records).unwrap()));
    assert_eq!(meta["input_digest"], digest.as_str());
    assert_eq!(meta["config"]["analysis"]["top_n_isps"], 5);
    let ingest = &meta["ingest"];
    assert_eq!(ingest["accepted"], ingest["total"]);

    let pairs = common::read_table(&out.join("pairs.csv"));
    let policed: Vec<_> = pairs
        .iter()
        .filter(|p| p["client_asn"] == "28573" && p["metric"] == "download_mbps" && p["server_b"] == "gru03")
        .collect();
    assert_eq!(policed.len(), 2);
    assert!(policed.iter().all(|p| p["flagged"] == "true" && p["interpretation"] == "mid_path_bottleneck"));
    let hairpin = pairs
        .iter()
        .find(|p| p["client_asn"] == "26599" && p["metric"] == "min_rtt_ms" && p["server_a"] == "gru01" && p["server_b"] == "gru02")
        .unwrap();
    assert_eq!(hairpin["interpretation"], "suboptimal_routing");
    let truth = fs::read_to_string(tmp.path().join("sim/ground_truth.json")).unwrap();
    assert!(truth.contains("per_flow_policer") && truth.contains("gru03"));
}

#[test]
fn refuses_to_overwrite_foreign_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let records = simulate(&tmp.path().join("sim"), &[]);
    let out = tmp.path().join("precious");
    fs::create_dir(&out).unwrap();
    fs::write(out.join("notes.txt"), "keep me").unwrap();
    let (code, _, err) = analyze(&records, &out, &[]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("refusing"), "{err}");
    assert_eq!(fs::read_to_string(out.join("notes.txt")).unwrap(), "keep me");

    let report = tmp.path().join("report");
    assert_eq!(analyze(&records, &report, &[]).0, 0);
    fs::write(report.join("stale.txt"), "old").unwrap();
    assert_eq!(analyze(&records, &report, &[]).0, 0, "previous report is replaceable");
    assert!(!report.join("stale.txt").exists());
}

#[test]
fn failed_write_leaves_nothing_behind() {
    let tmp = tempfile::tempdir().unwrap();
    let records = simulate(&tmp.path().join("sim"), &[]);
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let (code, _, err) = analyze(&records, &blocker.join("report"), &[]);
    assert_eq!(code, 1, "{err}");
    let (code, _, _) = analyze(&tmp.path().join("missing.csv"), &tmp.path().join("r"), &[]);
    assert_eq!(code, 1);
    assert!(!tmp.path().join("r").exists());
    let leftovers: Vec<_> = fs::read_dir(tmp.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().contains("partial"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn scenario_errors_name_the_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(common::fixture("golden_scenario.toml")).unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, text.replace("mean_tests_per_hour = 60", "mean_tests_per_hour = 60\nburstiness = 2")).unwrap();
    let (code, _, err) = cli(&["simulate", "--scenario", bad.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("burstiness"), "{err}");
}

#[test]
fn seeds_are_reproducible_and_overridable() {
    let tmp = tempfile::tempdir().unwrap();
    let read = |d: &str, extra: &[&str]| fs::read(simulate(&tmp.path().join(d), extra)).unwrap();
    let a = read("a", &["--seed", "5"]);
    let b = read("b", &["--seed", "5"]);
    let c = read("c", &["--seed", "6"]);
    assert_eq!(a, b);
    assert_ne!(a, c);
    simulate(&tmp.path().join("d"), &["--format", "json-lines"]);
    assert!(tmp.path().join("d/records.jsonl").is_file());
    assert!(!tmp.path().join("d/records.csv").exists());
}

#[test]
fn config_file_then_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "[analysis]\ntop_n_isps = 3\nmin_samples_per_cell = 50\n[binning]\nbins_per_decade = 20\n").unwrap();
    let c = cfg.to_str().unwrap();
    let (code, out, _) = cli(&["analyze", "--config", c, "--show-config"]);
    assert_eq!(code, 0);
    let shown = midpath::cli::RunConfig::from_toml_str(&out).unwrap();
    assert_eq!((shown.analysis.top_n_isps, shown.analysis.min_samples_per_cell, shown.binning.bins_per_decade), (3, 50, 20));
    let (_, out, _) = cli(&["analyze", "--config", c, "--top-isps", "4", "--show-config"]);
    let shown = midpath::cli::RunConfig::from_toml_str(&out).unwrap();
    assert_eq!((shown.analysis.top_n_isps, shown.analysis.min_samples_per_cell), (4, 50));

    fs::write(&cfg, "[analysis]\nverbose = true\n").unwrap();
    let (code, _, err) = cli(&["analyze", "--config", c, "--show-config"]);
    assert_eq!(code, 2);
    assert!(err.contains("verbose"), "{err}");
}

#[test]
fn snapshots_feed_analysis_and_diff() {
    let tmp = tempfile::tempdir().unwrap();
    let records = simulate(&tmp.path().join("sim"), &[]);
    let snap = tmp.path().join("week.hist");
    let (code, _, err) = cli(&["snapshot", "--input", records.to_str().unwrap(), "--out", snap.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");

    let direct = tmp.path().join("direct");
    let via = tmp.path().join("via");
    assert_eq!(analyze(&records, &direct, &[]).0, 0);
    let (code, _, err) = cli(&["analyze", "--snapshot", snap.to_str().unwrap(), "--out", via.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(fs::read(direct.join("pairs.csv")).unwrap(), fs::read(via.join("pairs.csv")).unwrap());

    let (code, out, _) = cli(&["diff-snapshots", snap.to_str().unwrap(), snap.to_str().unwrap()]);
    assert_eq!(code, 0);
    let path = tmp.path().join("self.csv");
    fs::write(&path, &out).unwrap();
    let rows = common::read_table(&path);
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r["status"] == "compared" && r["ks_distance"] == "0"));

    // A later window of the same scenario without the policer.
    let text = fs::read_to_string(common::fixture("golden_scenario.toml")).unwrap();
    let fixed = tmp.path().join("fixed.toml");
    let cut = text.find("[[paths]]\nclient_asn = 28573").unwrap();
    let rest = &text[cut..];
    let end = rest[1..].find("[[paths]]").map(|i| i + 1).unwrap();
    fs::write(&fixed, format!("{}{}", &text[..cut], &rest[end..])).unwrap();
    let (code, _, err) = cli(&["simulate", "--scenario", fixed.to_str().unwrap(), "--out", tmp.path().join("sim2").to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let snap2 = tmp.path().join("fixed.hist");
    let rec2 = tmp.path().join("sim2/records.csv");
    assert_eq!(cli(&["snapshot", "--input", rec2.to_str().unwrap(), "--out", snap2.to_str().unwrap()]).0, 0);
    let diff = tmp.path().join("diff.csv");
    let (code, _, _) = cli(&["diff-snapshots", snap.to_str().unwrap(), snap2.to_str().unwrap(), "--out", diff.to_str().unwrap()]);
    assert_eq!(code, 0);
    let rows = common::read_table(&diff);
    let ks = |server: &str| -> f64 {
        rows.iter()
            .find(|r| r["server_id"] == server && r["client_asn"] == "28573" && r["metric"] == "download_mbps")
            .unwrap()["ks_distance"]
            .parse()
            .unwrap()
    };
    assert!(ks("gru03") > 0.2, "policer removal shows up: {}", ks("gru03"));
    assert!(ks("gru01") < 0.1);

    let other = tmp.path().join("coarse.hist");
    assert_eq!(
        cli(&["snapshot", "--input", records.to_str().unwrap(), "--bins-per-decade", "10", "--out", other.to_str().unwrap()]).0,
        0
    );
    let (code, _, err) = cli(&["diff-snapshots", snap.to_str().unwrap(), other.to_str().unwrap()]);
    assert_eq!(code, 1, "{err}");
}

#[test]
fn plot_command_writes_series_or_note() {
    let tmp = tempfile::tempdir().unwrap();
    let records = simulate(&tmp.path().join("sim"), &[]);
    let out = tmp.path().join("plots");
    let r = records.to_str().unwrap();
    let o = out.to_str().unwrap();
    let cfg = tmp.path().join("names.toml");
    fs::write(&cfg, "[report.asn_names]\n28573 = \"Claro\"\n").unwrap();
    let c = cfg.to_str().unwrap();
    let (code, _, err) =
        cli(&["plot", "--config", c, "--input", r, "--metro", "gru", "--asn", "28573", "--metric", "download_mbps", "--out", o]);
    assert_eq!(code, 0, "{err}");
    let plot: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("metro/gru/28573/download_mbps.json")).unwrap()).unwrap();
    assert_eq!(plot["series"].as_array().unwrap().len(), 3);
    assert!(plot["series"][0]["label"].as_str().unwrap().contains("Claro"));

    let (code, stdout, _) = cli(&["plot", "--input", r, "--metro", "gru", "--asn", "9", "--out", o]);
    assert_eq!(code, 0);
    assert!(stdout.contains("no eligible cells"), "{stdout}");
    assert_eq!(cli(&["plot", "--input", r, "--out", o]).0, 2, "metro is required");
}

#[test]
fn filters_and_stdin_style_options() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    let fixture = common::fixture("ingest_1000.csv");
    let (code, stdout, err) = analyze(&fixture, &out, &["--metro", "gru", "--min-samples", "10", "--pain-mode", "spread"]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.starts_with("1000 rows (334 accepted, 663 filtered, 3 rejected)"), "{stdout}");
    let pairs = common::read_table(&out.join("pairs.csv"));
    assert!(!pairs.is_empty());
    assert!(pairs.iter().all(|p| p["metro"] == "gru" && p["pain_mode"] == "spread"));
    let (code, _, _) = analyze(&fixture, &out, &["--from", "2025-11-25T00:00:00Z", "--to", "2025-11-24T00:00:00Z"]);
    assert_eq!(code, 2);
}

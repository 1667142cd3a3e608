//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use midpath::simulator::{
    ArrivalProcess, BaseRtt, IspProfile, LocalBottleneck, PathEffect, Scenario, ServerSpec, Tier,
};

pub fn servers(metro: &str, count: usize) -> Vec<ServerSpec> {
    (0..count)
        .map(|i| ServerSpec {
            id: format!("{metro}{:02}", i + 1),
            asn: 64500 + i as u32,
            propagation_delay_ms: 2.0,
        })
        .collect()
}

/// A residential ISP with three service tiers and a broad home-network
/// bottleneck.
pub fn multi_tier_isp(client_asn: u32, tests_per_hour: f64) -> IspProfile {
    IspProfile {
        client_asn,
        name: Some(format!("isp{client_asn}")),
        mean_tests_per_hour: tests_per_hour,
        tiers: vec![
            Tier { rate_mbps: 25.0, weight: 0.2, sigma_log10: 0.08 },
            Tier { rate_mbps: 100.0, weight: 0.4, sigma_log10: 0.06 },
            Tier { rate_mbps: 300.0, weight: 0.4, sigma_log10: 0.06 },
        ],
        local_bottleneck: LocalBottleneck { median_mbps: 400.0, sigma_log10: 0.3 },
        base_rtt_ms: BaseRtt { median: 20.0, sigma_log10: 0.08 },
        peak_degradation: 1.0,
    }
}

pub fn scenario(metro: &str, seed: u64, servers_n: usize, isps: Vec<IspProfile>, hours: f64) -> Scenario {
    Scenario {
        metro: metro.to_string(),
        seed,
        start: "2025-11-24T00:00:00Z".parse().unwrap(),
        duration_hours: hours,
        arrival: ArrivalProcess::default(),
        servers: servers(metro, servers_n),
        isps,
        paths: Vec::new(),
    }
}

/// Three servers, one ISP, about 14k tests per (ISP, server) cell.
pub fn large_clean(metro: &str, seed: u64) -> Scenario {
    scenario(metro, seed, 3, vec![multi_tier_isp(28573, 250.0)], 168.0)
}

pub fn with_effect(mut s: Scenario, asn: u32, server: &str, effect: PathEffect) -> Scenario {
    s.set_path(asn, server, effect);
    s
}

/// Exact two-sample KS distance by sorting both samples.
pub fn exact_ks(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

pub fn raw_geometric_mean(v: &[f64]) -> f64 {
    (v.iter().map(|x| x.ln()).sum::<f64>() / v.len() as f64).exp()
}

/// KS distance between two count maps over ordered bin keys, by walking
/// the union of keys with running totals.
pub fn ks_from_counts<K: Ord + Clone>(a: &BTreeMap<K, u64>, b: &BTreeMap<K, u64>) -> f64 {
    let na: u64 = a.values().sum();
    let nb: u64 = b.values().sum();
    let mut keys: Vec<K> = a.keys().chain(b.keys()).cloned().collect();
    keys.sort();
    keys.dedup();
    let (mut ca, mut cb, mut d) = (0u64, 0u64, 0.0f64);
    for k in keys {
        ca += a.get(&k).copied().unwrap_or(0);
        cb += b.get(&k).copied().unwrap_or(0);
        d = d.max((ca as f64 / na as f64 - cb as f64 / nb as f64).abs());
    }
    d
}

/// Log bin index at `per_decade` bins per decade with reference 1, computed
/// with integer-friendly boundary handling: a value exactly on a decade
/// fraction belongs to the bin it starts.
pub fn log_bin(v: f64, per_decade: u32) -> i64 {
    let raw = (per_decade as f64 * v.log10()).floor() as i64;
    let lower = |i: i64| 10f64.powf(i as f64 / per_decade as f64);
    if v >= lower(raw + 1) {
        raw + 1
    } else if v < lower(raw) {
        raw - 1
    } else {
        raw
    }
}

/// Every file under `dir` with its contents, keyed by relative path.
pub fn read_tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(base, &path, out);
            } else {
                out.insert(path.strip_prefix(base).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// Runs the command-line entry point, returning (status, stdout, stderr).
pub fn cli<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once(std::ffi::OsString::from("midpath"))
        .chain(args.iter().map(|a| a.as_ref().to_os_string()));
    let code = midpath::cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join(name)
}

/// Rows of a delimited table as column → value maps.
pub fn read_table(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            headers.iter().zip(rec.iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect()
        })
        .collect()
}

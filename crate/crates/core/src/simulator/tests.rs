use super::*;
use crate::metric::Metric;

fn servers() -> Vec<ServerSpec> {
    ["gru02", "gru03", "gru06"]
        .iter()
        .enumerate()
        .map(|(i, id)| ServerSpec { id: id.to_string(), asn: 1000 + i as u32, propagation_delay_ms: 2.0 })
        .collect()
}

fn isp(tiers: Vec<Tier>, rate_per_hour: f64) -> IspProfile {
    IspProfile {
        client_asn: 28573,
        name: None,
        mean_tests_per_hour: rate_per_hour,
        tiers,
        local_bottleneck: LocalBottleneck { median_mbps: 1e4, sigma_log10: 0.0 },
        base_rtt_ms: BaseRtt { median: 20.0, sigma_log10: 0.0 },
        peak_degradation: 1.0,
    }
}

fn scenario(tiers: Vec<Tier>, rate_per_hour: f64, hours: f64) -> Scenario {
    Scenario {
        metro: "gru".into(),
        seed: 42,
        start: "2025-11-24T00:00:00Z".parse().unwrap(),
        duration_hours: hours,
        arrival: ArrivalProcess::default(),
        servers: servers(),
        isps: vec![isp(tiers, rate_per_hour)],
        paths: Vec::new(),
    }
}

fn tier(rate: f64, sigma: f64) -> Tier {
    Tier { rate_mbps: rate, weight: 1.0, sigma_log10: sigma }
}

fn exact_ks(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn degenerate_clean_path_returns_tier_rate() {
    let s = scenario(vec![tier(100.0, 0.0)], 0.0, 1.0);
    let mut rng = measurement_rng(1, 28573, 0);
    for _ in 0..50 {
        let out = sample_measurement(&s, &s.isps[0], s.start, &mut rng);
        assert_eq!(out.record.metric(Metric::DownloadMbps), Some(100.0));
        assert_eq!(out.record.metric(Metric::MinRttMs), Some(22.0));
        assert!(out.record.check().is_ok());
    }
}

#[test]
fn policer_never_exceeds_cap() {
    let mut s = scenario(vec![tier(500.0, 0.2)], 0.0, 1.0);
    for id in ["gru02", "gru03", "gru06"] {
        s.set_path(28573, id, PathEffect::policer(100.0));
    }
    let mut rng = measurement_rng(2, 28573, 0);
    for _ in 0..2000 {
        let out = sample_measurement(&s, &s.isps[0], s.start, &mut rng);
        let down = out.record.metric(Metric::DownloadMbps).unwrap();
        assert_eq!(down, out.local_rate_mbps.min(100.0));
        assert!(down <= 100.0);
    }
}

#[test]
fn hairpin_adds_to_min_rtt() {
    let mut s = scenario(vec![tier(50.0, 0.1)], 3000.0, 2.0);
    s.isps[0].base_rtt_ms.sigma_log10 = 0.05;
    s.set_path(28573, "gru03", PathEffect::hairpin(30.0));
    let sim = run_scenario(&s);
    let median = |server: &str| {
        let mut v: Vec<f64> = sim
            .records()
            .filter(|r| r.server_id == server)
            .map(|r| r.metric(Metric::MinRttMs).unwrap())
            .collect();
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    assert!((median("gru03") - 52.0).abs() < 1.0, "{}", median("gru03"));
    assert!((median("gru02") - 22.0).abs() < 1.0);
}

#[test]
fn zero_duration_is_empty() {
    let s = scenario(vec![tier(50.0, 0.1)], 1000.0, 0.0);
    let sim = run_scenario(&s);
    assert!(sim.samples.is_empty());
}

#[test]
fn ordered_and_deterministic() {
    let mut s = scenario(vec![tier(50.0, 0.1)], 200.0, 6.0);
    s.set_path(28573, "gru02", PathEffect::congestion(20.0, 1.5));
    let a = run_scenario(&s);
    let b = run_scenario(&s);
    assert_eq!(a, b);
    assert!(a.samples.windows(2).all(|w| w[0].record.timestamp <= w[1].record.timestamp));
    assert_eq!(a.ground_truth.effects.len(), 1);
    assert_eq!(a.ground_truth.effects[0].server_id, "gru02");
    let mut other = s.clone();
    other.seed = 43;
    assert_ne!(run_scenario(&other).samples, a.samples);
}

#[test]
fn uniform_server_selection() {
    // 1250 tests/h for 24 h: about 30,000 tests
    let s = scenario(vec![tier(50.0, 0.3)], 1250.0, 24.0);
    let sim = run_scenario(&s);
    let n = sim.samples.len() as f64;
    assert!((n - 30_000.0).abs() < 4.0 * 30_000f64.sqrt(), "{n}");
    let mut counts = [0u64; 3];
    for smp in &sim.samples {
        counts[smp.server_index] += 1;
    }
    let expect = n / 3.0;
    let tolerance = 3.0 * (n * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
    for c in counts {
        assert!((c as f64 - expect).abs() <= tolerance, "{counts:?}");
    }
    // chi-square, 2 degrees of freedom, alpha = 0.001
    let chi2: f64 = counts.iter().map(|c| (*c as f64 - expect).powi(2) / expect).sum();
    assert!(chi2 < 13.816, "chi2 = {chi2}");
}

#[test]
fn local_rate_independent_of_server() {
    let mut s = scenario(vec![tier(30.0, 0.2), tier(300.0, 0.1)], 1250.0, 24.0);
    s.isps[0].local_bottleneck = LocalBottleneck { median_mbps: 150.0, sigma_log10: 0.3 };
    s.set_path(28573, "gru06", PathEffect::policer(50.0));
    let sim = run_scenario(&s);
    let local = |i: usize| -> Vec<f64> {
        sim.samples.iter().filter(|x| x.server_index == i).map(|x| x.local_rate_mbps).collect()
    };
    // 95% critical value at n = 10,000 per side is about 0.019
    assert!(exact_ks(local(0), local(1)) <= 0.02);
    assert!(exact_ks(local(0), local(2)) <= 0.02);
}

#[test]
fn arrivals_follow_diurnal_rate() {
    let mut s = scenario(vec![tier(50.0, 0.1)], 400.0, 240.0);
    s.arrival.diurnal_amplitude = 0.5;
    s.arrival.peak_hour = 20.0;
    let times = arrival_times(&s, &s.isps[0]);
    let by_hour = |h: u32| times.iter().filter(|t| chrono::Timelike::hour(*t) == h).count() as f64;
    // expected per-hour counts over ten days: 400 * 10 * (1 ± 0.5)
    assert!((by_hour(20) - 6000.0).abs() < 6.0 * 6000f64.sqrt());
    assert!((by_hour(8) - 2000.0).abs() < 6.0 * 2000f64.sqrt());
}

#[test]
fn peak_degradation_applies_only_in_window() {
    let mut s = scenario(vec![tier(100.0, 0.0)], 0.0, 1.0);
    s.isps[0].peak_degradation = 0.6;
    s.arrival.peak_hour = 20.0;
    let mut rng = measurement_rng(3, 28573, 0);
    let at = |h: u32| s.start + chrono::Duration::hours(h as i64);
    let peak = sample_measurement(&s, &s.isps[0], at(20), &mut rng);
    let off = sample_measurement(&s, &s.isps[0], at(10), &mut rng);
    assert!((peak.local_rate_mbps - 60.0).abs() < 1e-9);
    assert_eq!(off.local_rate_mbps, 100.0);
}

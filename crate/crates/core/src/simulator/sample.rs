use std::collections::BTreeMap;

use chrono::{DateTime, Duration, Utc};
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Beta, Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use super::rng::{arrival_rng, measurement_rng};
use super::scenario::{IspProfile, PathEffect, Scenario, ThroughputEffect};
use crate::ingest::MeasurementRecord;
use crate::metric::Metric;

/// Scale of the congestion share: `3.5 × Beta(2, 5)` has unit mean.
const SHARE_SCALE: f64 = 3.5;
const SHARE_FLOOR: f64 = 1e-6;

/// One generated test with the latent quantities behind it.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub record: MeasurementRecord,
    pub server_index: usize,
    /// Throughput of the local subpath alone, including peak degradation.
    pub local_rate_mbps: f64,
}

fn log_normal<R: Rng>(rng: &mut R, median: f64, sigma_log10: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    median * 10f64.powf(sigma_log10 * z)
}

fn hour_of_day(t: &DateTime<Utc>) -> f64 {
    t.timestamp().rem_euclid(86_400) as f64 / 3600.0
}

/// Draws one test of `isp` at time `t`.
///
/// The server is drawn uniformly first; the local subpath is sampled
/// without reference to it, then the path's mid-path effect applies.
pub fn sample_measurement<R: Rng>(scenario: &Scenario, isp: &IspProfile, t: DateTime<Utc>, rng: &mut R) -> Sample {
    sample_with_effects(scenario, &scenario.path_effects(), isp, t, rng)
}

pub(crate) fn sample_with_effects<R: Rng>(
    scenario: &Scenario,
    effects: &BTreeMap<(u32, String), PathEffect>,
    isp: &IspProfile,
    t: DateTime<Utc>,
    rng: &mut R,
) -> Sample {
    let server_index = rng.random_range(0..scenario.servers.len());
    let server = &scenario.servers[server_index];
    let tier_pick = WeightedIndex::new(isp.tiers.iter().map(|t| t.weight)).expect("validated tier weights");
    let tier = isp.tiers[tier_pick.sample(rng)];
    let tier_rate = log_normal(rng, tier.rate_mbps, tier.sigma_log10);
    let bottleneck = log_normal(rng, isp.local_bottleneck.median_mbps, isp.local_bottleneck.sigma_log10);
    let base_rtt = log_normal(rng, isp.base_rtt_ms.median, isp.base_rtt_ms.sigma_log10);
    let peak = if scenario.arrival.in_peak(hour_of_day(&t)) { isp.peak_degradation } else { 1.0 };
    let local_rate = tier_rate.min(bottleneck) * peak;

    let effect = effects
        .get(&(isp.client_asn, server.id.clone()))
        .copied()
        .unwrap_or_default();
    let download = match effect.throughput {
        None => local_rate,
        Some(ThroughputEffect::PerFlowPolicer { rate_mbps }) => local_rate.min(rate_mbps),
        Some(ThroughputEffect::SharedCongestion { capacity_mbps, load_factor }) => {
            let beta = Beta::new(2.0, 5.0).expect("constant parameters");
            let share = (SHARE_SCALE * beta.sample(rng) / load_factor).clamp(SHARE_FLOOR, 1.0);
            local_rate.min(capacity_mbps * share)
        }
    };
    let min_rtt = base_rtt + server.propagation_delay_ms + effect.hairpin_extra_rtt_ms.unwrap_or(0.0);

    let record = MeasurementRecord {
        timestamp: t,
        metro: scenario.metro.clone(),
        server_id: server.id.clone(),
        server_asn: server.asn,
        client_asn: isp.client_asn,
        metrics: BTreeMap::from([(Metric::DownloadMbps, download), (Metric::MinRttMs, min_rtt)]),
    };
    Sample { record, server_index, local_rate_mbps: local_rate }
}

/// Test start times of one ISP, by thinning a homogeneous Poisson process
/// at the peak rate.
pub fn arrival_times(scenario: &Scenario, isp: &IspProfile) -> Vec<DateTime<Utc>> {
    let a = &scenario.arrival;
    let peak_rate = isp.mean_tests_per_hour * (1.0 + a.diurnal_amplitude);
    if peak_rate <= 0.0 || scenario.duration_hours <= 0.0 {
        return Vec::new();
    }
    let mut rng = arrival_rng(scenario.seed, isp.client_asn);
    let gap = Exp::new(peak_rate).expect("positive rate");
    let start_hour = hour_of_day(&scenario.start);
    let mut hours = 0.0;
    let mut out = Vec::new();
    loop {
        hours += gap.sample(&mut rng);
        if hours >= scenario.duration_hours {
            break;
        }
        let keep = a.rate_factor((start_hour + hours).rem_euclid(24.0)) / (1.0 + a.diurnal_amplitude);
        if rng.random::<f64>() < keep {
            out.push(scenario.start + Duration::seconds((hours * 3600.0).floor() as i64));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthEntry {
    pub metro: String,
    pub client_asn: u32,
    pub server_id: String,
    pub effect: PathEffect,
}

/// Every non-clean path of the simulated scenarios.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub effects: Vec<GroundTruthEntry>,
}

impl GroundTruth {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("ground truth serializes");
        s.push('\n');
        s
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Simulation {
    pub samples: Vec<Sample>,
    pub ground_truth: GroundTruth,
}

impl Simulation {
    pub fn records(&self) -> impl Iterator<Item = &MeasurementRecord> {
        self.samples.iter().map(|s| &s.record)
    }

    pub fn into_records(self) -> Vec<MeasurementRecord> {
        self.samples.into_iter().map(|s| s.record).collect()
    }
}

/// Generates every test of every scenario, ordered by timestamp. Ties keep
/// scenario order, then ISP order, then arrival order.
pub fn run_scenarios(scenarios: &[Scenario]) -> Simulation {
    let mut keyed = Vec::new();
    let mut truth = GroundTruth::default();
    for (si, scenario) in scenarios.iter().enumerate() {
        let effects = scenario.path_effects();
        for ((asn, server), effect) in &effects {
            if !effect.is_clean() {
                truth.effects.push(GroundTruthEntry {
                    metro: scenario.metro.clone(),
                    client_asn: *asn,
                    server_id: server.clone(),
                    effect: *effect,
                });
            }
        }
        for (ii, isp) in scenario.isps.iter().enumerate() {
            for (n, t) in arrival_times(scenario, isp).into_iter().enumerate() {
                let mut rng = measurement_rng(scenario.seed, isp.client_asn, n as u64);
                let sample = sample_with_effects(scenario, &effects, isp, t, &mut rng);
                keyed.push(((t, si, ii, n), sample));
            }
        }
    }
    keyed.sort_by_key(|k| k.0);
    Simulation { samples: keyed.into_iter().map(|(_, s)| s).collect(), ground_truth: truth }
}

pub fn run_scenario(scenario: &Scenario) -> Simulation {
    run_scenarios(std::slice::from_ref(scenario))
}

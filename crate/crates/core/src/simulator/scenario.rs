//! Scenario description and its TOML file schema.
//!
//! ```toml
//! metro = "gru"
//! seed = 7
//! start = "2025-11-24T00:00:00Z"   # optional
//! duration_hours = 168
//!
//! [arrival]                        # optional
//! diurnal_amplitude = 0.5          # in [0, 1)
//! peak_hour = 20.0                 # UTC hour of day
//! peak_window_hours = 6.0          # width of the peak-degradation window
//!
//! [[servers]]
//! id = "gru02"
//! asn = 1251
//! propagation_delay_ms = 2.0
//!
//! [[isps]]
//! client_asn = 28573
//! name = "Claro"                   # optional
//! mean_tests_per_hour = 200
//! peak_degradation = 1.0           # optional, in (0, 1]
//! tiers = [{ rate_mbps = 100, weight = 0.5, sigma_log10 = 0.05 }]
//! local_bottleneck = { median_mbps = 300, sigma_log10 = 0.2 }
//! base_rtt_ms = { median = 20, sigma_log10 = 0.1 }
//!
//! [[paths]]                        # absent pairs are clean
//! client_asn = 28573
//! server_id = "gru03"
//! throughput = { kind = "per_flow_policer", rate_mbps = 100 }
//! # throughput = { kind = "shared_congestion", capacity_mbps = 100, load_factor = 1.5 }
//! hairpin_extra_rtt_ms = 30        # optional
//! ```

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerSpec {
    pub id: String,
    pub asn: u32,
    /// One-way-equivalent delay added to every test's minRTT toward this server.
    pub propagation_delay_ms: f64,
}

/// One service-tier mode: log-normal around `rate_mbps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tier {
    pub rate_mbps: f64,
    pub weight: f64,
    pub sigma_log10: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalBottleneck {
    pub median_mbps: f64,
    pub sigma_log10: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseRtt {
    pub median: f64,
    pub sigma_log10: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IspProfile {
    pub client_asn: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub mean_tests_per_hour: f64,
    pub tiers: Vec<Tier>,
    pub local_bottleneck: LocalBottleneck,
    pub base_rtt_ms: BaseRtt,
    /// Throughput factor of the local subpath during peak hours.
    #[serde(default = "one")]
    pub peak_degradation: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThroughputEffect {
    /// Hard per-test cap.
    PerFlowPolicer { rate_mbps: f64 },
    /// Aggregate bottleneck; each test gets `capacity × share`, where share
    /// is `3.5·Beta(2,5) / load_factor` clamped to (0, 1].
    SharedCongestion { capacity_mbps: f64, load_factor: f64 },
}

/// Mid-path behaviour of one (ISP, server) path. The default is clean.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PathEffect {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub throughput: Option<ThroughputEffect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hairpin_extra_rtt_ms: Option<f64>,
}

impl PathEffect {
    pub fn clean() -> Self {
        Self::default()
    }

    pub fn policer(rate_mbps: f64) -> Self {
        PathEffect { throughput: Some(ThroughputEffect::PerFlowPolicer { rate_mbps }), ..Self::default() }
    }

    pub fn congestion(capacity_mbps: f64, load_factor: f64) -> Self {
        PathEffect {
            throughput: Some(ThroughputEffect::SharedCongestion { capacity_mbps, load_factor }),
            ..Self::default()
        }
    }

    pub fn hairpin(extra_rtt_ms: f64) -> Self {
        PathEffect { hairpin_extra_rtt_ms: Some(extra_rtt_ms), ..Self::default() }
    }

    pub fn with_hairpin(mut self, extra_rtt_ms: f64) -> Self {
        self.hairpin_extra_rtt_ms = Some(extra_rtt_ms);
        self
    }

    pub fn is_clean(&self) -> bool {
        self.throughput.is_none() && self.hairpin_extra_rtt_ms.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub client_asn: u32,
    pub server_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub throughput: Option<ThroughputEffect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hairpin_extra_rtt_ms: Option<f64>,
}

impl PathSpec {
    pub fn effect(&self) -> PathEffect {
        PathEffect { throughput: self.throughput, hairpin_extra_rtt_ms: self.hairpin_extra_rtt_ms }
    }
}

fn default_peak_hour() -> f64 {
    20.0
}

fn default_peak_window() -> f64 {
    6.0
}

/// Poisson arrivals with rate `mean × (1 + amplitude × cos(2π(h − peak)/24))`
/// where `h` is the UTC hour of day.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalProcess {
    #[serde(default)]
    pub diurnal_amplitude: f64,
    #[serde(default = "default_peak_hour")]
    pub peak_hour: f64,
    #[serde(default = "default_peak_window")]
    pub peak_window_hours: f64,
}

impl Default for ArrivalProcess {
    fn default() -> Self {
        ArrivalProcess { diurnal_amplitude: 0.0, peak_hour: default_peak_hour(), peak_window_hours: default_peak_window() }
    }
}

impl ArrivalProcess {
    /// Rate multiplier at a UTC hour of day.
    pub fn rate_factor(&self, hour_of_day: f64) -> f64 {
        let phase = 2.0 * std::f64::consts::PI * (hour_of_day - self.peak_hour) / 24.0;
        1.0 + self.diurnal_amplitude * phase.cos()
    }

    pub fn in_peak(&self, hour_of_day: f64) -> bool {
        let d = (hour_of_day - self.peak_hour).rem_euclid(24.0);
        d.min(24.0 - d) <= self.peak_window_hours / 2.0
    }
}

pub(crate) fn default_start() -> DateTime<Utc> {
    DateTime::from_timestamp(1_763_942_400, 0).expect("valid constant") // 2025-11-24T00:00:00Z
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub metro: String,
    pub seed: u64,
    #[serde(default = "default_start")]
    pub start: DateTime<Utc>,
    pub duration_hours: f64,
    #[serde(default)]
    pub arrival: ArrivalProcess,
    pub servers: Vec<ServerSpec>,
    pub isps: Vec<IspProfile>,
    #[serde(default)]
    pub paths: Vec<PathSpec>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario file is not valid TOML: {0}")]
    Syntax(String),
    #[error("unknown scenario keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("invalid scenario: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

impl ScenarioError {
    /// Offending keys or key paths, for usage diagnostics.
    pub fn keys(&self) -> Vec<String> {
        match self {
            ScenarioError::Syntax(_) => Vec::new(),
            ScenarioError::UnknownKeys(k) => k.clone(),
            ScenarioError::Invalid(problems) => problems
                .iter()
                .map(|p| p.split(':').next().unwrap_or(p).to_string())
                .collect(),
        }
    }
}

const TOP_KEYS: &[&str] = &["metro", "seed", "start", "duration_hours", "arrival", "servers", "isps", "paths"];
const ARRIVAL_KEYS: &[&str] = &["diurnal_amplitude", "peak_hour", "peak_window_hours"];
const SERVER_KEYS: &[&str] = &["id", "asn", "propagation_delay_ms"];
const ISP_KEYS: &[&str] = &[
    "client_asn",
    "name",
    "mean_tests_per_hour",
    "tiers",
    "local_bottleneck",
    "base_rtt_ms",
    "peak_degradation",
];
const TIER_KEYS: &[&str] = &["rate_mbps", "weight", "sigma_log10"];
const BOTTLENECK_KEYS: &[&str] = &["median_mbps", "sigma_log10"];
const RTT_KEYS: &[&str] = &["median", "sigma_log10"];
const PATH_KEYS: &[&str] = &["client_asn", "server_id", "throughput", "hairpin_extra_rtt_ms"];
const POLICER_KEYS: &[&str] = &["kind", "rate_mbps"];
const CONGESTION_KEYS: &[&str] = &["kind", "capacity_mbps", "load_factor"];

fn unknown_keys(table: &toml::Table, path: &str, allowed: &[&str], out: &mut Vec<String>) {
    for key in table.keys() {
        if !allowed.contains(&key.as_str()) {
            out.push(if path.is_empty() { key.clone() } else { format!("{path}.{key}") });
        }
    }
}

fn each_table<'a>(table: &'a toml::Table, key: &str) -> impl Iterator<Item = (usize, &'a toml::Table)> {
    table
        .get(key)
        .and_then(|v| v.as_array())
        .into_iter()
        .flatten()
        .enumerate()
        .filter_map(|(i, v)| v.as_table().map(|t| (i, t)))
}

fn sub_table<'a>(table: &'a toml::Table, key: &str) -> Option<&'a toml::Table> {
    table.get(key).and_then(|v| v.as_table())
}

fn collect_unknown_keys(root: &toml::Table) -> Vec<String> {
    let mut out = Vec::new();
    unknown_keys(root, "", TOP_KEYS, &mut out);
    if let Some(t) = sub_table(root, "arrival") {
        unknown_keys(t, "arrival", ARRIVAL_KEYS, &mut out);
    }
    for (i, t) in each_table(root, "servers") {
        unknown_keys(t, &format!("servers[{i}]"), SERVER_KEYS, &mut out);
    }
    for (i, t) in each_table(root, "isps") {
        let path = format!("isps[{i}]");
        unknown_keys(t, &path, ISP_KEYS, &mut out);
        for (j, tier) in each_table(t, "tiers") {
            unknown_keys(tier, &format!("{path}.tiers[{j}]"), TIER_KEYS, &mut out);
        }
        if let Some(b) = sub_table(t, "local_bottleneck") {
            unknown_keys(b, &format!("{path}.local_bottleneck"), BOTTLENECK_KEYS, &mut out);
        }
        if let Some(b) = sub_table(t, "base_rtt_ms") {
            unknown_keys(b, &format!("{path}.base_rtt_ms"), RTT_KEYS, &mut out);
        }
    }
    for (i, t) in each_table(root, "paths") {
        let path = format!("paths[{i}]");
        unknown_keys(t, &path, PATH_KEYS, &mut out);
        if let Some(eff) = sub_table(t, "throughput") {
            let allowed = match eff.get("kind").and_then(|k| k.as_str()) {
                Some("per_flow_policer") => POLICER_KEYS,
                Some("shared_congestion") => CONGESTION_KEYS,
                _ => &["kind"][..],
            };
            unknown_keys(eff, &format!("{path}.throughput"), allowed, &mut out);
        }
    }
    out
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Scenario, ScenarioError> {
        let root: toml::Table = text.parse().map_err(|e: toml::de::Error| ScenarioError::Syntax(e.to_string()))?;
        let unknown = collect_unknown_keys(&root);
        if !unknown.is_empty() {
            return Err(ScenarioError::UnknownKeys(unknown));
        }
        let scenario: Scenario = toml::Value::Table(root)
            .try_into()
            .map_err(|e: toml::de::Error| ScenarioError::Invalid(vec![e.message().to_string()]))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Every violated constraint, each prefixed with its key path.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut p = Vec::new();
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.metro.is_empty() {
            p.push("metro: must not be empty".to_string());
        }
        if !(self.duration_hours.is_finite() && self.duration_hours >= 0.0) {
            p.push("duration_hours: must be finite and non-negative".to_string());
        }
        let a = &self.arrival;
        if !(0.0..1.0).contains(&a.diurnal_amplitude) {
            p.push("arrival.diurnal_amplitude: must lie in [0, 1)".to_string());
        }
        if !a.peak_hour.is_finite() {
            p.push("arrival.peak_hour: must be finite".to_string());
        }
        if !(a.peak_window_hours.is_finite() && (0.0..=24.0).contains(&a.peak_window_hours)) {
            p.push("arrival.peak_window_hours: must lie in [0, 24]".to_string());
        }
        if self.servers.is_empty() {
            p.push("servers: at least one server is required".to_string());
        }
        let mut ids = BTreeSet::new();
        for (i, s) in self.servers.iter().enumerate() {
            if !s.id.starts_with(&self.metro) || s.id.is_empty() {
                p.push(format!("servers[{i}].id: `{}` must start with the metro code", s.id));
            }
            if !ids.insert(s.id.as_str()) {
                p.push(format!("servers[{i}].id: duplicate `{}`", s.id));
            }
            if s.asn == 0 {
                p.push(format!("servers[{i}].asn: must be positive"));
            }
            if !(s.propagation_delay_ms.is_finite() && s.propagation_delay_ms >= 0.0) {
                p.push(format!("servers[{i}].propagation_delay_ms: must be finite and non-negative"));
            }
        }
        let mut asns = BTreeSet::new();
        for (i, isp) in self.isps.iter().enumerate() {
            let at = format!("isps[{i}]");
            if isp.client_asn == 0 {
                p.push(format!("{at}.client_asn: must be positive"));
            }
            if !asns.insert(isp.client_asn) {
                p.push(format!("{at}.client_asn: duplicate {}", isp.client_asn));
            }
            if !(isp.mean_tests_per_hour.is_finite() && isp.mean_tests_per_hour >= 0.0) {
                p.push(format!("{at}.mean_tests_per_hour: must be finite and non-negative"));
            }
            if isp.tiers.is_empty() {
                p.push(format!("{at}.tiers: at least one tier is required"));
            }
            for (j, t) in isp.tiers.iter().enumerate() {
                if !positive(t.rate_mbps) {
                    p.push(format!("{at}.tiers[{j}].rate_mbps: must be positive"));
                }
                if !positive(t.weight) {
                    p.push(format!("{at}.tiers[{j}].weight: must be positive"));
                }
                if !(t.sigma_log10.is_finite() && t.sigma_log10 >= 0.0) {
                    p.push(format!("{at}.tiers[{j}].sigma_log10: must be non-negative"));
                }
            }
            if !positive(isp.local_bottleneck.median_mbps) {
                p.push(format!("{at}.local_bottleneck.median_mbps: must be positive"));
            }
            if !(isp.local_bottleneck.sigma_log10.is_finite() && isp.local_bottleneck.sigma_log10 >= 0.0) {
                p.push(format!("{at}.local_bottleneck.sigma_log10: must be non-negative"));
            }
            if !positive(isp.base_rtt_ms.median) {
                p.push(format!("{at}.base_rtt_ms.median: must be positive"));
            }
            if !(isp.base_rtt_ms.sigma_log10.is_finite() && isp.base_rtt_ms.sigma_log10 >= 0.0) {
                p.push(format!("{at}.base_rtt_ms.sigma_log10: must be non-negative"));
            }
            if !(isp.peak_degradation > 0.0 && isp.peak_degradation <= 1.0) {
                p.push(format!("{at}.peak_degradation: must lie in (0, 1]"));
            }
        }
        let mut seen_paths = BTreeSet::new();
        for (i, path) in self.paths.iter().enumerate() {
            let at = format!("paths[{i}]");
            if !asns.contains(&path.client_asn) {
                p.push(format!("{at}.client_asn: {} is not a listed ISP", path.client_asn));
            }
            if !ids.contains(path.server_id.as_str()) {
                p.push(format!("{at}.server_id: `{}` is not a listed server", path.server_id));
            }
            if !seen_paths.insert((path.client_asn, path.server_id.as_str())) {
                p.push(format!("{at}: duplicate path"));
            }
            match path.throughput {
                Some(ThroughputEffect::PerFlowPolicer { rate_mbps }) if !positive(rate_mbps) => {
                    p.push(format!("{at}.throughput.rate_mbps: must be positive"))
                }
                Some(ThroughputEffect::SharedCongestion { capacity_mbps, load_factor }) => {
                    if !positive(capacity_mbps) {
                        p.push(format!("{at}.throughput.capacity_mbps: must be positive"));
                    }
                    if !positive(load_factor) {
                        p.push(format!("{at}.throughput.load_factor: must be positive"));
                    }
                }
                _ => {}
            }
            if let Some(x) = path.hairpin_extra_rtt_ms {
                if !positive(x) {
                    p.push(format!("{at}.hairpin_extra_rtt_ms: must be positive"));
                }
            }
        }
        if p.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid(p))
        }
    }

    /// Mid-path effect of every (ISP, server) path, clean where unlisted.
    pub fn path_effects(&self) -> BTreeMap<(u32, String), PathEffect> {
        let mut out = BTreeMap::new();
        for isp in &self.isps {
            for s in &self.servers {
                out.insert((isp.client_asn, s.id.clone()), PathEffect::clean());
            }
        }
        for p in &self.paths {
            out.insert((p.client_asn, p.server_id.clone()), p.effect());
        }
        out
    }

    pub fn set_path(&mut self, client_asn: u32, server_id: &str, effect: PathEffect) {
        self.paths.retain(|p| !(p.client_asn == client_asn && p.server_id == server_id));
        if !effect.is_clean() {
            self.paths.push(PathSpec {
                client_asn,
                server_id: server_id.to_string(),
                throughput: effect.throughput,
                hairpin_extra_rtt_ms: effect.hairpin_extra_rtt_ms,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CLARO: &str = r#"
metro = "gru"
seed = 7
duration_hours = 24

[[servers]]
id = "gru02"
asn = 1251
propagation_delay_ms = 2.0

[[servers]]
id = "gru03"
asn = 1251
propagation_delay_ms = 2.5

[[isps]]
client_asn = 28573
name = "Claro"
mean_tests_per_hour = 10
tiers = [{ rate_mbps = 100, weight = 1, sigma_log10 = 0.05 }, { rate_mbps = 500, weight = 1, sigma_log10 = 0.05 }]
local_bottleneck = { median_mbps = 300, sigma_log10 = 0.2 }
base_rtt_ms = { median = 20, sigma_log10 = 0.1 }

[[paths]]
client_asn = 28573
server_id = "gru03"
throughput = { kind = "per_flow_policer", rate_mbps = 100 }
hairpin_extra_rtt_ms = 30
"#;

    #[test]
    fn parses_example() {
        let s = Scenario::from_toml_str(CLARO).unwrap();
        assert_eq!(s.servers.len(), 2);
        assert_eq!(s.isps[0].peak_degradation, 1.0);
        assert_eq!(s.start, "2025-11-24T00:00:00Z".parse::<DateTime<Utc>>().unwrap());
        let eff = s.path_effects();
        assert!(eff[&(28573, "gru02".to_string())].is_clean());
        assert_eq!(eff[&(28573, "gru03".to_string())], PathEffect::policer(100.0).with_hairpin(30.0));
        assert_eq!(Scenario::from_toml_str(&s.to_toml_string()).unwrap(), s);
    }

    #[test]
    fn lists_every_unknown_key() {
        let text = CLARO
            .replace("seed = 7", "seed = 7\ncolour = 1")
            .replace("propagation_delay_ms = 2.5", "propagation_delay_ms = 2.5\ndelay = 3")
            .replace("rate_mbps = 100 }\nhairpin", "rate_mbps = 100, burst = 3 }\nhairpin");
        let err = Scenario::from_toml_str(&text).unwrap_err();
        assert_eq!(
            err.keys(),
            vec!["colour", "servers[1].delay", "paths[0].throughput.burst"]
        );
    }

    #[test]
    fn lists_every_invalid_value() {
        let text = CLARO
            .replace("weight = 1, sigma_log10 = 0.05 }, {", "weight = -1, sigma_log10 = 0.05 }, {")
            .replace("server_id = \"gru03\"", "server_id = \"gru09\"");
        let err = Scenario::from_toml_str(&text).unwrap_err();
        assert_eq!(err.keys(), vec!["isps[0].tiers[0].weight", "paths[0].server_id"]);
    }

    #[test]
    fn arrival_shape() {
        let a = ArrivalProcess { diurnal_amplitude: 0.5, peak_hour: 20.0, peak_window_hours: 6.0 };
        assert!((a.rate_factor(20.0) - 1.5).abs() < 1e-12);
        assert!((a.rate_factor(8.0) - 0.5).abs() < 1e-12);
        assert!(a.in_peak(22.9) && a.in_peak(17.0) && !a.in_peak(16.9));
        let midnight = ArrivalProcess { peak_hour: 23.0, ..a };
        assert!(midnight.in_peak(1.5) && !midnight.in_peak(2.5));
    }
}

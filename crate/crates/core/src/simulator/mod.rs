//! Synthetic measurements from the single-attachment path model.
//!
//! Each test is the product of a local subpath (service tier, home
//! network bottleneck, access latency, peak-hour degradation) that does not
//! depend on the server, and a wide-area subpath that may carry a mid-path
//! effect: a per-flow policer, shared congestion, or a hairpin detour adding
//! minRTT. The shared-congestion share distribution is a qualitative
//! stand-in for cross-traffic smearing, not a fitted model.

mod rng;
mod sample;
mod scenario;

pub use rng::{arrival_rng, measurement_rng, mix};
pub use sample::{
    arrival_times, run_scenario, run_scenarios, sample_measurement, GroundTruth, GroundTruthEntry, Sample,
    Simulation,
};
pub use scenario::{
    ArrivalProcess, BaseRtt, IspProfile, LocalBottleneck, PathEffect, PathSpec, Scenario, ScenarioError,
    ServerSpec, ThroughputEffect, Tier,
};

#[cfg(test)]
mod tests;

//! Differential A/B diagnosis of mid-path Internet performance.
//!
//! Tests from clients of one access ISP are spread uniformly over the
//! measurement servers of a metro, so every (ISP, server) cell draws from the
//! same population. Differences between the cells' distributions point at
//! the wide-area path rather than the access network.
//!
//! Pipeline: [`ingest`] records → [`histogram`] sparse log-binned counts →
//! [`stats`] KS distance and geometric-mean spread → [`analysis`] pair
//! enumeration and per-metro worst cases → [`report`]. [`simulator`]
//! generates ground-truth datasets.
//!
//! Binning, statistics and analysis are generic over [`Scalar`] (`f32` or
//! `f64`); the aliases below fix the scalar to `f64`.

pub mod analysis;
pub mod cli;
pub mod histogram;
pub mod ingest;
pub mod metric;
pub mod report;
pub mod scalar;
pub mod simulator;
pub mod stats;

pub use metric::Metric;
pub use scalar::Scalar;

pub type BinningScheme = histogram::BinningScheme<f64>;
pub type SchemeSet = histogram::SchemeSet<f64>;
pub type SparseHistogram = histogram::SparseHistogram<f64>;
pub type BinnedDistribution = stats::BinnedDistribution<f64>;
pub type DifferenceStat = stats::DifferenceStat<f64>;
pub type PairResult = analysis::PairResult<f64>;
pub type MetroSummary = analysis::MetroSummary<f64>;
pub type Analysis = analysis::Analysis<f64>;

pub type SparseHistogram32 = histogram::SparseHistogram<f32>;
pub type BinnedDistribution32 = stats::BinnedDistribution<f32>;

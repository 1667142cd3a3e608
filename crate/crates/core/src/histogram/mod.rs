//! Logarithmic binning and the sparse (metro, server, ISP, metric, bin)
//! histogram.

mod binning;
pub mod snapshot;
mod sparse;

pub use binning::{Bin, BinningError, BinningScheme, SchemeSet};
pub use sparse::{Cell, CellDistribution, CellKey, HistogramError, SparseHistogram};

//! Zoning of areal units by the similarity of their epidemic R(t) trends.
//!
//! The chain runs from daily incidence per unit to spatially contiguous
//! zones:
//!
//! 1. [`repro`] estimates R(t) per unit with the Wallinga–Teunis method and
//!    smooths it;
//! 2. [`dtw`] compares the trends pairwise with dynamic time warping;
//! 3. [`geograph`] builds a proximity graph and its minimum spanning tree
//!    under the DTW distances;
//! 4. [`zoning`] cuts the tree into `k` zones.
//!
//! [`ingest`] reads case, mortality and geometry files, [`synth`] generates
//! renewal epidemics with a known zoning, and [`pipeline`] strings the
//! stages together and writes the artifacts.

pub mod dataset;
pub mod dtw;
pub mod error;
pub mod geograph;
pub mod geometry;
pub mod ingest;
pub mod io;
pub mod pipeline;
pub mod render;
pub mod repro;
pub mod synth;
pub mod zoning;

pub use error::{Error, Result};

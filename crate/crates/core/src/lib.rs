//! Random hypergraph covers and expectation thresholds.
//!
//! The crate samples random k-uniform hypergraphs, builds an explicit cover
//! `G` of the upset of `g = (1/r) * 1_H`, measures `w(G, p/L)` exactly or by
//! Monte Carlo, and certifies the inequalities that bound that weight. A
//! separate module computes expectation and fractional expectation
//! thresholds of small explicit monotone families.

pub mod campaign;
pub mod claims;
pub mod cover;
pub mod error;
pub mod exactmath;
pub mod hypergeom;
pub mod hypergraph;
pub mod seed;
pub mod stats;
pub mod subsets;
pub mod thresholds;
pub mod weights;

pub use error::{Error, Result};

//! Rumor source detection on graphs with incomplete observations.
//!
//! The pipeline simulates heterogeneous independent-cascade spread on a graph, hides a
//! fraction of the nodes, encodes each node's observed state, arrival time and Laplacian
//! position in the infected subgraph, and trains a multi-head graph-attention classifier
//! to flag the nodes that started the cascade.

pub mod cascade;
pub mod config;
pub mod datasets;
pub mod encoding;
pub mod error;
pub mod graph;
pub mod model;
pub mod report;
pub mod rng;
pub mod snapshot_io;
pub mod train;

pub use error::{Error, Result};

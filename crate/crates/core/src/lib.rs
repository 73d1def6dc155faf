//! Account identity inference on transaction graphs.
//!
//! Each labeled account is reduced to a bounded ego-subgraph of its
//! transaction partners, and the subgraphs are classified by a two-layer
//! graph convolutional network with a max-pool readout. Spectral signature
//! baselines with a kNN classifier, a planted-pattern data generator and the
//! experiment protocols live alongside.

pub mod baselines;
pub mod bundle;
pub mod config;
pub mod error;
pub mod features;
pub mod gnn;
pub mod graph;
pub mod harness;
pub mod pipeline;
pub mod sampler;
pub mod sparse;
pub mod synth;

pub use error::{Error, Result};

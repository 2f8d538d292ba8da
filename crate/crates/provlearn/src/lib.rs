//! Provenance-graph learning toolkit: parse audit provenance logs into typed
//! heterogeneous multigraphs, derive spectral and degree features, generate
//! calibrated synthetic datasets, and train a relational graph network to
//! separate attack from benign activity.

pub mod features;
pub mod graph;
pub mod gnn;
pub mod parse;
pub mod synth;
pub mod trainer;

mod par;

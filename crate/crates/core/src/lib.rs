//! Sliding-window anomaly detection over per-sensor streams.
//!
//! Each stateful sensor keeps a window of its last W values. On every full
//! window the values are clustered with one-dimensional K-means, the cluster
//! sequence is treated as a Markov chain, and the window is flagged when the
//! composed probability of its last N transitions falls below a threshold.
//!
//! Most windows never need the full clustering: a window that lost and gained
//! the same value keeps its clusters (IN/OUT), a window with one distinct value
//! or K = 1 needs none (K1), and a window with fewer distinct values than K is
//! already a fixed point (LowK). [`oracle`] recomputes everything from scratch
//! and is the reference the engine is tested against.

pub mod clustering;
pub mod commands;
pub mod generator;
pub mod model;
pub mod modeling;
pub mod oracle;
pub mod pipeline;
pub mod window;
pub mod wire;

pub use model::{
    load_metadata, validate_config, Anomaly, ConfigError, Metadata, ObservationGroup, RunConfig,
    SensorKey, SensorMetadata,
};
pub use pipeline::{run, Engine, RunReport};

//! Topic-diffusion reconstruction and prediction over attributed social
//! graphs.
//!
//! The pipeline: load a friendship graph and an action log, derive user
//! attributes (continent, information role, content role, activity cluster),
//! slice the log into time slots, reconstruct per-topic diffusion
//! collections, score them with an eight-component feature vector, predict
//! the next slot's participants, and quantify how much attribute-restricted
//! subgraphs distort diffusion relative to the full graph.

pub mod attributes;
pub mod diffusion;
pub mod distortion;
pub mod error;
pub mod events;
pub mod experiment;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod predict;
pub mod synth;

pub use error::{Error, Result};

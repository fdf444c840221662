//! Benchmark pipeline for annealing-style samplers on hard scheduling
//! (3-coloring) instances.
//!
//! The crate is organised as a straight pipeline:
//!
//! * [`instances`] generates graphs with a hidden proper 3-coloring,
//! * [`qubo`] compiles them to the one-hot coloring QUBO and its Ising form,
//! * [`topology`] builds Chimera and Pegasus hardware graphs and profiles,
//! * [`embedding`] minor-embeds logical problems with ferromagnetic chains,
//! * [`samplers`] draws gauge-randomised samples (exact, SA, replay),
//! * [`stats`] turns tallies into ground-state probabilities, TTS, bootstrap
//!   confidence intervals and exponential scaling fits,
//! * [`harness`] orchestrates sweeps with checkpointing and reporting.

pub mod embedding;
pub mod error;
pub mod harness;
pub mod instances;
pub mod numeric;
pub mod qubo;
pub mod samplers;
pub mod seed;
pub mod stats;
pub mod topology;

pub use error::{Error, Result};

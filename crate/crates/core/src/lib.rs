//! Hybrid dedicated/shared resource allocation for RAN slicing.
//!
//! The crate is organised bottom-up:
//!
//! * [`traffic`] generates heavy-tailed (Pareto) arrival traces.
//! * [`channel`] provides spectral-efficiency traces and the bits-per-PRB map.
//! * [`scheduler`] solves the per-slot log-utility problem with two-stage
//!   water-filling and recovers the KKT multipliers.
//! * [`queue`] evolves per-UE backlogs and computes Little's-law delays.
//! * [`mip`] emits the single-level Big-M mixed-integer formulations.
//! * [`optimizer`] searches the outer allocation space by simulation.
//! * [`scenario`], [`experiment`] and [`verify`] drive experiments from a
//!   TOML configuration.

pub mod channel;
pub mod error;
pub mod experiment;
pub mod mip;
pub mod optimizer;
pub mod queue;
pub mod rng;
pub mod samples;
pub mod scenario;
pub mod scheduler;
pub mod traffic;
pub mod verify;

pub use error::{Error, Result};
pub use samples::{SampleSet, Topology};
pub use scheduler::{Allocation, SlotSchedule};

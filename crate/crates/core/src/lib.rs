//! Deterministic simulation of minimal reactive robot swarms.
//!
//! Agents are idiosyncratic unicycles with a single binary cone sensor and a
//! direct sensor-to-action controller. The crate covers the tick loop
//! ([`world`]), macroscopic metrics and phase classification ([`metrics`]),
//! actuation calibration from measured robot data ([`calibration`]), seeded
//! parameter sweeps ([`sweep`]) and trace export ([`record`]).

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod config;
pub mod error;
pub mod metrics;
pub mod model;
pub mod record;
pub mod rng;
pub mod scenarios;
pub mod sensing;
pub mod serde_ext;
pub mod sweep;
pub mod world;

pub use error::{Result, SwarmError};
pub use metrics::{ClassifierConfig, MetricTrace, PhaseLabel};
pub use model::{AgentState, ArenaSpec, ControlInput, ControllerKind, ControllerMode};
pub use world::{World, WorldConfig};

//! Discrete-event simulator for ad-hoc routing in vehicular networks.
//!
//! Three routing protocols (AODV, DSR, GPSR) run over an abstracted wireless
//! channel: unit-disk connectivity, per-node drop-tail interface queues and
//! serialization delay, with Random Waypoint mobility and CBR traffic.
//! Per-packet bookkeeping feeds the usual ad-hoc performance metrics
//! (delivery ratio, end-to-end delay, loss, throughput).
//!
//! The crate is organized around a single-threaded event engine: one event at
//! a time mutates world state, so a run is a deterministic function of
//! (config, seed). Independent runs may execute concurrently; see
//! [`sweep::run_sweep`].

pub mod aodv;
pub mod channel;
pub mod dsr;
pub mod engine;
pub mod geometry;
pub mod gpsr;
pub mod ids;
pub mod metrics;
pub mod mobility;
pub mod packet;
pub mod routing;
pub mod scenario;
pub mod sim;
pub mod sweep;
pub mod traffic;

pub use engine::{RngStream, SimTime};
pub use geometry::Position;
pub use ids::{FlowId, NodeId, PacketId};
pub use metrics::{MetricsReport, PacketLedger};
pub use packet::DropReason;
pub use scenario::{Planarization, Protocol, ScenarioConfig, SweepSpec};
pub use sim::Simulation;

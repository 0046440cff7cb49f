//! Fault-injection harness for autonomous-driving agents.
//!
//! A deterministic 2D urban simulator ([`world`]) drives a sensing and
//! control loop ([`agent`]) whose boundaries can be corrupted by data,
//! hardware, timing and machine-learning faults ([`faultlib`]). Traffic
//! violations are detected frame by frame ([`violations`]) and campaigns of
//! seeded episodes are aggregated into resilience metrics ([`campaign`]):
//! mission success rate, violations and accidents per kilometre, and time to
//! violation.

pub mod agent;
pub mod campaign;
pub mod cli;
pub mod faultlib;
pub mod rng;
pub mod violations;
pub mod world;

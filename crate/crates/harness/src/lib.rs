//! Scenarios, a turn-based simulation loop, random task generation,
//! experiment suites and an HTTP session service around `epike-core` agents.

pub mod generator;
pub mod scenario;
pub mod sim;
pub mod suite;
pub mod service;

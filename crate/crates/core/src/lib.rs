//! Execution of shared plans by agents that may disagree about which plans
//! are feasible.
//!
//! Worlds are knowledge bases over finite-domain constraints ([`kb`]); agents'
//! nested beliefs are plausibility models over those worlds ([`doxastic`]);
//! execution and communication are action models applied by product update
//! ([`actions`]). [`planlib`] encodes the task, [`mcts`] plans, and
//! [`executor`] / [`baseline`] wrap it as an observation callback.

pub mod kb;
pub mod doxastic;
pub mod planlib;
pub mod actions;
pub mod mcts;
pub mod executor;
pub mod baseline;

#[cfg(test)]
pub(crate) mod fixtures;

//! Feasibility checking and deterministic simulation of Byzantine agreement
//! on incomplete networks whose fault placement is constrained.
//!
//! The crate has three layers:
//!
//! * combinatorics: [`graph`] (minimal vertex separators), [`fault`]
//!   (permitted fault sets), [`cut_check`] (the weak cut property and the
//!   classical and majority-per-cut conditions);
//! * execution: [`sim`] (lock-step synchronous rounds with pluggable
//!   adversaries), [`flood`] (path-header relay and the fault-hypothesis
//!   decoder), [`agreement`] (information-gathering agreement over relayed
//!   channels, plus trusted-leader and trusted-subgraph variants),
//!   [`adversary`] (the strategy library and the replay-chain construction);
//! * batch front end: [`harness`] (reports, sweeps, exit codes) consumed by
//!   the `weakcut` binary.

pub mod adversary;
pub mod agreement;
pub mod cut_check;
pub mod error;
pub mod fault;
pub mod fixtures;
pub mod flood;
pub mod graph;
pub mod harness;
pub mod sim;

pub use error::{Error, Result};

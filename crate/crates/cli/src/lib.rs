//! Operational shell around the engine: the HTTP turn service and the
//! helpers the `socialbot` binary shares with its tests.

pub mod report;
pub mod server;

//! Gossip-based discovery of GIST signaling nodes and epidemic dissemination
//! of NSLP payloads, on top of a deterministic network simulator.

pub mod bootstrap;
pub mod discovery;
pub mod dissemination;
pub mod harness;
pub mod model;
pub mod simnet;
pub mod wire;

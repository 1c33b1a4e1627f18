//! Gossip-based discovery of GIST nodes. The active thread runs as a timer
//! event per node, the passive thread as the message handlers.

mod config;
mod engine;
mod node;

pub use config::{Approach, ConfigError, GossipConfig};
pub use engine::{DiscoveryError, DiscoverySim, Event, MessageCounts, RunStats, SIM_ASN};
pub use node::{share_filter, store_policy, Activity, NodeState, PendingSession};

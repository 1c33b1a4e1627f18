use std::collections::{BTreeMap, BTreeSet};

use crate::model::{
    Address, NodeDescriptor, NodeId, NslpId, PeerIdentity, SessionId, SimTime, View,
};
use crate::simnet::DeliveryMode;

use super::config::GossipConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activity {
    Active,
    Relaxed,
    Suspended,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PendingSession {
    pub peer: Address,
    pub sent_at: SimTime,
    pub mode: DeliveryMode,
}

/// Per-node gossip state.
#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: NodeId,
    pub address: Address,
    pub identity: PeerIdentity,
    pub supported_nslps: BTreeSet<NslpId>,
    pub view: View,
    pub activity: Activity,
    pub current_delta_ms: f64,
    pub cycles_without_view_change: u32,
    pub pending_sessions: BTreeMap<SessionId, PendingSession>,
    pub(crate) awaiting_ack: BTreeMap<SessionId, SimTime>,
    pub(crate) timer_generation: u64,
    changed_this_cycle: bool,
}

impl NodeState {
    pub fn new(id: NodeId, address: Address, config: &GossipConfig) -> Self {
        let identity = PeerIdentity::for_node(id);
        NodeState {
            id,
            address,
            identity,
            supported_nslps: config.supported_nslps.iter().map(|&n| NslpId(n)).collect(),
            view: View::with_capacity(identity, config.view_capacity),
            activity: Activity::Active,
            current_delta_ms: config.delta_ms,
            cycles_without_view_change: 0,
            pending_sessions: BTreeMap::new(),
            awaiting_ack: BTreeMap::new(),
            timer_generation: 0,
            changed_this_cycle: false,
        }
    }

    pub fn own_descriptor(&self) -> NodeDescriptor {
        let mut d = NodeDescriptor::new(self.identity, self.address);
        d.supported_nslps = self.supported_nslps.clone();
        d
    }

    /// Records a view change. Returns true when the node was relaxed or
    /// suspended and has to be put back on the base cycle.
    pub fn note_view_change(&mut self, config: &GossipConfig) -> bool {
        self.cycles_without_view_change = 0;
        self.changed_this_cycle = true;
        let woke = self.activity != Activity::Active;
        self.activity = Activity::Active;
        self.current_delta_ms = config.delta_ms;
        woke
    }

    /// Idle bookkeeping at a cycle boundary. Returns the activity the node
    /// runs the coming cycle with.
    pub fn cycle_boundary(&mut self, config: &GossipConfig) -> Activity {
        if std::mem::take(&mut self.changed_this_cycle) {
            return self.activity;
        }
        self.cycles_without_view_change += 1;
        if self.cycles_without_view_change >= config.idle_cycles_threshold {
            self.cycles_without_view_change = 0;
            if self.current_delta_ms >= config.max_delta_ms {
                self.activity = Activity::Suspended;
            } else {
                self.current_delta_ms =
                    (self.current_delta_ms * config.relax_factor).min(config.max_delta_ms);
                self.activity = Activity::Relaxed;
            }
        }
        self.activity
    }

    /// Drops sessions older than twice the current interval.
    pub fn expire_sessions(&mut self, now: SimTime) {
        let horizon = now - 2.0 * self.current_delta_ms;
        self.pending_sessions.retain(|_, s| s.sent_at >= horizon);
        self.awaiting_ack.retain(|_, &mut t| t >= horizon);
    }
}

/// Keeps the descriptors whose address shares `prefix_len` leading bits with
/// the requester.
pub fn share_filter(
    prefix_len: u8,
    buffer: Vec<NodeDescriptor>,
    requester: Address,
) -> Vec<NodeDescriptor> {
    if prefix_len == 0 {
        return buffer;
    }
    buffer
        .into_iter()
        .filter(|d| d.address.shares_prefix(requester, prefix_len))
        .collect()
}

/// Whether a descriptor may enter the view. Only a present metric that
/// exceeds a configured bound rejects it.
pub fn store_policy(config: &GossipConfig, descriptor: &NodeDescriptor) -> bool {
    let exceeds = |bound: Option<u32>, value: Option<u32>| matches!((bound, value), (Some(b), Some(v)) if v > b);
    !exceeds(config.store_max_gist_hops, descriptor.gist_hops)
        && !exceeds(config.store_max_ip_hops, descriptor.ip_hops)
}

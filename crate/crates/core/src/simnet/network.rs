use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{Address, NodeId, SimTime};
use crate::wire::{self, EncodeError, HeaderFlags, Message};

use super::routing::{Route, RouteError};
use super::Underlay;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("no node owns address {0}")]
    Unroutable(Address),
    #[error("node {0} addressed a message to itself")]
    SelfAddressed(NodeId),
    #[error("only intercepted full-path packets can be forwarded")]
    NotForwardable,
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
}

/// Encapsulation and interception behaviour of a transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeliveryMode {
    /// Datagram straight to the addressed node.
    DMode,
    /// Router-alert query: consumed by the first GIST node on the path.
    QModeIntercept,
    /// Router-alert query processed by every on-path GIST node and forwarded.
    QModeFullPath,
}

impl DeliveryMode {
    pub fn flags(self) -> HeaderFlags {
        match self {
            DeliveryMode::DMode => HeaderFlags::default(),
            DeliveryMode::QModeIntercept => HeaderFlags::QMODE,
            DeliveryMode::QModeFullPath => HeaderFlags::QMODE.union(HeaderFlags::FULLPATH),
        }
    }

    pub fn from_flags(flags: HeaderFlags) -> DeliveryMode {
        if !flags.contains(HeaderFlags::QMODE) {
            DeliveryMode::DMode
        } else if flags.contains(HeaderFlags::FULLPATH) {
            DeliveryMode::QModeFullPath
        } else {
            DeliveryMode::QModeIntercept
        }
    }
}

/// An IP packet in flight, pinned to the route chosen when it was first sent.
#[derive(Debug, Clone)]
pub struct Packet {
    pub bytes: Vec<u8>,
    pub mode: DeliveryMode,
    pub ip_ttl: u8,
    pub sender: NodeId,
    route: Arc<Route>,
    position: usize,
}

impl Packet {
    pub fn route(&self) -> &Route {
        &self.route
    }

    pub fn destination(&self) -> NodeId {
        self.route.destination()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalKind {
    /// The packet reached the node it was addressed to.
    Destination,
    /// An on-path GIST node picked the packet up before its destination.
    Intercepted,
}

#[derive(Debug, Clone)]
pub struct Arrival {
    pub node: NodeId,
    pub kind: ArrivalKind,
    pub packet: Packet,
}

#[derive(Debug, Clone)]
pub struct Scheduled {
    pub time: SimTime,
    pub arrival: Arrival,
}

/// Transmission state of one simulation run: loss model and traffic counters.
#[derive(Debug, Clone)]
pub struct Network {
    underlay: Arc<Underlay>,
    loss_probability: f64,
    loss_rng: ChaCha8Rng,
    transmissions: u64,
    traversals: u64,
    link_usage: Vec<u64>,
    lost: u64,
}

impl Network {
    pub fn new(underlay: Arc<Underlay>) -> Self {
        let links = underlay.topology().links().len();
        Network {
            underlay,
            loss_probability: 0.0,
            loss_rng: ChaCha8Rng::seed_from_u64(0),
            transmissions: 0,
            traversals: 0,
            link_usage: vec![0; links],
            lost: 0,
        }
    }

    /// Bernoulli loss per transmitted leg.
    pub fn with_loss(mut self, probability: f64, seed: u64) -> Self {
        self.loss_probability = probability.clamp(0.0, 1.0);
        self.loss_rng = ChaCha8Rng::seed_from_u64(seed);
        self
    }

    pub fn underlay(&self) -> &Arc<Underlay> {
        &self.underlay
    }

    /// Packets handed to the network, counting every forwarded leg.
    pub fn transmissions(&self) -> u64 {
        self.transmissions
    }

    pub fn traversals(&self) -> u64 {
        self.traversals
    }

    pub fn link_usage(&self) -> &[u64] {
        &self.link_usage
    }

    pub fn distinct_links_used(&self) -> usize {
        self.link_usage.iter().filter(|&&u| u > 0).count()
    }

    pub fn lost(&self) -> u64 {
        self.lost
    }

    /// Encodes `msg` with the header flags of `mode` and schedules its first
    /// stop. `None` means the packet was lost or expired on the way.
    pub fn send(
        &mut self,
        now: SimTime,
        from: NodeId,
        to: Address,
        mode: DeliveryMode,
        msg: &Message,
        ip_ttl: u8,
    ) -> Result<Option<Scheduled>, NetError> {
        let dest = self
            .underlay
            .topology()
            .node_at(to)
            .ok_or(NetError::Unroutable(to))?;
        if dest == from {
            return Err(NetError::SelfAddressed(from));
        }
        let route = self.underlay.shared_route(from, dest)?;
        let mut msg = msg.clone();
        msg.header.flags = HeaderFlags((msg.header.flags.0 & !0b11) | mode.flags().0);
        let bytes = wire::encode(&msg)?;
        let packet = Packet {
            bytes,
            mode,
            ip_ttl,
            sender: from,
            route,
            position: 0,
        };
        Ok(self.advance(now, packet))
    }

    /// Continues an intercepted full-path packet towards its destination
    /// after the GIST hop count is decremented. A count that reaches zero
    /// drops the message silently.
    pub fn forward(
        &mut self,
        now: SimTime,
        arrival: Arrival,
        msg: &Message,
    ) -> Result<Option<Scheduled>, NetError> {
        if arrival.kind != ArrivalKind::Intercepted
            || arrival.packet.mode != DeliveryMode::QModeFullPath
        {
            return Err(NetError::NotForwardable);
        }
        if msg.header.gist_hop_count <= 1 {
            return Ok(None);
        }
        let mut msg = msg.clone();
        msg.header.gist_hop_count -= 1;
        let mut packet = arrival.packet;
        packet.bytes = wire::encode(&msg)?;
        Ok(self.advance(now, packet))
    }

    fn advance(&mut self, now: SimTime, mut packet: Packet) -> Option<Scheduled> {
        self.transmissions += 1;
        if self.loss_probability > 0.0 && self.loss_rng.gen_bool(self.loss_probability) {
            self.lost += 1;
            return None;
        }
        let route = Arc::clone(&packet.route);
        let topo = self.underlay.topology();
        let from = packet.position;
        let last = route.nodes.len() - 1;
        let stop = match packet.mode {
            DeliveryMode::DMode => last,
            DeliveryMode::QModeIntercept | DeliveryMode::QModeFullPath => (from + 1..=last)
                .find(|&i| topo.is_gist(route.nodes[i]))
                .unwrap_or(last),
        };
        let hops = stop - from;
        let ttl = usize::from(packet.ip_ttl);
        let travelled = hops.min(ttl);
        for &link in &route.links[from..from + travelled] {
            self.link_usage[link] += 1;
        }
        self.traversals += travelled as u64;
        if ttl < hops {
            self.lost += 1;
            return None;
        }
        packet.ip_ttl -= hops as u8;
        packet.position = stop;
        let time = now + route.cumulative_latency[stop] - route.cumulative_latency[from];
        Some(Scheduled {
            time,
            arrival: Arrival {
                node: route.nodes[stop],
                kind: if stop == last {
                    ArrivalKind::Destination
                } else {
                    ArrivalKind::Intercepted
                },
                packet,
            },
        })
    }
}

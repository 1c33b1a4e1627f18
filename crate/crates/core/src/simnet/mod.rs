//! Deterministic discrete-event network simulator: topology, min-hop
//! routing, encapsulation semantics and traffic accounting.

mod network;
mod queue;
mod routing;
mod topology;

use std::sync::Arc;

pub use network::{Arrival, ArrivalKind, DeliveryMode, NetError, Network, Packet, Scheduled};
pub use queue::EventQueue;
pub use routing::{link_ranks, Route, RouteError, RouteTable};
pub use topology::{
    Link, NodeKind, TopoNode, Topology, TopologyError, DEFAULT_LINK_LATENCY_MS,
    NSFNET_DEFAULT_GIST, NSFNET_LINKS,
};

use crate::model::{MetricKind, NodeId};

/// A topology together with its precomputed routes. Immutable, shared by
/// every simulation that runs on it.
#[derive(Debug)]
pub struct Underlay {
    topology: Topology,
    routes: Vec<Option<Arc<Route>>>,
}

impl Underlay {
    pub fn new(topology: Topology) -> Arc<Underlay> {
        let table = RouteTable::compute(&topology);
        let n = topology.len();
        let mut routes = Vec::with_capacity(n * n);
        for x in 0..n as u32 {
            for y in 0..n as u32 {
                routes.push(
                    table
                        .route(&topology, NodeId(x), NodeId(y))
                        .ok()
                        .map(Arc::new),
                );
            }
        }
        Arc::new(Underlay { topology, routes })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    fn check(&self, x: NodeId, y: NodeId) -> Result<(), RouteError> {
        for id in [x, y] {
            if !self.topology.contains(id) {
                return Err(RouteError::UnknownNode(id));
            }
        }
        Ok(())
    }

    pub(crate) fn shared_route(&self, x: NodeId, y: NodeId) -> Result<Arc<Route>, RouteError> {
        self.check(x, y)?;
        if x == y {
            return Err(RouteError::SameEndpoints(x));
        }
        self.routes[x.index() * self.topology.len() + y.index()]
            .clone()
            .ok_or(RouteError::Unreachable(x, y))
    }

    pub fn route(&self, x: NodeId, y: NodeId) -> Result<&Route, RouteError> {
        self.check(x, y)?;
        if x == y {
            return Err(RouteError::SameEndpoints(x));
        }
        self.routes[x.index() * self.topology.len() + y.index()]
            .as_deref()
            .ok_or(RouteError::Unreachable(x, y))
    }

    /// GIST-capable nodes on the route from `x` to `y`, excluding `x`, in
    /// route order. Empty when `x == y`.
    pub fn gist_path(&self, x: NodeId, y: NodeId) -> Result<Vec<NodeId>, RouteError> {
        self.check(x, y)?;
        if x == y {
            return Ok(Vec::new());
        }
        Ok(self
            .route(x, y)?
            .nodes
            .iter()
            .skip(1)
            .copied()
            .filter(|&n| self.topology.is_gist(n))
            .collect())
    }

    pub fn gist_distance(&self, x: NodeId, y: NodeId) -> Result<u32, RouteError> {
        Ok(self.gist_path(x, y)?.len() as u32)
    }

    pub fn ip_hops(&self, x: NodeId, y: NodeId) -> Result<u32, RouteError> {
        self.check(x, y)?;
        if x == y {
            return Ok(0);
        }
        Ok(self.route(x, y)?.ip_hops)
    }

    pub fn latency_ms(&self, x: NodeId, y: NodeId) -> Result<f64, RouteError> {
        self.check(x, y)?;
        if x == y {
            return Ok(0.0);
        }
        Ok(self.route(x, y)?.latency_ms)
    }

    pub fn distance(&self, x: NodeId, y: NodeId, metric: MetricKind) -> Result<f64, RouteError> {
        match metric {
            MetricKind::GistHops => self.gist_distance(x, y).map(f64::from),
            MetricKind::IpHops => self.ip_hops(x, y).map(f64::from),
            MetricKind::Latency => self.latency_ms(x, y),
        }
    }

    /// Mean GIST distance from `x` to every other GIST node.
    pub fn mean_gist_distance(&self, x: NodeId) -> f64 {
        let others: Vec<NodeId> = self
            .topology
            .gist_nodes()
            .into_iter()
            .filter(|&g| g != x)
            .collect();
        if others.is_empty() {
            return 0.0;
        }
        let total: u32 = others
            .iter()
            .map(|&g| self.gist_distance(x, g).expect("connected topology"))
            .sum();
        f64::from(total) / others.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Address, NslpId, PeerIdentity, SessionId};
    use crate::wire::{
        self, CommonHeader, HeaderFlags, Message, MessageType, MriObject, NliObject,
    };

    fn line5() -> Arc<Underlay> {
        Underlay::new(Topology::line(5, &[0, 2, 4], 10.0))
    }

    fn rumor(hops: u8) -> Message {
        Message {
            header: CommonHeader {
                msg_type: MessageType::Rumor,
                nslpid: NslpId::NULL,
                gist_hop_count: hops,
                flags: HeaderFlags::default(),
            },
            mri: MriObject::path_coupled(
                Address::for_node(NodeId(0)),
                Address::for_node(NodeId(4)),
            ),
            sid: SessionId([7; 16]),
            nli: NliObject {
                identity: PeerIdentity::for_node(NodeId(0)),
                address: Address::for_node(NodeId(0)),
                ip_ttl: 64,
                validity_time_ms: 1000,
            },
            supported_nslps: Some(Default::default()),
            node_list: None,
            origin_send_time_ms: Some(0),
            path_stamp: None,
            payload: None,
        }
    }

    #[test]
    fn gist_paths_on_chain() {
        let u = line5();
        assert_eq!(
            u.gist_path(NodeId(0), NodeId(4)).unwrap(),
            vec![NodeId(2), NodeId(4)]
        );
        assert_eq!(u.gist_path(NodeId(0), NodeId(2)).unwrap(), vec![NodeId(2)]);
        assert!(u.gist_path(NodeId(0), NodeId(1)).unwrap().is_empty());
        assert_eq!(u.gist_distance(NodeId(0), NodeId(2)).unwrap(), 1);
        assert_eq!(u.gist_distance(NodeId(0), NodeId(4)).unwrap(), 2);
        assert_eq!(u.gist_distance(NodeId(3), NodeId(3)).unwrap(), 0);
    }

    #[test]
    fn q_mode_stops_at_first_interceptor() {
        let u = line5();
        let mut net = Network::new(u.clone());
        let s = net
            .send(
                0.0,
                NodeId(0),
                u.topology().address(NodeId(4)),
                DeliveryMode::QModeIntercept,
                &rumor(64),
                64,
            )
            .unwrap()
            .unwrap();
        assert_eq!(s.arrival.node, NodeId(2));
        assert_eq!(s.arrival.kind, ArrivalKind::Intercepted);
        assert_eq!(s.time, 20.0);
        assert_eq!(s.arrival.packet.ip_ttl, 62);
        assert_eq!(net.traversals(), 2);
        let decoded = wire::decode(&s.arrival.packet.bytes).unwrap();
        assert_eq!(
            DeliveryMode::from_flags(decoded.header.flags),
            DeliveryMode::QModeIntercept
        );
    }

    #[test]
    fn full_path_visits_every_gist_node() {
        let u = line5();
        let mut net = Network::new(u.clone());
        let first = net
            .send(
                0.0,
                NodeId(0),
                u.topology().address(NodeId(4)),
                DeliveryMode::QModeFullPath,
                &rumor(64),
                64,
            )
            .unwrap()
            .unwrap();
        assert_eq!(first.arrival.node, NodeId(2));
        let msg = wire::decode(&first.arrival.packet.bytes).unwrap();
        let second = net
            .forward(first.time, first.arrival, &msg)
            .unwrap()
            .unwrap();
        assert_eq!(second.arrival.node, NodeId(4));
        assert_eq!(second.arrival.kind, ArrivalKind::Destination);
        assert_eq!(second.time, 40.0);
        assert_eq!(net.traversals(), 4);
        assert_eq!(
            wire::decode(&second.arrival.packet.bytes)
                .unwrap()
                .header
                .gist_hop_count,
            63
        );
    }

    #[test]
    fn hop_count_exhaustion_drops_silently() {
        let u = line5();
        let mut net = Network::new(u.clone());
        let first = net
            .send(
                0.0,
                NodeId(0),
                u.topology().address(NodeId(4)),
                DeliveryMode::QModeFullPath,
                &rumor(1),
                64,
            )
            .unwrap()
            .unwrap();
        let msg = wire::decode(&first.arrival.packet.bytes).unwrap();
        assert!(net
            .forward(first.time, first.arrival, &msg)
            .unwrap()
            .is_none());
        assert_eq!(net.traversals(), 2);
    }

    #[test]
    fn d_mode_goes_straight_through() {
        let u = line5();
        let mut net = Network::new(u.clone());
        let s = net
            .send(
                0.0,
                NodeId(0),
                u.topology().address(NodeId(4)),
                DeliveryMode::DMode,
                &rumor(64),
                64,
            )
            .unwrap()
            .unwrap();
        assert_eq!(s.arrival.node, NodeId(4));
        assert_eq!(s.time, 40.0);
        assert_eq!(net.traversals(), 4);
        assert_eq!(net.distinct_links_used(), 4);
    }

    #[test]
    fn ip_ttl_bounds_travel() {
        let u = line5();
        let mut net = Network::new(u.clone());
        let s = net
            .send(
                0.0,
                NodeId(0),
                u.topology().address(NodeId(4)),
                DeliveryMode::DMode,
                &rumor(64),
                3,
            )
            .unwrap();
        assert!(s.is_none());
        assert_eq!(net.traversals(), 3);
    }

    #[test]
    fn send_errors() {
        let u = line5();
        let mut net = Network::new(u.clone());
        let bogus = Address("192.0.2.1".parse().unwrap());
        assert_eq!(
            net.send(0.0, NodeId(0), bogus, DeliveryMode::DMode, &rumor(64), 64)
                .unwrap_err(),
            NetError::Unroutable(bogus)
        );
        assert_eq!(
            net.send(
                0.0,
                NodeId(0),
                u.topology().address(NodeId(0)),
                DeliveryMode::DMode,
                &rumor(64),
                64
            )
            .unwrap_err(),
            NetError::SelfAddressed(NodeId(0))
        );
    }

    #[test]
    fn total_loss_drops_everything() {
        let u = line5();
        let mut net = Network::new(u.clone()).with_loss(1.0, 3);
        let s = net
            .send(
                0.0,
                NodeId(0),
                u.topology().address(NodeId(4)),
                DeliveryMode::DMode,
                &rumor(64),
                64,
            )
            .unwrap();
        assert!(s.is_none());
        assert_eq!(net.lost(), 1);
    }
}

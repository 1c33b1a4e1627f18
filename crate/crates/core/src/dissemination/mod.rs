//! Scoped epidemic signaling: bubble, balloon and hose areas delivered with
//! plain unicast, path-aware GIST unicast or overlay flooding.

mod sets;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::model::{Address, MetricKind, NodeId, NslpId, PeerIdentity, SessionId, SimTime};
use crate::simnet::{
    Arrival, ArrivalKind, DeliveryMode, EventQueue, NetError, Network, RouteError, Underlay,
};
use crate::wire::{
    self, CommonHeader, EpidemicScope, EpidemicType, HeaderFlags, Message, MessageType, MriObject,
    NliObject,
};

pub use sets::{d_set, s_set, select_destinations, Knowledge, OracleKnowledge, ViewKnowledge};

const HOP_LIMIT: u8 = 64;
const IP_TTL: u8 = 64;
const VALIDITY_MS: u32 = 30_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DisseminationError {
    #[error("{strategy} is not defined for the {metric} metric")]
    Unsupported {
        strategy: &'static str,
        metric: MetricKind,
    },
    #[error("radius must be positive")]
    ZeroRadius,
    #[error("{0} requests need a target")]
    MissingTarget(EpidemicType),
    #[error("bubble requests take no target")]
    UnexpectedTarget,
    #[error("node {0} is not a GIST node")]
    NotGist(NodeId),
    #[error("node {node} knows nothing usable about {peer}")]
    MissingKnowledge { node: NodeId, peer: NodeId },
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strategy {
    /// One datagram to every node in the area.
    SimpleUnicast,
    /// Full-path queries to the covering destinations only; every on-path
    /// GIST node delivers and forwards.
    GistUnicast,
    /// Neighbour-to-neighbour flooding among adjacent GIST nodes.
    OverlayBroadcast,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [
        Strategy::SimpleUnicast,
        Strategy::GistUnicast,
        Strategy::OverlayBroadcast,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::SimpleUnicast => "simple-unicast",
            Strategy::GistUnicast => "gist-unicast",
            Strategy::OverlayBroadcast => "overlay-broadcast",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| format!("unknown strategy `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisseminationRequest {
    pub source: NodeId,
    pub target: Option<NodeId>,
    pub epidemic_type: EpidemicType,
    pub metric: MetricKind,
    pub radius: u32,
    pub strategy: Strategy,
    pub payload: Vec<u8>,
    pub nslpid: NslpId,
}

impl DisseminationRequest {
    pub fn bubble(source: NodeId, metric: MetricKind, radius: u32, strategy: Strategy) -> Self {
        DisseminationRequest {
            source,
            target: None,
            epidemic_type: EpidemicType::Bubble,
            metric,
            radius,
            strategy,
            payload: Vec::new(),
            nslpid: NslpId(1),
        }
    }

    pub fn towards(mut self, epidemic_type: EpidemicType, target: NodeId) -> Self {
        self.epidemic_type = epidemic_type;
        self.target = Some(target);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DisseminationReport {
    /// Nodes whose NSLP received the payload.
    pub delivered: BTreeSet<NodeId>,
    /// Transmissions originated by a node, not counting on-path forwarding.
    pub messages_sent: u64,
    pub link_traversals: u64,
    /// Traversals per link index, used links only.
    pub link_usage: BTreeMap<usize, u64>,
}

impl DisseminationReport {
    pub fn distinct_links(&self) -> usize {
        self.link_usage.len()
    }
}

/// Runs one dissemination to completion on a fresh network.
pub fn disseminate(
    underlay: &Arc<Underlay>,
    knowledge: &dyn Knowledge,
    req: &DisseminationRequest,
) -> Result<DisseminationReport, DisseminationError> {
    let topo = underlay.topology();
    for id in std::iter::once(req.source).chain(req.target) {
        if !topo.contains(id) {
            return Err(RouteError::UnknownNode(id).into());
        }
        if !topo.is_gist(id) {
            return Err(DisseminationError::NotGist(id));
        }
    }
    if req.radius == 0 {
        return Err(DisseminationError::ZeroRadius);
    }
    match (req.epidemic_type, req.target) {
        (EpidemicType::Bubble, Some(_)) => return Err(DisseminationError::UnexpectedTarget),
        (t @ (EpidemicType::Balloon | EpidemicType::Hose), None) => {
            return Err(DisseminationError::MissingTarget(t))
        }
        _ => {}
    }
    if req.strategy == Strategy::GistUnicast && req.metric != MetricKind::GistHops {
        return Err(DisseminationError::Unsupported {
            strategy: Strategy::GistUnicast.as_str(),
            metric: req.metric,
        });
    }

    let mut run = Run {
        k: knowledge,
        underlay: Arc::clone(underlay),
        net: Network::new(Arc::clone(underlay)),
        queue: EventQueue::new(),
        req,
        session: session_for(req),
        delivered: BTreeSet::new(),
        flooded: BTreeSet::new(),
        centers: BTreeSet::new(),
        messages: 0,
    };
    run.start()?;
    while let Some((now, arrival)) = run.queue.step() {
        run.on_arrival(now, arrival)?;
    }
    let link_usage = run
        .net
        .link_usage()
        .iter()
        .enumerate()
        .filter(|(_, &u)| u > 0)
        .map(|(i, &u)| (i, u))
        .collect();
    Ok(DisseminationReport {
        delivered: run.delivered,
        messages_sent: run.messages,
        link_traversals: run.net.traversals(),
        link_usage,
    })
}

fn session_for(req: &DisseminationRequest) -> SessionId {
    let mut b = [0u8; 16];
    b[..4].copy_from_slice(&req.source.0.to_be_bytes());
    b[4..8].copy_from_slice(&req.target.map_or(u32::MAX, |t| t.0).to_be_bytes());
    b[8..12].copy_from_slice(&req.radius.to_be_bytes());
    b[12] = req.epidemic_type.code();
    b[13] = req.metric.code();
    SessionId(b)
}

struct Run<'a> {
    k: &'a dyn Knowledge,
    underlay: Arc<Underlay>,
    net: Network,
    queue: EventQueue<Arrival>,
    req: &'a DisseminationRequest,
    session: SessionId,
    delivered: BTreeSet<NodeId>,
    /// (node, bubble center) pairs that already flooded.
    flooded: BTreeSet<(NodeId, NodeId)>,
    /// Nodes that already started their own bubble.
    centers: BTreeSet<NodeId>,
    messages: u64,
}

impl Run<'_> {
    fn address(&self, id: NodeId) -> Address {
        self.underlay.topology().address(id)
    }

    fn message(
        &self,
        sender: NodeId,
        center: NodeId,
        destination: Address,
        epidemic_type: EpidemicType,
    ) -> Message {
        let scope = EpidemicScope {
            epidemic_type,
            metric: self.req.metric,
            radius: self.req.radius,
        };
        Message {
            header: CommonHeader {
                msg_type: MessageType::EpidemicSignaling,
                nslpid: self.req.nslpid,
                gist_hop_count: HOP_LIMIT,
                flags: HeaderFlags::default(),
            },
            mri: MriObject::epidemic(self.address(center), destination, scope),
            sid: self.session,
            nli: NliObject {
                identity: PeerIdentity::for_node(sender),
                address: self.address(sender),
                ip_ttl: IP_TTL,
                validity_time_ms: VALIDITY_MS,
            },
            supported_nslps: None,
            node_list: None,
            origin_send_time_ms: None,
            path_stamp: None,
            payload: Some(self.req.payload.clone()),
        }
    }

    fn send(
        &mut self,
        now: SimTime,
        from: NodeId,
        to: NodeId,
        mode: DeliveryMode,
        msg: &Message,
    ) -> Result<(), DisseminationError> {
        let to = self.address(to);
        if let Some(s) = self.net.send(now, from, to, mode, msg, IP_TTL)? {
            self.queue.schedule(s.time, s.arrival);
        }
        self.messages += 1;
        Ok(())
    }

    fn start(&mut self) -> Result<(), DisseminationError> {
        let x = self.req.source;
        match (self.req.epidemic_type, self.req.target) {
            (EpidemicType::Bubble, _) => self.bubble(0.0, x),
            (EpidemicType::Balloon, Some(y)) if y == x => {
                self.delivered.insert(x);
                self.bubble(0.0, x)
            }
            (EpidemicType::Hose, Some(y)) => {
                self.delivered.insert(x);
                self.bubble(0.0, x)?;
                if y != x {
                    self.carrier(x, y)?;
                }
                Ok(())
            }
            (EpidemicType::Balloon, Some(y)) => self.carrier(x, y),
            (t, None) => Err(DisseminationError::MissingTarget(t)),
        }
    }

    fn carrier(&mut self, x: NodeId, y: NodeId) -> Result<(), DisseminationError> {
        let msg = self.message(x, x, self.address(y), self.req.epidemic_type);
        self.send(0.0, x, y, DeliveryMode::QModeFullPath, &msg)
    }

    /// Starts a bubble centred on `center`, at most once per node.
    fn bubble(&mut self, now: SimTime, center: NodeId) -> Result<(), DisseminationError> {
        if !self.centers.insert(center) {
            return Ok(());
        }
        let (r, metric) = (self.req.radius, self.req.metric);
        let msg = self.message(center, center, Address::UNSPECIFIED, EpidemicType::Bubble);
        match self.req.strategy {
            Strategy::SimpleUnicast => {
                for y in s_set(self.k, center, r, metric)? {
                    self.send(now, center, y, DeliveryMode::DMode, &msg)?;
                }
            }
            Strategy::GistUnicast => {
                for y in select_destinations(self.k, center, r, metric)? {
                    self.send(now, center, y, DeliveryMode::QModeFullPath, &msg)?;
                }
            }
            Strategy::OverlayBroadcast => {
                self.flooded.insert((center, center));
                self.flood(now, center, center, None)?;
            }
        }
        Ok(())
    }

    /// Sends to every adjacent GIST node except the one it came from and the
    /// bubble's center.
    fn flood(
        &mut self,
        now: SimTime,
        node: NodeId,
        center: NodeId,
        parent: Option<NodeId>,
    ) -> Result<(), DisseminationError> {
        let msg = self.message(node, center, Address::UNSPECIFIED, EpidemicType::Bubble);
        for z in d_set(self.k, node, 1, MetricKind::GistHops)? {
            if Some(z) != parent && z != center {
                self.send(now, node, z, DeliveryMode::DMode, &msg)?;
            }
        }
        Ok(())
    }

    fn on_arrival(&mut self, now: SimTime, arrival: Arrival) -> Result<(), DisseminationError> {
        let Ok(msg) = wire::decode(&arrival.packet.bytes) else {
            return Ok(());
        };
        let Some(scope) = msg.mri.epidemic else {
            return Ok(());
        };
        let topo = self.underlay.topology();
        let (Some(center), node) = (topo.node_at(msg.mri.source), arrival.node) else {
            return Ok(());
        };
        if !topo.is_gist(node) {
            return Ok(());
        }
        let intercepted = arrival.kind == ArrivalKind::Intercepted;
        match scope.epidemic_type {
            EpidemicType::Bubble => match self.req.strategy {
                Strategy::SimpleUnicast => {
                    self.delivered.insert(node);
                }
                Strategy::GistUnicast => {
                    self.delivered.insert(node);
                    if intercepted {
                        self.forward(now, arrival, &msg)?;
                    }
                }
                Strategy::OverlayBroadcast => {
                    let in_scope =
                        self.k.distance(node, center, scope.metric)? <= f64::from(scope.radius);
                    if in_scope && self.flooded.insert((node, center)) {
                        self.delivered.insert(node);
                        let parent = arrival.packet.sender;
                        self.flood(now, node, center, Some(parent))?;
                    }
                }
            },
            EpidemicType::Balloon => {
                if intercepted {
                    self.forward(now, arrival, &msg)?;
                } else {
                    self.delivered.insert(node);
                    self.bubble(now, node)?;
                }
            }
            EpidemicType::Hose => {
                self.delivered.insert(node);
                self.bubble(now, node)?;
                if intercepted {
                    self.forward(now, arrival, &msg)?;
                }
            }
        }
        Ok(())
    }

    fn forward(
        &mut self,
        now: SimTime,
        arrival: Arrival,
        msg: &Message,
    ) -> Result<(), DisseminationError> {
        if let Some(s) = self.net.forward(now, arrival, msg)? {
            self.queue.schedule(s.time, s.arrival);
        }
        Ok(())
    }
}

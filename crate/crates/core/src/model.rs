//! Domain types shared by every layer, plus the pure view operations used by
//! the gossip loop (merge, peer selection, shuffling and truncation).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::net::Ipv4Addr;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

/// Simulation time in milliseconds.
pub type SimTime = f64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("view is empty, the node has to contact its tracker again")]
    EmptyView,
}

/// Simulator-scoped node label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address(pub Ipv4Addr);

impl Address {
    pub const UNSPECIFIED: Address = Address(Ipv4Addr::UNSPECIFIED);

    /// Default address of a simulated node: `10.0.0.<id+1>` (spilling into
    /// the upper octets for ids beyond 254).
    pub fn for_node(id: NodeId) -> Address {
        let n = id.0 + 1;
        Address(Ipv4Addr::new(10, (n >> 16) as u8, (n >> 8) as u8, n as u8))
    }

    pub fn octets(self) -> [u8; 4] {
        self.0.octets()
    }

    pub fn from_octets(o: [u8; 4]) -> Address {
        Address(Ipv4Addr::from(o))
    }

    pub fn is_unspecified(self) -> bool {
        self.0.is_unspecified()
    }

    /// True when both addresses agree on the first `prefix_len` bits.
    pub fn shares_prefix(self, other: Address, prefix_len: u8) -> bool {
        if prefix_len == 0 {
            return true;
        }
        let len = u32::from(prefix_len.min(32));
        let mask = u32::MAX << (32 - len);
        (u32::from(self.0) & mask) == (u32::from(other.0) & mask)
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<Ipv4Addr> for Address {
    fn from(ip: Ipv4Addr) -> Self {
        Address(ip)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PeerIdentity(pub [u8; 16]);

impl PeerIdentity {
    const TAG: &'static [u8; 12] = b"gist-peer-id";

    /// Stable identity of a simulated node.
    pub fn for_node(id: NodeId) -> PeerIdentity {
        let mut bytes = [0u8; 16];
        bytes[..12].copy_from_slice(Self::TAG);
        bytes[12..].copy_from_slice(&id.0.to_be_bytes());
        PeerIdentity(bytes)
    }
}

/// 128-bit session identifier relating a Rumor to its Response and Ack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SessionId(pub [u8; 16]);

impl SessionId {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> SessionId {
        let mut bytes = [0u8; 16];
        rng.fill(&mut bytes);
        SessionId(bytes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NslpId(pub u16);

impl NslpId {
    /// Reserved value carried by discovery messages.
    pub const NULL: NslpId = NslpId(0);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MetricKind {
    GistHops,
    IpHops,
    Latency,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [
        MetricKind::GistHops,
        MetricKind::IpHops,
        MetricKind::Latency,
    ];

    pub fn code(self) -> u8 {
        match self {
            MetricKind::GistHops => 0,
            MetricKind::IpHops => 1,
            MetricKind::Latency => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<MetricKind> {
        match code {
            0 => Some(MetricKind::GistHops),
            1 => Some(MetricKind::IpHops),
            2 => Some(MetricKind::Latency),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::GistHops => "gist-hops",
            MetricKind::IpHops => "ip-hops",
            MetricKind::Latency => "latency",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricKind::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown metric `{s}`"))
    }
}

/// What a node knows about one peer. Metrics are relative to the owner of
/// the view holding the descriptor and stay `None` unless measured.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeDescriptor {
    pub identity: PeerIdentity,
    pub address: Address,
    pub supported_nslps: BTreeSet<NslpId>,
    pub gist_hops: Option<u32>,
    pub ip_hops: Option<u32>,
    pub latency_ms: Option<f32>,
    /// GIST nodes on the IP path from the owner to this peer, excluding the
    /// owner and ending with the peer.
    pub path_vector: Option<Vec<Address>>,
    pub learned_at: SimTime,
}

impl NodeDescriptor {
    pub fn new(identity: PeerIdentity, address: Address) -> Self {
        NodeDescriptor {
            identity,
            address,
            supported_nslps: BTreeSet::new(),
            gist_hops: None,
            ip_hops: None,
            latency_ms: None,
            path_vector: None,
            learned_at: 0.0,
        }
    }

    pub fn learned_at(mut self, t: SimTime) -> Self {
        self.learned_at = t;
        self
    }

    /// Copy carrying only identity, address and NSLPs. Metrics are relative
    /// to a vantage point and must not travel to another node as if they were
    /// the receiver's own.
    pub fn without_metrics(&self) -> NodeDescriptor {
        NodeDescriptor {
            identity: self.identity,
            address: self.address,
            supported_nslps: self.supported_nslps.clone(),
            gist_hops: None,
            ip_hops: None,
            latency_ms: None,
            path_vector: None,
            learned_at: self.learned_at,
        }
    }

    pub fn metric(&self, kind: MetricKind) -> Option<f64> {
        match kind {
            MetricKind::GistHops => self.gist_hops.map(f64::from),
            MetricKind::IpHops => self.ip_hops.map(f64::from),
            MetricKind::Latency => self.latency_ms.map(f64::from),
        }
    }

    pub fn has_all_metrics(&self) -> bool {
        self.gist_hops.is_some()
            && self.ip_hops.is_some()
            && self.latency_ms.is_some()
            && self.path_vector.is_some()
    }

    /// Path vector must match `gist_hops` in length and end at the peer.
    pub fn is_consistent(&self) -> bool {
        match &self.path_vector {
            None => true,
            Some(path) => {
                self.gist_hops == Some(path.len() as u32) && path.last() == Some(&self.address)
            }
        }
    }
}

/// Field-wise reconciliation of two descriptors for the same identity: the
/// later `learned_at` wins (the incoming one on ties), but a present metric
/// is never replaced by an absent one.
pub fn merge_descriptor(existing: &NodeDescriptor, incoming: &NodeDescriptor) -> NodeDescriptor {
    let (newer, older) = if incoming.learned_at >= existing.learned_at {
        (incoming, existing)
    } else {
        (existing, incoming)
    };
    // gist_hops and path_vector travel as a unit so the pair stays consistent.
    let (gist_hops, path_vector) = if newer.gist_hops.is_some() {
        (newer.gist_hops, newer.path_vector.clone())
    } else {
        (older.gist_hops, older.path_vector.clone())
    };
    NodeDescriptor {
        identity: newer.identity,
        address: newer.address,
        supported_nslps: if newer.supported_nslps.is_empty() {
            older.supported_nslps.clone()
        } else {
            newer.supported_nslps.clone()
        },
        gist_hops,
        ip_hops: newer.ip_hops.or(older.ip_hops),
        latency_ms: newer.latency_ms.or(older.latency_ms),
        path_vector,
        learned_at: newer.learned_at,
    }
}

/// A node's set of known peers, at most one descriptor per identity.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    owner: PeerIdentity,
    entries: BTreeMap<PeerIdentity, NodeDescriptor>,
    capacity: Option<usize>,
}

impl View {
    pub fn new(owner: PeerIdentity) -> Self {
        View {
            owner,
            entries: BTreeMap::new(),
            capacity: None,
        }
    }

    pub fn with_capacity(owner: PeerIdentity, capacity: Option<usize>) -> Self {
        View {
            owner,
            entries: BTreeMap::new(),
            capacity: capacity.map(|c| c.max(1)),
        }
    }

    pub fn owner(&self) -> PeerIdentity {
        self.owner
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, identity: &PeerIdentity) -> bool {
        self.entries.contains_key(identity)
    }

    pub fn get(&self, identity: &PeerIdentity) -> Option<&NodeDescriptor> {
        self.entries.get(identity)
    }

    pub fn find_by_address(&self, address: Address) -> Option<&NodeDescriptor> {
        self.entries.values().find(|d| d.address == address)
    }

    pub fn entries(&self) -> impl ExactSizeIterator<Item = &NodeDescriptor> {
        self.entries.values()
    }

    pub fn identities(&self) -> impl Iterator<Item = &PeerIdentity> {
        self.entries.keys()
    }

    /// Pure merge: returns the view extended with `incoming`.
    pub fn merge<I>(&self, incoming: I) -> View
    where
        I: IntoIterator<Item = NodeDescriptor>,
    {
        let mut out = self.clone();
        out.absorb(incoming);
        out
    }

    /// In-place merge. Returns true when the identity set changed, which is
    /// what the idle detector treats as a view change.
    pub fn absorb<I>(&mut self, incoming: I) -> bool
    where
        I: IntoIterator<Item = NodeDescriptor>,
    {
        let mut inserted = Vec::new();
        for desc in incoming {
            if desc.identity == self.owner {
                continue;
            }
            match self.entries.get_mut(&desc.identity) {
                Some(existing) => *existing = merge_descriptor(existing, &desc),
                None => {
                    inserted.push(desc.identity);
                    self.entries.insert(desc.identity, desc);
                }
            }
        }
        let evicted = self.enforce_capacity();
        inserted.iter().any(|id| self.entries.contains_key(id))
            || evicted.iter().any(|id| !inserted.contains(id))
    }

    fn enforce_capacity(&mut self) -> Vec<PeerIdentity> {
        let Some(cap) = self.capacity else {
            return Vec::new();
        };
        let mut evicted = Vec::new();
        while self.entries.len() > cap {
            let victim = self
                .entries
                .values()
                .max_by(|a, b| {
                    distance_key(a)
                        .partial_cmp(&distance_key(b))
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(a.identity.cmp(&b.identity))
                })
                .map(|d| d.identity)
                .expect("non-empty view");
            self.entries.remove(&victim);
            evicted.push(victim);
        }
        evicted
    }

    /// Outgoing gossip buffer: the view's entries followed by the owner's own
    /// descriptor.
    pub fn with_own(&self, own: &NodeDescriptor) -> Vec<NodeDescriptor> {
        let mut buf: Vec<NodeDescriptor> = self.entries.values().cloned().collect();
        buf.push(own.clone());
        buf
    }

    pub fn remove(&mut self, identity: &PeerIdentity) -> Option<NodeDescriptor> {
        self.entries.remove(identity)
    }
}

fn distance_key(d: &NodeDescriptor) -> (f64, f64, f64) {
    (
        d.gist_hops.map_or(f64::INFINITY, f64::from),
        d.ip_hops.map_or(f64::INFINITY, f64::from),
        d.latency_ms.map_or(f64::INFINITY, f64::from),
    )
}

/// Uniform pick among the view's entries.
pub fn select_peer<'a, R: Rng + ?Sized>(
    view: &'a View,
    rng: &mut R,
) -> Result<&'a NodeDescriptor, ModelError> {
    if view.is_empty() {
        return Err(ModelError::EmptyView);
    }
    let idx = rng.gen_range(0..view.len());
    Ok(view.entries().nth(idx).expect("index within bounds"))
}

/// Shuffles `buffer`, moving every entry whose identity is `excluded` to the
/// end so the head of the list never tells a peer about itself.
pub fn randomize<R: Rng + ?Sized>(
    excluded: &PeerIdentity,
    buffer: Vec<NodeDescriptor>,
    rng: &mut R,
) -> Vec<NodeDescriptor> {
    let (mut keep, tail): (Vec<_>, Vec<_>) =
        buffer.into_iter().partition(|d| &d.identity != excluded);
    keep.shuffle(rng);
    keep.extend(tail);
    keep
}

pub fn truncate(mut buffer: Vec<NodeDescriptor>, m: usize) -> Vec<NodeDescriptor> {
    buffer.truncate(m.max(1));
    buffer
}

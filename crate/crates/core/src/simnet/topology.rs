use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{Address, NodeId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("node ids must be dense and ordered: expected {expected}, found {found}")]
    NonDenseIds { expected: u32, found: u32 },
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("parallel link between {0} and {1}")]
    ParallelLink(NodeId, NodeId),
    #[error("link references unknown node {0}")]
    UnknownNode(NodeId),
    #[error("link {0}-{1} has non-positive latency")]
    BadLatency(NodeId, NodeId),
    #[error("address {0} assigned twice")]
    DuplicateAddress(Address),
    #[error("topology is not connected ({0} unreachable from node 0)")]
    Disconnected(NodeId),
    #[error("topology has no nodes")]
    Empty,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Router,
    Host,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopoNode {
    pub id: NodeId,
    pub address: Address,
    pub gist_capable: bool,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    pub latency_ms: f64,
}

/// Undirected, connected network of GIST-capable and plain nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: Vec<TopoNode>,
    links: Vec<Link>,
    adjacency: Vec<Vec<(NodeId, usize)>>,
    by_address: BTreeMap<Address, NodeId>,
}

/// Classic 14-node, 21-link NSFnet backbone.
pub const NSFNET_LINKS: [(u32, u32); 21] = [
    (0, 1),
    (0, 2),
    (0, 7),
    (1, 2),
    (1, 3),
    (2, 5),
    (3, 4),
    (3, 10),
    (4, 5),
    (4, 6),
    (5, 9),
    (5, 13),
    (6, 7),
    (7, 8),
    (8, 9),
    (8, 11),
    (8, 12),
    (10, 11),
    (10, 12),
    (11, 13),
    (12, 13),
];

/// Default GIST-capable subset of the NSFnet nodes. Node 9 has the lowest
/// average GIST distance to the other members.
pub const NSFNET_DEFAULT_GIST: [u32; 9] = [0, 1, 3, 6, 7, 8, 9, 11, 13];

pub const DEFAULT_LINK_LATENCY_MS: f64 = 10.0;

impl Topology {
    pub fn new(nodes: Vec<TopoNode>, links: Vec<Link>) -> Result<Self, TopologyError> {
        if nodes.is_empty() {
            return Err(TopologyError::Empty);
        }
        for (i, n) in nodes.iter().enumerate() {
            if n.id.index() != i {
                return Err(TopologyError::NonDenseIds {
                    expected: i as u32,
                    found: n.id.0,
                });
            }
        }
        let mut by_address = BTreeMap::new();
        for n in &nodes {
            if by_address.insert(n.address, n.id).is_some() {
                return Err(TopologyError::DuplicateAddress(n.address));
            }
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        let mut seen = BTreeSet::new();
        for (idx, l) in links.iter().enumerate() {
            for end in [l.a, l.b] {
                if end.index() >= nodes.len() {
                    return Err(TopologyError::UnknownNode(end));
                }
            }
            if l.a == l.b {
                return Err(TopologyError::SelfLoop(l.a));
            }
            if !(l.latency_ms > 0.0 && l.latency_ms.is_finite()) {
                return Err(TopologyError::BadLatency(l.a, l.b));
            }
            if !seen.insert((l.a.min(l.b), l.a.max(l.b))) {
                return Err(TopologyError::ParallelLink(l.a, l.b));
            }
            adjacency[l.a.index()].push((l.b, idx));
            adjacency[l.b.index()].push((l.a, idx));
        }
        for adj in &mut adjacency {
            adj.sort();
        }
        let topo = Topology {
            nodes,
            links,
            adjacency,
            by_address,
        };
        if let Some(unreached) = topo.first_unreachable() {
            return Err(TopologyError::Disconnected(unreached));
        }
        Ok(topo)
    }

    fn first_unreachable(&self) -> Option<NodeId> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([NodeId(0)]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &self.adjacency[u.index()] {
                if !seen[v.index()] {
                    seen[v.index()] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.iter().position(|s| !s).map(|i| NodeId(i as u32))
    }

    /// NSFnet with the default GIST set and 10 ms links.
    pub fn nsfnet() -> Topology {
        Self::nsfnet_with(&NSFNET_DEFAULT_GIST.map(NodeId), DEFAULT_LINK_LATENCY_MS)
    }

    pub fn nsfnet_with(gist: &[NodeId], latency_ms: f64) -> Topology {
        let nodes = (0..14)
            .map(|i| TopoNode {
                id: NodeId(i),
                address: Address::for_node(NodeId(i)),
                gist_capable: gist.contains(&NodeId(i)),
                kind: NodeKind::Router,
            })
            .collect();
        let links = NSFNET_LINKS
            .iter()
            .map(|&(a, b)| Link {
                a: NodeId(a),
                b: NodeId(b),
                latency_ms,
            })
            .collect();
        Topology::new(nodes, links).expect("NSFnet is well formed")
    }

    /// Chain `0 - 1 - ... - (n-1)` with uniform latency.
    pub fn line(n: u32, gist: &[u32], latency_ms: f64) -> Topology {
        let nodes = (0..n)
            .map(|i| TopoNode {
                id: NodeId(i),
                address: Address::for_node(NodeId(i)),
                gist_capable: gist.contains(&i),
                kind: NodeKind::Router,
            })
            .collect();
        let links = (1..n)
            .map(|i| Link {
                a: NodeId(i - 1),
                b: NodeId(i),
                latency_ms,
            })
            .collect();
        Topology::new(nodes, links).expect("chain is well formed")
    }

    /// Random connected graph: a random spanning tree plus `extra_links`
    /// chords. Node 0 is always GIST-capable; `n_gist` nodes in total are.
    /// Link latencies are whole milliseconds in `1..=20`.
    pub fn random_connected(n_nodes: u32, n_gist: u32, extra_links: u32, seed: u64) -> Topology {
        assert!(n_nodes >= 1 && n_gist >= 1 && n_gist <= n_nodes);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<u32> = (1..n_nodes).collect();
        order.shuffle(&mut rng);
        let mut gist: BTreeSet<u32> = order.iter().copied().take(n_gist as usize - 1).collect();
        gist.insert(0);

        let mut order: Vec<u32> = (0..n_nodes).collect();
        order.shuffle(&mut rng);
        let mut edges = BTreeSet::new();
        for i in 1..order.len() {
            let parent = order[rng.gen_range(0..i)];
            let child = order[i];
            edges.insert((parent.min(child), parent.max(child)));
        }
        let max_edges = (n_nodes as usize) * (n_nodes as usize - 1) / 2;
        let target = (edges.len() + extra_links as usize).min(max_edges);
        while edges.len() < target {
            let a = rng.gen_range(0..n_nodes);
            let b = rng.gen_range(0..n_nodes);
            if a != b {
                edges.insert((a.min(b), a.max(b)));
            }
        }
        let nodes = (0..n_nodes)
            .map(|i| TopoNode {
                id: NodeId(i),
                address: Address::for_node(NodeId(i)),
                gist_capable: gist.contains(&i),
                kind: NodeKind::Router,
            })
            .collect();
        let links = edges
            .into_iter()
            .map(|(a, b)| Link {
                a: NodeId(a),
                b: NodeId(b),
                latency_ms: f64::from(rng.gen_range(1..=20u32)),
            })
            .collect();
        Topology::new(nodes, links).expect("random spanning tree is connected")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[TopoNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &TopoNode {
        &self.nodes[id.index()]
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn neighbors(&self, id: NodeId) -> &[(NodeId, usize)] {
        &self.adjacency[id.index()]
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id.index() < self.nodes.len()
    }

    pub fn is_gist(&self, id: NodeId) -> bool {
        self.nodes[id.index()].gist_capable
    }

    pub fn gist_nodes(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|n| n.gist_capable)
            .map(|n| n.id)
            .collect()
    }

    pub fn address(&self, id: NodeId) -> Address {
        self.nodes[id.index()].address
    }

    pub fn node_at(&self, address: Address) -> Option<NodeId> {
        self.by_address.get(&address).copied()
    }

    /// Parses the line-oriented topology format:
    ///
    /// ```text
    /// node <id> <gist|plain> <router|host> [<ipv4>]
    /// link <id1> <id2> <latency_ms>
    /// ```
    pub fn parse(text: &str) -> Result<Topology, TopologyError> {
        let mut nodes = Vec::new();
        let mut links = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |msg: &str| TopologyError::Parse {
                line,
                msg: msg.to_string(),
            };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            match fields[0] {
                "node" => {
                    if !(4..=5).contains(&fields.len()) {
                        return Err(err(
                            "expected `node <id> <gist|plain> <router|host> [<ipv4>]`",
                        ));
                    }
                    let id = NodeId(fields[1].parse().map_err(|_| err("bad node id"))?);
                    let gist_capable = match fields[2] {
                        "gist" => true,
                        "plain" => false,
                        _ => return Err(err("expected gist or plain")),
                    };
                    let kind = match fields[3] {
                        "router" => NodeKind::Router,
                        "host" => NodeKind::Host,
                        _ => return Err(err("expected router or host")),
                    };
                    let address = match fields.get(4) {
                        Some(ip) => Address(ip.parse().map_err(|_| err("bad ipv4 address"))?),
                        None => Address::for_node(id),
                    };
                    nodes.push(TopoNode {
                        id,
                        address,
                        gist_capable,
                        kind,
                    });
                }
                "link" => {
                    if fields.len() != 4 {
                        return Err(err("expected `link <id1> <id2> <latency_ms>`"));
                    }
                    let a = NodeId(fields[1].parse().map_err(|_| err("bad node id"))?);
                    let b = NodeId(fields[2].parse().map_err(|_| err("bad node id"))?);
                    let latency_ms = fields[3].parse().map_err(|_| err("bad latency"))?;
                    links.push(Link { a, b, latency_ms });
                }
                other => return Err(err(&format!("unknown directive `{other}`"))),
            }
        }
        nodes.sort_by_key(|n| n.id);
        Topology::new(nodes, links)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            let _ = writeln!(
                out,
                "node {} {} {} {}",
                n.id,
                if n.gist_capable { "gist" } else { "plain" },
                match n.kind {
                    NodeKind::Router => "router",
                    NodeKind::Host => "host",
                },
                n.address
            );
        }
        for l in &self.links {
            let _ = writeln!(out, "link {} {} {}", l.a, l.b, l.latency_ms);
        }
        out
    }
}

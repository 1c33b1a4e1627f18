//! Min-hop IP routing with a deterministic tie-break.
//!
//! Links are ranked by their `(min endpoint, max endpoint)` pair. Among the
//! min-hop paths between two nodes the one whose set of link ranks is
//! smallest (compared as a binary number, highest rank most significant) is
//! chosen. Every pair therefore has exactly one route, which makes routes
//! symmetric and closed under sub-paths: the route between two nodes on a
//! route is the corresponding segment of it.

use std::cmp::Ordering;
use std::collections::VecDeque;

use thiserror::Error;

use crate::model::NodeId;

use super::topology::Topology;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RouteError {
    #[error("no route from {0} to {1}")]
    Unreachable(NodeId, NodeId),
    #[error("node {0} is not in the topology")]
    UnknownNode(NodeId),
    #[error("route endpoints must differ ({0})")]
    SameEndpoints(NodeId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub nodes: Vec<NodeId>,
    /// Link index for each hop; `links[i]` joins `nodes[i]` and `nodes[i+1]`.
    pub links: Vec<usize>,
    pub ip_hops: u32,
    pub latency_ms: f64,
    /// Latency from the source to `nodes[i]`.
    pub cumulative_latency: Vec<f64>,
}

impl Route {
    pub fn source(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn destination(&self) -> NodeId {
        *self.nodes.last().expect("route has endpoints")
    }
}

/// Bit set over link ranks ordered as a big-endian binary number.
#[derive(Debug, Clone, PartialEq, Eq)]
struct RankSet(Vec<u64>);

impl RankSet {
    fn empty(words: usize) -> Self {
        RankSet(vec![0; words])
    }

    fn with(&self, rank: usize) -> Self {
        let mut out = self.clone();
        out.0[rank / 64] |= 1 << (rank % 64);
        out
    }
}

impl Ord for RankSet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.iter().rev().cmp(other.0.iter().rev())
    }
}

impl PartialOrd for RankSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Rank of every link under the `(min endpoint, max endpoint)` order.
pub fn link_ranks(topology: &Topology) -> Vec<usize> {
    let mut order: Vec<usize> = (0..topology.links().len()).collect();
    order.sort_by_key(|&i| {
        let l = &topology.links()[i];
        (l.a.min(l.b), l.a.max(l.b))
    });
    let mut ranks = vec![0; order.len()];
    for (rank, idx) in order.into_iter().enumerate() {
        ranks[idx] = rank;
    }
    ranks
}

/// All-pairs route table.
#[derive(Debug, Clone)]
pub struct RouteTable {
    n: usize,
    /// `pred[s][v]`: predecessor of `v` and the link used, on the route from `s`.
    pred: Vec<Vec<Option<(NodeId, usize)>>>,
    hops: Vec<Vec<Option<u32>>>,
}

impl RouteTable {
    pub fn compute(topology: &Topology) -> RouteTable {
        let n = topology.len();
        let ranks = link_ranks(topology);
        let words = ranks.len().div_ceil(64).max(1);
        let mut pred = vec![vec![None; n]; n];
        let mut hops = vec![vec![None; n]; n];
        for s in 0..n {
            let dist = bfs(topology, NodeId(s as u32));
            let mut order: Vec<usize> = (0..n).filter(|&v| dist[v].is_some()).collect();
            order.sort_by_key(|&v| dist[v]);
            let mut key: Vec<Option<RankSet>> = vec![None; n];
            key[s] = Some(RankSet::empty(words));
            for v in order.into_iter().skip(1) {
                let d = dist[v].unwrap();
                let best = topology
                    .neighbors(NodeId(v as u32))
                    .iter()
                    .filter(|(u, _)| dist[u.index()] == Some(d - 1))
                    .map(|&(u, link)| (key[u.index()].as_ref().unwrap().with(ranks[link]), u, link))
                    .min_by(|a, b| a.0.cmp(&b.0))
                    .expect("BFS layer has a predecessor");
                pred[s][v] = Some((best.1, best.2));
                key[v] = Some(best.0);
            }
            hops[s] = dist;
        }
        RouteTable { n, pred, hops }
    }

    pub fn hops(&self, x: NodeId, y: NodeId) -> Option<u32> {
        self.hops.get(x.index())?.get(y.index()).copied().flatten()
    }

    pub fn route(&self, topology: &Topology, x: NodeId, y: NodeId) -> Result<Route, RouteError> {
        for id in [x, y] {
            if id.index() >= self.n {
                return Err(RouteError::UnknownNode(id));
            }
        }
        if x == y {
            return Err(RouteError::SameEndpoints(x));
        }
        if self.hops(x, y).is_none() {
            return Err(RouteError::Unreachable(x, y));
        }
        let mut nodes = vec![y];
        let mut links = Vec::new();
        let mut cur = y;
        while cur != x {
            let (p, link) =
                self.pred[x.index()][cur.index()].expect("reachable node has a predecessor");
            nodes.push(p);
            links.push(link);
            cur = p;
        }
        nodes.reverse();
        links.reverse();
        let mut cumulative_latency = Vec::with_capacity(nodes.len());
        let mut acc = 0.0;
        cumulative_latency.push(0.0);
        for &l in &links {
            acc += topology.links()[l].latency_ms;
            cumulative_latency.push(acc);
        }
        Ok(Route {
            ip_hops: links.len() as u32,
            latency_ms: acc,
            nodes,
            links,
            cumulative_latency,
        })
    }
}

fn bfs(topology: &Topology, s: NodeId) -> Vec<Option<u32>> {
    let mut dist = vec![None; topology.len()];
    dist[s.index()] = Some(0);
    let mut queue = VecDeque::from([s]);
    while let Some(u) = queue.pop_front() {
        let d = dist[u.index()].unwrap();
        for &(v, _) in topology.neighbors(u) {
            if dist[v.index()].is_none() {
                dist[v.index()] = Some(d + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

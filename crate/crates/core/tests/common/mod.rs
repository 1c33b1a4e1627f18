//! Brute-force oracles shared by the integration tests. Nothing here calls
//! the routing or set code under test; distances come from path enumeration
//! over the raw adjacency lists.

#![allow(dead_code)]

pub mod gen;

use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;

use gistgossip::dissemination::{
    disseminate, select_destinations, DisseminationRequest, OracleKnowledge, Strategy,
};
use gistgossip::model::{MetricKind, NodeId};
use gistgossip::simnet::{Topology, Underlay};
use gistgossip::wire::EpidemicType;

pub fn line5() -> Topology {
    Topology::line(5, &[0, 2, 4], 10.0)
}

pub fn random16(seed: u64) -> Topology {
    Topology::random_connected(16, 10, 8, seed)
}

/// LINE5, NSFNET and twenty random 16-node graphs.
pub fn suite() -> Vec<(String, Topology)> {
    let mut out = vec![
        ("line5".to_string(), line5()),
        ("nsfnet".to_string(), Topology::nsfnet()),
    ];
    out.extend((0..20).map(|s| (format!("random16-{s}"), random16(s))));
    out
}

/// All-pairs answers recomputed from scratch.
pub struct Oracle {
    pub topo: Topology,
    n: usize,
    adj: Vec<Vec<(usize, usize)>>,
    hops: Vec<Vec<u32>>,
    rank: Vec<u32>,
    routes: Vec<Vec<Vec<usize>>>,
}

impl Oracle {
    pub fn new(topo: &Topology) -> Oracle {
        let n = topo.len();
        let mut adj = vec![Vec::new(); n];
        for (i, l) in topo.links().iter().enumerate() {
            adj[l.a.0 as usize].push((l.b.0 as usize, i));
            adj[l.b.0 as usize].push((l.a.0 as usize, i));
        }
        let mut sorted: Vec<(u32, u32, usize)> = topo
            .links()
            .iter()
            .enumerate()
            .map(|(i, l)| (l.a.0.min(l.b.0), l.a.0.max(l.b.0), i))
            .collect();
        sorted.sort();
        assert!(sorted.len() <= 128, "oracle keys fit in u128");
        let mut rank = vec![0; sorted.len()];
        for (r, &(_, _, i)) in sorted.iter().enumerate() {
            rank[i] = r as u32;
        }
        let hops: Vec<Vec<u32>> = (0..n).map(|s| bfs(&adj, s)).collect();
        let mut o = Oracle {
            topo: topo.clone(),
            n,
            adj,
            hops,
            rank,
            routes: Vec::new(),
        };
        o.routes = (0..n)
            .map(|x| (0..n).map(|y| o.best_path(x, y)).collect())
            .collect();
        o
    }

    /// Every min-hop path, scored by the set of link ranks it uses read as a
    /// binary number; the smallest wins.
    fn best_path(&self, x: usize, y: usize) -> Vec<usize> {
        let mut best: Option<(u128, Vec<usize>)> = None;
        let mut stack = vec![(vec![x], 0u128)];
        while let Some((path, key)) = stack.pop() {
            let at = *path.last().unwrap();
            if at == y {
                if best.as_ref().is_none_or(|(k, _)| key < *k) {
                    best = Some((key, path));
                }
                continue;
            }
            for &(next, link) in &self.adj[at] {
                if self.hops[next][y] + 1 == self.hops[at][y] {
                    let mut p = path.clone();
                    p.push(next);
                    stack.push((p, key | 1u128 << self.rank[link]));
                }
            }
        }
        best.expect("connected").1
    }

    pub fn route(&self, x: NodeId, y: NodeId) -> Vec<NodeId> {
        self.routes[x.0 as usize][y.0 as usize]
            .iter()
            .map(|&i| NodeId(i as u32))
            .collect()
    }

    pub fn ip_hops(&self, x: NodeId, y: NodeId) -> u32 {
        self.hops[x.0 as usize][y.0 as usize]
    }

    pub fn latency(&self, x: NodeId, y: NodeId) -> f64 {
        let path = &self.routes[x.0 as usize][y.0 as usize];
        path.windows(2)
            .map(|w| {
                let link = self.adj[w[0]].iter().find(|(b, _)| *b == w[1]).unwrap().1;
                self.topo.links()[link].latency_ms
            })
            .sum()
    }

    pub fn gist_path(&self, x: NodeId, y: NodeId) -> Vec<NodeId> {
        self.route(x, y)
            .into_iter()
            .skip(1)
            .filter(|&v| self.topo.is_gist(v))
            .collect()
    }

    pub fn gist_distance(&self, x: NodeId, y: NodeId) -> u32 {
        self.gist_path(x, y).len() as u32
    }

    pub fn distance(&self, x: NodeId, y: NodeId, metric: MetricKind) -> f64 {
        match metric {
            MetricKind::GistHops => f64::from(self.gist_distance(x, y)),
            MetricKind::IpHops => f64::from(self.ip_hops(x, y)),
            MetricKind::Latency => self.latency(x, y),
        }
    }

    pub fn gist(&self) -> Vec<NodeId> {
        (0..self.n as u32)
            .map(NodeId)
            .filter(|&v| self.topo.is_gist(v))
            .collect()
    }

    pub fn s_set(&self, x: NodeId, r: u32, metric: MetricKind) -> BTreeSet<NodeId> {
        self.gist()
            .into_iter()
            .filter(|&y| y != x && self.distance(x, y, metric) <= f64::from(r))
            .collect()
    }

    pub fn d_set(&self, x: NodeId, r: u32, metric: MetricKind) -> BTreeSet<NodeId> {
        self.gist()
            .into_iter()
            .filter(|&y| y != x && self.distance(x, y, metric) == f64::from(r))
            .collect()
    }

    /// What a request must deliver.
    pub fn expected(&self, req: &DisseminationRequest) -> BTreeSet<NodeId> {
        let (x, r, m) = (req.source, req.radius, req.metric);
        match (req.epidemic_type, req.target) {
            (EpidemicType::Bubble, _) => self.s_set(x, r, m),
            (EpidemicType::Balloon, Some(y)) => {
                let mut out = self.s_set(y, r, m);
                out.insert(y);
                out
            }
            (EpidemicType::Hose, Some(y)) => {
                let path = self.gist_path(x, y);
                let mut out: BTreeSet<NodeId> = path.iter().copied().collect();
                out.insert(x);
                for z in std::iter::once(x).chain(path) {
                    out.extend(self.s_set(z, r, m));
                }
                out
            }
            _ => unreachable!("targeted request without target"),
        }
    }
}

fn bfs(adj: &[Vec<(usize, usize)>], s: usize) -> Vec<u32> {
    let mut dist = vec![u32::MAX; adj.len()];
    dist[s] = 0;
    let mut q = VecDeque::from([s]);
    while let Some(u) = q.pop_front() {
        for &(v, _) in &adj[u] {
            if dist[v] == u32::MAX {
                dist[v] = dist[u] + 1;
                q.push_back(v);
            }
        }
    }
    dist
}

/// Runs every (strategy, mode, x, y, r <= 4) with gist-hop scope and compares
/// delivery against the oracle. Returns the number of runs or the first
/// mismatch.
pub fn coverage_sweep(topo: &Topology) -> Result<usize, String> {
    let o = Oracle::new(topo);
    let underlay = Underlay::new(topo.clone());
    let k = OracleKnowledge::new(Arc::clone(&underlay));
    let gist = o.gist();
    let mut runs = 0;
    for &strategy in &Strategy::ALL {
        for &x in &gist {
            for r in 1..=4 {
                let base = DisseminationRequest::bubble(x, MetricKind::GistHops, r, strategy);
                let mut reqs = vec![base.clone()];
                for &y in &gist {
                    reqs.push(base.clone().towards(EpidemicType::Balloon, y));
                    reqs.push(base.clone().towards(EpidemicType::Hose, y));
                }
                for req in reqs {
                    let got = disseminate(&underlay, &k, &req)
                        .map_err(|e| format!("{req:?}: {e}"))?
                        .delivered;
                    let want = o.expected(&req);
                    if got != want {
                        return Err(format!("{req:?}: delivered {got:?}, oracle {want:?}"));
                    }
                    runs += 1;
                }
            }
        }
    }
    Ok(runs)
}

/// Checks the destination cover for every x and r <= 4. Returns the number
/// of (x, r) pairs or the first failure.
pub fn cover_sweep(topo: &Topology) -> Result<usize, String> {
    let o = Oracle::new(topo);
    let k = OracleKnowledge::new(Underlay::new(topo.clone()));
    let mut pairs = 0;
    for x in o.gist() {
        for r in 1..=4 {
            let s = o.s_set(x, r, MetricKind::GistHops);
            let g = select_destinations(&k, x, r, MetricKind::GistHops)
                .map_err(|e| format!("x={x} r={r}: {e}"))?;
            let covered: BTreeSet<NodeId> = g.iter().flat_map(|&y| o.gist_path(x, y)).collect();
            if covered != s {
                return Err(format!("x={x} r={r}: paths cover {covered:?}, S is {s:?}"));
            }
            if g.len() > s.len() {
                return Err(format!("x={x} r={r}: |G|={} > |S|={}", g.len(), s.len()));
            }
            for &y1 in &g {
                for &y2 in &g {
                    let p = o.gist_path(x, y2);
                    if y1 != y2 && p[..p.len() - 1].contains(&y1) {
                        return Err(format!("x={x} r={r}: {y1} lies inside the path to {y2}"));
                    }
                }
            }
            pairs += 1;
        }
    }
    Ok(pairs)
}

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::discovery::DiscoverySim;
use crate::model::{MetricKind, NodeId};
use crate::simnet::Underlay;

use super::DisseminationError;

/// What a node knows about distances and GIST paths to its peers. Every
/// query is asked from the vantage point of `from`.
pub trait Knowledge: Send + Sync {
    fn gist_nodes(&self) -> Vec<NodeId>;
    fn distance(
        &self,
        from: NodeId,
        to: NodeId,
        metric: MetricKind,
    ) -> Result<f64, DisseminationError>;
    /// GIST nodes on the path from `from` to `to`, excluding `from`.
    fn gist_path(&self, from: NodeId, to: NodeId) -> Result<Vec<NodeId>, DisseminationError>;
}

/// Ground truth read off the simulated topology.
#[derive(Debug, Clone)]
pub struct OracleKnowledge {
    underlay: Arc<Underlay>,
}

impl OracleKnowledge {
    pub fn new(underlay: Arc<Underlay>) -> Self {
        OracleKnowledge { underlay }
    }
}

impl Knowledge for OracleKnowledge {
    fn gist_nodes(&self) -> Vec<NodeId> {
        self.underlay.topology().gist_nodes()
    }

    fn distance(
        &self,
        from: NodeId,
        to: NodeId,
        metric: MetricKind,
    ) -> Result<f64, DisseminationError> {
        Ok(self.underlay.distance(from, to, metric)?)
    }

    fn gist_path(&self, from: NodeId, to: NodeId) -> Result<Vec<NodeId>, DisseminationError> {
        Ok(self.underlay.gist_path(from, to)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Known {
    gist_hops: Option<u32>,
    ip_hops: Option<u32>,
    latency_ms: Option<f32>,
    path: Option<Vec<NodeId>>,
}

/// Knowledge taken from the views of a discovery run.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewKnowledge {
    gist: Vec<NodeId>,
    known: BTreeMap<(NodeId, NodeId), Known>,
}

impl ViewKnowledge {
    pub fn from_discovery(sim: &DiscoverySim) -> Self {
        let topo = sim.underlay().topology();
        let mut known = BTreeMap::new();
        let mut gist = Vec::new();
        for node in sim.nodes() {
            gist.push(node.id);
            for d in node.view.entries() {
                let Some(peer) = topo.node_at(d.address) else {
                    continue;
                };
                let path = d.path_vector.as_ref().and_then(|p| {
                    p.iter()
                        .map(|a| topo.node_at(*a))
                        .collect::<Option<Vec<_>>>()
                });
                known.insert(
                    (node.id, peer),
                    Known {
                        gist_hops: d.gist_hops,
                        ip_hops: d.ip_hops,
                        latency_ms: d.latency_ms,
                        path,
                    },
                );
            }
        }
        ViewKnowledge { gist, known }
    }

    fn entry(&self, from: NodeId, to: NodeId) -> Result<&Known, DisseminationError> {
        self.known
            .get(&(from, to))
            .ok_or(DisseminationError::MissingKnowledge {
                node: from,
                peer: to,
            })
    }
}

impl Knowledge for ViewKnowledge {
    fn gist_nodes(&self) -> Vec<NodeId> {
        self.gist.clone()
    }

    fn distance(
        &self,
        from: NodeId,
        to: NodeId,
        metric: MetricKind,
    ) -> Result<f64, DisseminationError> {
        if from == to {
            return Ok(0.0);
        }
        let e = self.entry(from, to)?;
        let value = match metric {
            MetricKind::GistHops => e.gist_hops.map(f64::from),
            MetricKind::IpHops => e.ip_hops.map(f64::from),
            MetricKind::Latency => e.latency_ms.map(f64::from),
        };
        value.ok_or(DisseminationError::MissingKnowledge {
            node: from,
            peer: to,
        })
    }

    fn gist_path(&self, from: NodeId, to: NodeId) -> Result<Vec<NodeId>, DisseminationError> {
        if from == to {
            return Ok(Vec::new());
        }
        self.entry(from, to)?
            .path
            .clone()
            .ok_or(DisseminationError::MissingKnowledge {
                node: from,
                peer: to,
            })
    }
}

fn check_radius(radius: u32) -> Result<f64, DisseminationError> {
    if radius == 0 {
        return Err(DisseminationError::ZeroRadius);
    }
    Ok(f64::from(radius))
}

/// GIST nodes at exactly `radius` from `x`.
pub fn d_set(
    k: &dyn Knowledge,
    x: NodeId,
    radius: u32,
    metric: MetricKind,
) -> Result<BTreeSet<NodeId>, DisseminationError> {
    let r = check_radius(radius)?;
    let mut out = BTreeSet::new();
    for y in k.gist_nodes() {
        if y != x && k.distance(x, y, metric)? == r {
            out.insert(y);
        }
    }
    Ok(out)
}

/// GIST nodes other than `x` within `radius` of it.
pub fn s_set(
    k: &dyn Knowledge,
    x: NodeId,
    radius: u32,
    metric: MetricKind,
) -> Result<BTreeSet<NodeId>, DisseminationError> {
    let r = check_radius(radius)?;
    let mut out = BTreeSet::new();
    for y in k.gist_nodes() {
        if y != x && k.distance(x, y, metric)? <= r {
            out.insert(y);
        }
    }
    Ok(out)
}

/// Smallest set of unicast destinations whose GIST paths cover the whole
/// radius-`radius` neighbourhood of `x`. Rounds go from the rim inwards; a
/// node already crossed by a chosen path is never chosen itself.
pub fn select_destinations(
    k: &dyn Knowledge,
    x: NodeId,
    radius: u32,
    metric: MetricKind,
) -> Result<BTreeSet<NodeId>, DisseminationError> {
    if metric != MetricKind::GistHops {
        return Err(DisseminationError::Unsupported {
            strategy: "destination selection",
            metric,
        });
    }
    let mut remaining = s_set(k, x, radius, metric)?;
    let mut distance = BTreeMap::new();
    let mut paths = BTreeMap::new();
    for &y in &remaining {
        distance.insert(y, k.distance(x, y, metric)? as u32);
        paths.insert(y, k.gist_path(x, y)?);
    }
    let mut chosen = BTreeSet::new();
    for i in (1..=radius).rev() {
        let round: Vec<NodeId> = remaining
            .iter()
            .copied()
            .filter(|y| distance[y] == i)
            .collect();
        for y in round {
            chosen.insert(y);
            for z in &paths[&y] {
                remaining.remove(z);
            }
        }
    }
    Ok(chosen)
}

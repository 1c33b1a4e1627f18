//! Seeded experiment campaigns over the discovery and dissemination
//! simulators, with CSV output.

use std::io;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::discovery::{Approach, DiscoveryError, DiscoverySim, GossipConfig, MessageCounts};
use crate::dissemination::{
    disseminate, DisseminationError, DisseminationRequest, Knowledge, Strategy,
};
use crate::model::{MetricKind, NodeId};
use crate::simnet::Underlay;
use crate::wire::EpidemicType;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("no seeds given")]
    NoSeeds,
    #[error(transparent)]
    Discovery(#[from] DiscoveryError),
    #[error(transparent)]
    Dissemination(#[from] DisseminationError),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// How a campaign spreads its independent runs over threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon pool when the `parallel` feature is on, sequential otherwise.
    #[default]
    Parallel,
}

fn map_runs<T, F>(items: &[u64], execution: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(|&s| f(s)).collect()
        }
        _ => items.iter().map(|&s| f(s)).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct DiscoverySpec {
    pub underlay: Arc<Underlay>,
    pub tracker: NodeId,
    pub config: GossipConfig,
    pub seeds: Vec<u64>,
    pub max_cycles: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub approach: Approach,
    pub tracker: NodeId,
    pub seed: u64,
    pub cycles: u32,
    pub messages: MessageCounts,
    pub link_traversals: u64,
    pub converged: bool,
    pub metrics_complete: bool,
}

impl RunRecord {
    pub fn total_messages(&self) -> u64 {
        self.messages.total()
    }
}

#[derive(Serialize)]
struct DiscoveryRow {
    approach: &'static str,
    tracker: u32,
    seed: u64,
    cycles: u32,
    messages_rumor: u64,
    messages_response: u64,
    messages_ack: u64,
    messages_forwarded: u64,
    converged: bool,
    metrics_complete: bool,
}

pub fn run_one(spec: &DiscoverySpec, seed: u64) -> Result<RunRecord, DiscoveryError> {
    let mut sim = DiscoverySim::new(
        Arc::clone(&spec.underlay),
        spec.tracker,
        spec.config.clone(),
        seed,
    )?;
    let stats = sim.run_until_converged(spec.max_cycles);
    Ok(RunRecord {
        approach: spec.config.approach,
        tracker: spec.tracker,
        seed,
        cycles: stats.cycles,
        messages: stats.messages,
        link_traversals: stats.link_traversals,
        converged: stats.converged,
        metrics_complete: stats.metrics_complete,
    })
}

/// One simulator per seed; records come back sorted by seed.
pub fn run_discovery(spec: &DiscoverySpec) -> Result<Vec<RunRecord>, HarnessError> {
    run_discovery_with(spec, Execution::default())
}

pub fn run_discovery_with(
    spec: &DiscoverySpec,
    execution: Execution,
) -> Result<Vec<RunRecord>, HarnessError> {
    if spec.seeds.is_empty() {
        return Err(HarnessError::NoSeeds);
    }
    spec.config.validate().map_err(DiscoveryError::from)?;
    let mut records = map_runs(&spec.seeds, execution, |seed| run_one(spec, seed))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    records.sort_by_key(|r| r.seed);
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub approach: &'static str,
    pub tracker: u32,
    pub runs: usize,
    pub failed: usize,
    pub mean_cycles: f64,
    pub p95_cycles: f64,
    pub mean_messages: f64,
    pub p95_messages: f64,
}

/// Nearest-rank percentile of an ascending slice.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean and 95th percentile over converged runs; the others are counted as
/// failed.
pub fn summarize(records: &[RunRecord]) -> Summary {
    let ok: Vec<&RunRecord> = records.iter().filter(|r| r.converged).collect();
    let mut cycles: Vec<f64> = ok.iter().map(|r| f64::from(r.cycles)).collect();
    let mut messages: Vec<f64> = ok.iter().map(|r| r.total_messages() as f64).collect();
    cycles.sort_by(f64::total_cmp);
    messages.sort_by(f64::total_cmp);
    Summary {
        approach: records.first().map_or("", |r| r.approach.as_str()),
        tracker: records.first().map_or(0, |r| r.tracker.0),
        runs: records.len(),
        failed: records.len() - ok.len(),
        mean_cycles: mean(&cycles),
        p95_cycles: percentile(&cycles, 95.0),
        mean_messages: mean(&messages),
        p95_messages: percentile(&messages, 95.0),
    }
}

pub fn write_discovery_csv<W: io::Write>(
    out: W,
    records: &[RunRecord],
) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(DiscoveryRow {
            approach: r.approach.as_str(),
            tracker: r.tracker.0,
            seed: r.seed,
            cycles: r.cycles,
            messages_rumor: r.messages.rumor,
            messages_response: r.messages.response,
            messages_ack: r.messages.ack,
            messages_forwarded: r.messages.forwarded,
            converged: r.converged,
            metrics_complete: r.metrics_complete,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: io::Write>(out: W, summaries: &[Summary]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for s in summaries {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct DisseminationSpec {
    pub underlay: Arc<Underlay>,
    pub epidemic_type: EpidemicType,
    pub metric: MetricKind,
    pub strategies: Vec<Strategy>,
    pub radii: Vec<u32>,
    /// Senders to average over; every GIST node when empty.
    pub sources: Vec<NodeId>,
    /// Fixed balloon/hose target. Sampled per sender and seed when absent.
    pub target: Option<NodeId>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisseminationRow {
    pub strategy: &'static str,
    pub mode: &'static str,
    pub metric: &'static str,
    pub radius: u32,
    pub avg_traversals: f64,
    pub avg_distinct_links: f64,
    pub avg_messages: f64,
    pub senders: usize,
}

fn sample_target(gist: &[NodeId], source: NodeId, seed: u64) -> NodeId {
    let others: Vec<NodeId> = gist.iter().copied().filter(|&g| g != source).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (u64::from(source.0) << 32));
    others.choose(&mut rng).copied().unwrap_or(source)
}

/// Averages cost over all senders (and sampled targets) for each strategy
/// and radius. Rows are ordered by strategy, then radius.
pub fn run_dissemination(
    spec: &DisseminationSpec,
    knowledge: &dyn Knowledge,
    execution: Execution,
) -> Result<Vec<DisseminationRow>, HarnessError> {
    let gist = spec.underlay.topology().gist_nodes();
    let sources = if spec.sources.is_empty() {
        gist.clone()
    } else {
        spec.sources.clone()
    };
    let seeds: Vec<u64> = match spec.epidemic_type {
        EpidemicType::Bubble => vec![0],
        _ if spec.target.is_some() => vec![0],
        _ if spec.seeds.is_empty() => return Err(HarnessError::NoSeeds),
        _ => spec.seeds.clone(),
    };
    let mut rows = Vec::new();
    for &strategy in &spec.strategies {
        for &radius in &spec.radii {
            let mut requests = Vec::new();
            for &source in &sources {
                for &seed in &seeds {
                    let mut req =
                        DisseminationRequest::bubble(source, spec.metric, radius, strategy);
                    if spec.epidemic_type != EpidemicType::Bubble {
                        let target = spec
                            .target
                            .unwrap_or_else(|| sample_target(&gist, source, seed));
                        req = req.towards(spec.epidemic_type, target);
                    }
                    requests.push(req);
                }
            }
            let idx: Vec<u64> = (0..requests.len() as u64).collect();
            let reports = map_runs(&idx, execution, |i| {
                disseminate(&spec.underlay, knowledge, &requests[i as usize])
            })
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
            let n = reports.len().max(1) as f64;
            rows.push(DisseminationRow {
                strategy: strategy.as_str(),
                mode: spec.epidemic_type.as_str(),
                metric: spec.metric.as_str(),
                radius,
                avg_traversals: reports
                    .iter()
                    .map(|r| r.link_traversals as f64)
                    .sum::<f64>()
                    / n,
                avg_distinct_links: reports
                    .iter()
                    .map(|r| r.distinct_links() as f64)
                    .sum::<f64>()
                    / n,
                avg_messages: reports.iter().map(|r| r.messages_sent as f64).sum::<f64>() / n,
                senders: sources.len(),
            });
        }
    }
    Ok(rows)
}

pub fn write_dissemination_csv<W: io::Write>(
    out: W,
    rows: &[DisseminationRow],
) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissemination::OracleKnowledge;
    use crate::simnet::Topology;

    fn nsf_spec(approach: Approach, seeds: u64) -> DiscoverySpec {
        DiscoverySpec {
            underlay: Underlay::new(Topology::nsfnet()),
            tracker: NodeId(0),
            config: GossipConfig::with_approach(approach),
            seeds: (0..seeds).collect(),
            max_cycles: 500,
        }
    }

    #[test]
    fn percentile_is_nearest_rank() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(percentile(&v, 95.0), 19.0);
        assert_eq!(percentile(&v, 100.0), 20.0);
        assert_eq!(percentile(&[3.0], 95.0), 3.0);
        assert!(percentile(&[], 95.0).is_nan());
    }

    #[test]
    fn execution_modes_agree() {
        let spec = nsf_spec(Approach::QFull, 8);
        assert_eq!(
            run_discovery_with(&spec, Execution::Sequential).unwrap(),
            run_discovery_with(&spec, Execution::Parallel).unwrap()
        );
    }

    #[test]
    fn csv_has_the_documented_columns() {
        let records = run_discovery(&nsf_spec(Approach::UdpMode, 2)).unwrap();
        let mut buf = Vec::new();
        write_discovery_csv(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "approach,tracker,seed,cycles,messages_rumor,messages_response,messages_ack,messages_forwarded,converged,metrics_complete"
        );
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().starts_with("udp-mode,0,0,"));
    }

    #[test]
    fn summary_excludes_failures() {
        let mut spec = nsf_spec(Approach::UdpMode, 3);
        spec.max_cycles = 1;
        let s = summarize(&run_discovery(&spec).unwrap());
        assert_eq!((s.runs, s.failed), (3, 3));
        assert!(s.mean_cycles.is_nan());
    }

    #[test]
    fn empty_seed_list_rejected() {
        let mut spec = nsf_spec(Approach::QFull, 0);
        spec.seeds.clear();
        assert!(matches!(run_discovery(&spec), Err(HarnessError::NoSeeds)));
    }

    #[test]
    fn dissemination_rows_average_over_senders() {
        let underlay = Underlay::new(Topology::line(5, &[0, 2, 4], 10.0));
        let spec = DisseminationSpec {
            underlay: Arc::clone(&underlay),
            epidemic_type: EpidemicType::Bubble,
            metric: MetricKind::GistHops,
            strategies: vec![Strategy::SimpleUnicast, Strategy::GistUnicast],
            radii: vec![2],
            sources: vec![NodeId(0)],
            target: None,
            seeds: vec![],
        };
        let rows = run_dissemination(
            &spec,
            &OracleKnowledge::new(underlay),
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[0].avg_traversals, rows[0].avg_messages), (6.0, 2.0));
        assert_eq!((rows[1].avg_traversals, rows[1].avg_messages), (4.0, 1.0));
        assert_eq!(rows[1].avg_distinct_links, 4.0);
    }
}

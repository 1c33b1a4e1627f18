use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use gistgossip::discovery::{Approach, DiscoverySim, GossipConfig};
use gistgossip::dissemination::{Knowledge, OracleKnowledge, Strategy, ViewKnowledge};
use gistgossip::harness::{
    run_discovery_with, run_dissemination, summarize, write_discovery_csv, write_dissemination_csv,
    write_summary_csv, DiscoverySpec, DisseminationSpec, Execution,
};
use gistgossip::model::{MetricKind, NodeId};
use gistgossip::simnet::{Topology, Underlay};
use gistgossip::wire::EpidemicType;

#[derive(Parser)]
#[command(
    name = "gistgossip",
    version,
    about = "GIST node discovery and scoped epidemic signaling experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded discovery campaigns and write one CSV row per run.
    Discover(DiscoverArgs),
    /// Measure dissemination cost averaged over GIST senders.
    Disseminate(DisseminateArgs),
    /// Inspect or dump a topology.
    Topo(TopoArgs),
}

#[derive(Args)]
struct Common {
    /// Topology file, or `nsfnet` for the built-in one.
    #[arg(long, default_value = "nsfnet")]
    topology: String,
    /// Number of seeds; runs use seeds first_seed..first_seed+n.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run seeds one after another instead of on the thread pool.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn seed_list(&self) -> Vec<u64> {
        (self.first_seed..self.first_seed + self.seeds).collect()
    }

    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

#[derive(Args)]
struct DiscoverArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0)]
    tracker: u32,
    /// Approaches to run, comma separated.
    #[arg(long, value_delimiter = ',', default_values = ["q-mode", "udp-mode", "q-full"])]
    approach: Vec<Approach>,
    /// Cycle budget per run.
    #[arg(long, default_value_t = 1000)]
    cycles: u32,
    /// Gossip configuration file (`key = value` lines). Flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    delta_ms: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    /// Also write mean and 95th percentile per approach to this CSV.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KnowledgeSource {
    /// Distances and paths read off the topology.
    Oracle,
    /// Views of a q-full discovery run, kept going until every peer is measured.
    Views,
}

#[derive(Args)]
struct DisseminateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "bubble")]
    mode: EpidemicType,
    #[arg(long, value_delimiter = ',', default_values = ["simple-unicast", "gist-unicast", "overlay-broadcast"])]
    strategy: Vec<Strategy>,
    #[arg(long, default_value = "gist-hops")]
    metric: MetricKind,
    #[arg(long, value_delimiter = ',', default_values = ["1", "2", "3", "4"])]
    radius: Vec<u32>,
    /// Single sender; every GIST node when absent.
    #[arg(long)]
    source: Option<u32>,
    /// Fixed balloon/hose target; sampled per sender and seed when absent.
    #[arg(long)]
    target: Option<u32>,
    #[arg(long, value_enum, default_value = "oracle")]
    knowledge: KnowledgeSource,
    /// Cycle budget of the discovery run behind `--knowledge views`.
    #[arg(long, default_value_t = 1000)]
    cycles: u32,
}

#[derive(Args)]
struct TopoArgs {
    #[arg(long, default_value = "nsfnet")]
    builtin: String,
    /// Dump the topology in the file format.
    #[arg(long)]
    print: bool,
}

fn load_topology(source: &str) -> Result<Topology> {
    match source {
        "nsfnet" => Ok(Topology::nsfnet()),
        "line5" => Ok(Topology::line(5, &[0, 2, 4], 10.0)),
        path => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading topology {path}"))?;
            Topology::parse(&text).with_context(|| format!("parsing topology {path}"))
        }
    }
}

fn gist_node(topo: &Topology, id: u32, what: &str) -> Result<NodeId> {
    let id = NodeId(id);
    if !topo.contains(id) || !topo.is_gist(id) {
        bail!("{what} {id} is not a GIST node of the topology");
    }
    Ok(id)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn discover(args: DiscoverArgs) -> Result<()> {
    let underlay = Underlay::new(load_topology(&args.common.topology)?);
    let tracker = gist_node(underlay.topology(), args.tracker, "tracker")?;
    let mut base = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            GossipConfig::parse(&text).with_context(|| format!("parsing config {}", p.display()))?
        }
        None => GossipConfig::default(),
    };
    if let Some(d) = args.delta_ms {
        base = base.with_delta(d);
    }
    if let Some(m) = args.m {
        base.m = m;
    }

    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for &approach in &args.approach {
        let spec = DiscoverySpec {
            underlay: Arc::clone(&underlay),
            tracker,
            config: GossipConfig {
                approach,
                ..base.clone()
            },
            seeds: args.common.seed_list(),
            max_cycles: args.cycles,
        };
        let runs = run_discovery_with(&spec, args.common.execution())?;
        summaries.push(summarize(&runs));
        records.extend(runs);
    }
    write_discovery_csv(output(args.common.out.as_deref())?, &records)?;
    if let Some(p) = &args.summary {
        write_summary_csv(output(Some(p))?, &summaries)?;
    }
    Ok(())
}

fn disseminate(args: DisseminateArgs) -> Result<()> {
    let underlay = Underlay::new(load_topology(&args.common.topology)?);
    let topo = underlay.topology();
    let sources = match args.source {
        Some(s) => vec![gist_node(topo, s, "source")?],
        None => Vec::new(),
    };
    let target = args
        .target
        .map(|t| gist_node(topo, t, "target"))
        .transpose()?;
    if args.mode == EpidemicType::Bubble && target.is_some() {
        bail!("bubble takes no target");
    }
    let seeds = args.common.seed_list();

    let knowledge: Box<dyn Knowledge> = match args.knowledge {
        KnowledgeSource::Oracle => Box::new(OracleKnowledge::new(Arc::clone(&underlay))),
        KnowledgeSource::Views => {
            let tracker = *topo
                .gist_nodes()
                .first()
                .context("topology has no GIST node")?;
            let seed = seeds.first().copied().unwrap_or(0);
            let mut sim = DiscoverySim::new(
                Arc::clone(&underlay),
                tracker,
                GossipConfig::with_approach(Approach::QFull),
                seed,
            )?;
            if !sim.run_until_metrics_complete(args.cycles) {
                bail!(
                    "discovery with seed {seed} did not measure every peer within {} cycles",
                    args.cycles
                );
            }
            Box::new(ViewKnowledge::from_discovery(&sim))
        }
    };

    let spec = DisseminationSpec {
        underlay: Arc::clone(&underlay),
        epidemic_type: args.mode,
        metric: args.metric,
        strategies: args.strategy,
        radii: args.radius,
        sources,
        target,
        seeds,
    };
    let rows = run_dissemination(&spec, knowledge.as_ref(), args.common.execution())?;
    write_dissemination_csv(output(args.common.out.as_deref())?, &rows)?;
    Ok(())
}

fn topo(args: TopoArgs) -> Result<()> {
    let topo = load_topology(&args.builtin)?;
    let mut out = io::stdout().lock();
    if args.print {
        out.write_all(topo.to_text().as_bytes())?;
        return Ok(());
    }
    let underlay = Underlay::new(topo);
    let gist = underlay.topology().gist_nodes();
    writeln!(
        out,
        "{} nodes, {} links, {} GIST nodes",
        underlay.topology().len(),
        underlay.topology().links().len(),
        gist.len()
    )?;
    for g in gist {
        writeln!(
            out,
            "{g}\tmean GIST distance {:.3}",
            underlay.mean_gist_distance(g)
        )?;
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Discover(a) => discover(a),
        Command::Disseminate(a) => disseminate(a),
        Command::Topo(a) => topo(a),
    }
}

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bootstrap::{self, StaticAsnResolver, StaticTrackerResolver, DEFAULT_CONTAINER};
use crate::model::{
    randomize, select_peer, truncate, Address, NodeDescriptor, NodeId, NslpId, PeerIdentity,
    SessionId, SimTime,
};
use crate::simnet::{Arrival, ArrivalKind, DeliveryMode, EventQueue, Network, Scheduled, Underlay};
use crate::wire::{self, CommonHeader, HeaderFlags, Message, MessageType, MriObject, NliObject};

use super::config::{Approach, ConfigError, GossipConfig};
use super::node::{share_filter, store_policy, Activity, NodeState, PendingSession};

/// ASN every simulated address maps to.
pub const SIM_ASN: u32 = 137;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscoveryError {
    #[error("tracker {0} is not a GIST node")]
    TrackerNotGist(NodeId),
    #[error("node {0} is not part of the topology")]
    UnknownNode(NodeId),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug)]
pub enum Event {
    Cycle { node: NodeId, generation: u64 },
    Arrival(Arrival),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MessageCounts {
    pub rumor: u64,
    pub response: u64,
    pub ack: u64,
    /// Extra legs of full-path Rumors re-sent by on-path interceptors.
    pub forwarded: u64,
}

impl MessageCounts {
    pub fn total(&self) -> u64 {
        self.rumor + self.response + self.ack + self.forwarded
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub converged: bool,
    pub convergence_time_ms: Option<SimTime>,
    /// Cycles elapsed until convergence, or the budget when it never happened.
    pub cycles: u32,
    pub messages: MessageCounts,
    pub transmissions: u64,
    pub link_traversals: u64,
    pub metrics_complete: bool,
    pub trace_digest: u64,
}

/// One discovery run: every GIST node of the underlay gossips over a shared
/// simulated network.
pub struct DiscoverySim {
    config: GossipConfig,
    underlay: Arc<Underlay>,
    net: Network,
    queue: EventQueue<Event>,
    nodes: Vec<Option<NodeState>>,
    gist: Vec<NodeId>,
    tracker: NodeId,
    asn: StaticAsnResolver,
    trackers: StaticTrackerResolver,
    /// Start offsets.
    rng: ChaCha8Rng,
    /// One stream per node, so runs that differ only in the tracker make the
    /// same random choices at every node.
    node_rngs: Vec<ChaCha8Rng>,
    counts: MessageCounts,
    trace: DefaultHasher,
    complete_views: usize,
    converged_at: Option<SimTime>,
    started: bool,
}

impl DiscoverySim {
    pub fn new(
        underlay: Arc<Underlay>,
        tracker: NodeId,
        config: GossipConfig,
        seed: u64,
    ) -> Result<DiscoverySim, DiscoveryError> {
        config.validate()?;
        let topo = underlay.topology();
        if !topo.contains(tracker) {
            return Err(DiscoveryError::UnknownNode(tracker));
        }
        if !topo.is_gist(tracker) {
            return Err(DiscoveryError::TrackerNotGist(tracker));
        }
        let gist = topo.gist_nodes();
        let mut nodes: Vec<Option<NodeState>> = vec![None; topo.len()];
        for &g in &gist {
            nodes[g.index()] = Some(NodeState::new(g, topo.address(g), &config));
        }
        let asn = StaticAsnResolver::uniform(topo.nodes().iter().map(|n| n.address), SIM_ASN);
        let mut trackers = StaticTrackerResolver::new();
        trackers.insert(
            &bootstrap::tracker_domain(SIM_ASN, DEFAULT_CONTAINER),
            vec![topo.address(tracker)],
        );
        let net = Network::new(Arc::clone(&underlay))
            .with_loss(config.loss_probability, seed ^ 0x9e37_79b9_7f4a_7c15);
        let converged_at = (gist.len() <= 1).then_some(0.0);
        let topo_len = topo.len();
        Ok(DiscoverySim {
            complete_views: if gist.len() <= 1 { gist.len() } else { 0 },
            config,
            underlay,
            net,
            queue: EventQueue::new(),
            nodes,
            gist,
            tracker,
            asn,
            trackers,
            rng: ChaCha8Rng::seed_from_u64(seed),
            node_rngs: (0..topo_len)
                .map(|i| {
                    let mut r = ChaCha8Rng::seed_from_u64(seed);
                    r.set_stream(i as u64 + 1);
                    r
                })
                .collect(),
            counts: MessageCounts::default(),
            trace: DefaultHasher::new(),
            converged_at,
            started: false,
        })
    }

    pub fn config(&self) -> &GossipConfig {
        &self.config
    }

    pub fn underlay(&self) -> &Arc<Underlay> {
        &self.underlay
    }

    pub fn tracker(&self) -> NodeId {
        self.tracker
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn counts(&self) -> MessageCounts {
        self.counts
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeState> {
        self.nodes.get(id.index()).and_then(Option::as_ref)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeState> {
        self.nodes.iter().flatten()
    }

    /// Schedules every node's first cycle at a uniform offset within Δ.
    /// Idempotent.
    pub fn start(&mut self) {
        if self.started {
            return;
        }
        self.started = true;
        let delta = self.config.delta_ms.max(1.0) as u64;
        for &g in &self.gist {
            let offset = self.rng.gen_range(0..delta) as f64;
            self.queue.schedule(
                offset,
                Event::Cycle {
                    node: g,
                    generation: 0,
                },
            );
        }
    }

    pub fn is_converged(&self) -> bool {
        self.converged_at.is_some()
    }

    /// True when every descriptor in every view carries all metrics and a
    /// path vector.
    pub fn metrics_complete(&self) -> bool {
        self.nodes()
            .all(|n| n.view.entries().all(NodeDescriptor::has_all_metrics))
    }

    pub fn all_suspended(&self) -> bool {
        self.nodes().all(|n| n.activity == Activity::Suspended)
    }

    /// Runs until every GIST view holds every other GIST node or the cycle
    /// budget is spent.
    pub fn run_until_converged(&mut self, max_cycles: u32) -> RunStats {
        self.start();
        let limit = f64::from(max_cycles) * self.config.delta_ms;
        while self.converged_at.is_none() {
            let Some((t, ev)) = self.queue.step_until(limit) else {
                break;
            };
            self.dispatch(t, ev);
        }
        self.stats(max_cycles)
    }

    /// Keeps gossiping until every view entry carries all metrics, the
    /// budget is spent or every node has gone quiet. Returns whether the
    /// metrics are complete.
    pub fn run_until_metrics_complete(&mut self, max_cycles: u32) -> bool {
        self.start();
        let limit = f64::from(max_cycles) * self.config.delta_ms;
        while !(self.is_converged() && self.metrics_complete()) {
            let Some((t, ev)) = self.queue.step_until(limit) else {
                break;
            };
            self.dispatch(t, ev);
        }
        self.is_converged() && self.metrics_complete()
    }

    /// Runs every event due by `until`. Returns the number dispatched.
    pub fn run_for(&mut self, until: SimTime) -> usize {
        let mut n = 0;
        while let Some((t, ev)) = self.queue.step_until(until) {
            self.dispatch(t, ev);
            n += 1;
        }
        n
    }

    pub fn stats(&self, max_cycles: u32) -> RunStats {
        let cycles = match self.converged_at {
            Some(t) => (t / self.config.delta_ms).ceil() as u32,
            None => max_cycles,
        };
        RunStats {
            converged: self.converged_at.is_some(),
            convergence_time_ms: self.converged_at,
            cycles,
            messages: self.counts,
            transmissions: self.net.transmissions(),
            link_traversals: self.net.traversals(),
            metrics_complete: self.metrics_complete(),
            trace_digest: self.trace.finish(),
        }
    }

    /// Starts one Rumor exchange from `from` to `to` right now, outside the
    /// cycle schedule.
    pub fn exchange(
        &mut self,
        from: NodeId,
        to: NodeId,
        mode: DeliveryMode,
    ) -> Result<(), DiscoveryError> {
        if self.node(from).is_none() {
            return Err(DiscoveryError::UnknownNode(from));
        }
        if !self.underlay.topology().contains(to) {
            return Err(DiscoveryError::UnknownNode(to));
        }
        let addr = self.underlay.topology().address(to);
        self.send_rumor(self.now(), from, addr, mode);
        Ok(())
    }

    /// Hands descriptors to a node as if learned from outside the run.
    pub fn introduce(
        &mut self,
        node: NodeId,
        descriptors: Vec<NodeDescriptor>,
    ) -> Result<(), DiscoveryError> {
        if self.node(node).is_none() {
            return Err(DiscoveryError::UnknownNode(node));
        }
        self.learn(self.now(), node, descriptors);
        Ok(())
    }

    fn dispatch(&mut self, now: SimTime, event: Event) {
        now.to_bits().hash(&mut self.trace);
        match event {
            Event::Cycle { node, generation } => {
                (0u8, node.0, generation).hash(&mut self.trace);
                self.on_cycle(now, node, generation);
            }
            Event::Arrival(arrival) => {
                (
                    1u8,
                    arrival.node.0,
                    arrival.kind == ArrivalKind::Intercepted,
                )
                    .hash(&mut self.trace);
                arrival.packet.bytes.hash(&mut self.trace);
                self.on_arrival(now, arrival);
            }
        }
    }

    fn state(&mut self, id: NodeId) -> &mut NodeState {
        self.nodes[id.index()].as_mut().expect("GIST node state")
    }

    fn schedule(&mut self, scheduled: Option<Scheduled>) {
        if let Some(s) = scheduled {
            self.queue.schedule(s.time, Event::Arrival(s.arrival));
        }
    }

    fn on_cycle(&mut self, now: SimTime, id: NodeId, generation: u64) {
        let node = self.state(id);
        if generation != node.timer_generation {
            return;
        }
        node.expire_sessions(now);
        if node.view.is_empty() {
            let own = node.address;
            let delta = node.current_delta_ms;
            // The first exchange goes to the tracker, encapsulated like every
            // other Rumor. A tracker with nobody to ask retries next cycle.
            if let Ok(addr) = bootstrap::bootstrap(
                own,
                &self.asn,
                &self.trackers,
                DEFAULT_CONTAINER,
                &mut self.node_rngs[id.index()],
            ) {
                let mode = self.config.approach.rumor_mode();
                self.send_rumor(now, id, addr, mode);
            }
            self.queue.schedule(
                now + delta,
                Event::Cycle {
                    node: id,
                    generation,
                },
            );
            return;
        }
        let config = self.config.clone();
        let node = self.state(id);
        if node.cycle_boundary(&config) == Activity::Suspended {
            return;
        }
        let delta = node.current_delta_ms;
        let peer = match select_peer(
            &self.nodes[id.index()].as_ref().unwrap().view,
            &mut self.node_rngs[id.index()],
        ) {
            Ok(p) => p.address,
            Err(_) => return,
        };
        self.send_rumor(now, id, peer, config.approach.rumor_mode());
        self.queue.schedule(
            now + delta,
            Event::Cycle {
                node: id,
                generation,
            },
        );
    }

    /// Gossip buffer for `requester`: view plus own descriptor, metrics
    /// stripped, filtered, shuffled with the requester last, cut to m.
    fn outgoing_buffer(
        &mut self,
        id: NodeId,
        requester: Address,
        requester_id: Option<PeerIdentity>,
    ) -> Vec<NodeDescriptor> {
        let node = self.nodes[id.index()].as_ref().expect("GIST node state");
        let buf: Vec<NodeDescriptor> = node
            .view
            .with_own(&node.own_descriptor())
            .iter()
            .map(NodeDescriptor::without_metrics)
            .collect();
        let requester_id =
            requester_id.or_else(|| node.view.find_by_address(requester).map(|d| d.identity));
        let mut buf = share_filter(self.config.share_netmask, buf, requester);
        let rng = &mut self.node_rngs[id.index()];
        match requester_id {
            Some(excluded) => buf = randomize(&excluded, buf, rng),
            None => buf.shuffle(rng),
        }
        truncate(buf, self.config.m)
    }

    fn header(&self, msg_type: MessageType) -> CommonHeader {
        CommonHeader {
            msg_type,
            nslpid: NslpId::NULL,
            gist_hop_count: self.config.rumor_gist_hop_limit,
            flags: HeaderFlags::default(),
        }
    }

    fn nli(&self, id: NodeId) -> NliObject {
        let node = self.node(id).expect("GIST node state");
        NliObject {
            identity: node.identity,
            address: node.address,
            ip_ttl: self.config.rumor_ip_ttl,
            validity_time_ms: self.config.validity_time_ms,
        }
    }

    /// Sends `msg` and returns how many transmissions the network made.
    fn transmit(
        &mut self,
        now: SimTime,
        from: NodeId,
        to: Address,
        mode: DeliveryMode,
        msg: &Message,
    ) -> Option<u64> {
        let before = self.net.transmissions();
        let scheduled = self
            .net
            .send(now, from, to, mode, msg, self.config.rumor_ip_ttl)
            .ok()?;
        self.schedule(scheduled);
        Some(self.net.transmissions() - before)
    }

    fn send_rumor(&mut self, now: SimTime, id: NodeId, to: Address, mode: DeliveryMode) {
        let buffer = self.outgoing_buffer(id, to, None);
        let sid = SessionId::random(&mut self.node_rngs[id.index()]);
        let node = self.node(id).expect("GIST node state");
        let msg = Message {
            header: self.header(MessageType::Rumor),
            mri: MriObject::path_coupled(node.address, to),
            sid,
            nli: self.nli(id),
            supported_nslps: Some(node.supported_nslps.clone()),
            node_list: Some(buffer),
            origin_send_time_ms: Some(now.max(0.0).round() as u64),
            path_stamp: None,
            payload: None,
        };
        if let Some(n) = self.transmit(now, id, to, mode, &msg) {
            self.counts.rumor += n;
            self.state(id).pending_sessions.insert(
                sid,
                PendingSession {
                    peer: to,
                    sent_at: now,
                    mode,
                },
            );
        }
    }

    fn on_arrival(&mut self, now: SimTime, arrival: Arrival) {
        let Ok(msg) = wire::decode(&arrival.packet.bytes) else {
            return;
        };
        if self.node(arrival.node).is_none() {
            return;
        }
        match msg.header.msg_type {
            MessageType::Rumor => {
                if arrival.kind == ArrivalKind::Intercepted
                    && arrival.packet.mode == DeliveryMode::QModeFullPath
                {
                    self.on_intercept(now, arrival, msg);
                } else {
                    self.on_rumor(now, &arrival, msg);
                }
            }
            MessageType::RumorResponse => self.on_response(now, &arrival, msg),
            MessageType::RumorAck => {
                self.state(arrival.node).awaiting_ack.remove(&msg.sid);
            }
            MessageType::EpidemicSignaling => {}
        }
    }

    /// The Rumor's origin as seen from the receiving node, with whatever
    /// metrics the delivery mode allows it to measure.
    fn origin_descriptor(&self, now: SimTime, arrival: &Arrival, msg: &Message) -> NodeDescriptor {
        let mut d = NodeDescriptor::new(msg.nli.identity, msg.nli.address).learned_at(now);
        d.supported_nslps = msg.supported_nslps.clone().unwrap_or_default();
        let ip_hops = u32::from(msg.nli.ip_ttl.saturating_sub(arrival.packet.ip_ttl));
        let latency = msg
            .origin_send_time_ms
            .map(|t| (now - t as f64).max(0.0) as f32);
        match arrival.packet.mode {
            DeliveryMode::DMode => {
                if self.config.approach != Approach::QMode {
                    d.ip_hops = Some(ip_hops);
                    d.latency_ms = latency;
                }
            }
            DeliveryMode::QModeIntercept => {
                d.gist_hops = Some(1);
                d.path_vector = Some(vec![d.address]);
                d.ip_hops = Some(ip_hops);
                d.latency_ms = latency;
            }
            DeliveryMode::QModeFullPath => {
                let mut path: Vec<Address> =
                    msg.path_stamp.iter().flatten().rev().copied().collect();
                path.push(d.address);
                d.gist_hops = Some(path.len() as u32);
                d.path_vector = Some(path);
                d.ip_hops = Some(ip_hops);
                d.latency_ms = latency;
            }
        }
        d
    }

    fn node_list(now: SimTime, msg: &Message) -> impl Iterator<Item = NodeDescriptor> + '_ {
        msg.node_list
            .iter()
            .flatten()
            .map(move |d| d.without_metrics().learned_at(now))
    }

    fn on_intercept(&mut self, now: SimTime, arrival: Arrival, msg: Message) {
        let id = arrival.node;
        let mut learned = vec![self.origin_descriptor(now, &arrival, &msg)];
        learned.extend(Self::node_list(now, &msg));
        self.learn(now, id, learned);

        let mut fwd = msg;
        let own = self.node(id).expect("GIST node state").address;
        fwd.path_stamp.get_or_insert_with(Vec::new).push(own);
        let before = self.net.transmissions();
        if let Ok(scheduled) = self.net.forward(now, arrival, &fwd) {
            self.schedule(scheduled);
        }
        self.counts.forwarded += self.net.transmissions() - before;
    }

    fn on_rumor(&mut self, now: SimTime, arrival: &Arrival, msg: Message) {
        let id = arrival.node;
        let origin = msg.nli.address;
        let buffer = self.outgoing_buffer(id, origin, Some(msg.nli.identity));
        let node = self.node(id).expect("GIST node state");
        let response = Message {
            header: self.header(MessageType::RumorResponse),
            mri: MriObject::path_coupled(node.address, origin),
            sid: msg.sid,
            nli: self.nli(id),
            supported_nslps: Some(node.supported_nslps.clone()),
            node_list: Some(buffer),
            origin_send_time_ms: None,
            // Routes are symmetric, so the origin can reuse the stamps.
            path_stamp: (arrival.packet.mode == DeliveryMode::QModeFullPath)
                .then(|| msg.path_stamp.clone().unwrap_or_default()),
            payload: None,
        };
        if let Some(n) = self.transmit(now, id, origin, DeliveryMode::DMode, &response) {
            self.counts.response += n;
            self.state(id).awaiting_ack.insert(msg.sid, now);
        }
        let mut learned = vec![self.origin_descriptor(now, arrival, &msg)];
        learned.extend(Self::node_list(now, &msg));
        self.learn(now, id, learned);
    }

    fn on_response(&mut self, now: SimTime, arrival: &Arrival, msg: Message) {
        let id = arrival.node;
        let Some(session) = self.state(id).pending_sessions.remove(&msg.sid) else {
            return;
        };
        let mut d = NodeDescriptor::new(msg.nli.identity, msg.nli.address).learned_at(now);
        d.supported_nslps = msg.supported_nslps.clone().unwrap_or_default();
        let measured =
            !(self.config.approach == Approach::QMode && session.mode == DeliveryMode::DMode);
        if measured {
            d.ip_hops = Some(u32::from(
                msg.nli.ip_ttl.saturating_sub(arrival.packet.ip_ttl),
            ));
            d.latency_ms = Some(((now - session.sent_at) / 2.0) as f32);
        }
        match (session.mode, &msg.path_stamp) {
            (DeliveryMode::QModeIntercept, _) => {
                d.gist_hops = Some(1);
                d.path_vector = Some(vec![d.address]);
            }
            (DeliveryMode::QModeFullPath, Some(stamps)) => {
                let mut path = stamps.clone();
                path.push(d.address);
                d.gist_hops = Some(path.len() as u32);
                d.path_vector = Some(path);
            }
            _ => {}
        }

        let ack = Message {
            header: self.header(MessageType::RumorAck),
            mri: MriObject::path_coupled(
                self.node(id).expect("GIST node state").address,
                msg.nli.address,
            ),
            sid: msg.sid,
            nli: self.nli(id),
            supported_nslps: None,
            node_list: None,
            origin_send_time_ms: None,
            path_stamp: None,
            payload: None,
        };
        if let Some(n) = self.transmit(now, id, msg.nli.address, DeliveryMode::DMode, &ack) {
            self.counts.ack += n;
        }
        let mut learned = vec![d];
        learned.extend(Self::node_list(now, &msg));
        self.learn(now, id, learned);
    }

    fn learn(&mut self, now: SimTime, id: NodeId, descriptors: Vec<NodeDescriptor>) {
        let target = self.gist.len().saturating_sub(1);
        let config = self.config.clone();
        let node = self.state(id);
        let was_complete = node.view.len() == target;
        let accepted: Vec<NodeDescriptor> = descriptors
            .into_iter()
            .filter(|d| store_policy(&config, d))
            .collect();
        let changed = node.view.absorb(accepted);
        let is_complete = node.view.len() == target;
        let mut wake = None;
        if changed && node.note_view_change(&config) {
            node.timer_generation += 1;
            wake = Some(node.timer_generation);
        }
        match (was_complete, is_complete) {
            (false, true) => self.complete_views += 1,
            (true, false) => self.complete_views -= 1,
            _ => {}
        }
        if let Some(generation) = wake {
            self.queue.schedule(
                now + config.delta_ms,
                Event::Cycle {
                    node: id,
                    generation,
                },
            );
        }
        if self.converged_at.is_none() && self.complete_views == self.gist.len() {
            self.converged_at = Some(now);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::Topology;

    fn line5() -> Arc<Underlay> {
        Underlay::new(Topology::line(5, &[0, 2, 4], 10.0))
    }

    fn sim(approach: Approach) -> DiscoverySim {
        DiscoverySim::new(line5(), NodeId(0), GossipConfig::with_approach(approach), 1).unwrap()
    }

    fn peer(sim: &DiscoverySim, at: u32, of: u32) -> Option<NodeDescriptor> {
        sim.node(NodeId(at))?
            .view
            .get(&PeerIdentity::for_node(NodeId(of)))
            .cloned()
    }

    fn addr(id: u32) -> Address {
        Address::for_node(NodeId(id))
    }

    #[test]
    fn full_path_rumor_measures_every_hop() {
        let mut s = sim(Approach::QFull);
        s.exchange(NodeId(0), NodeId(4), DeliveryMode::QModeFullPath)
            .unwrap();
        s.run_for(1_000.0);

        let at2 = peer(&s, 2, 0).unwrap();
        assert_eq!(
            (at2.gist_hops, at2.ip_hops, at2.latency_ms),
            (Some(1), Some(2), Some(20.0))
        );
        assert_eq!(at2.path_vector, Some(vec![addr(0)]));

        let at4 = peer(&s, 4, 0).unwrap();
        assert_eq!(
            (at4.gist_hops, at4.ip_hops, at4.latency_ms),
            (Some(2), Some(4), Some(40.0))
        );
        assert_eq!(at4.path_vector, Some(vec![addr(2), addr(0)]));

        let back = peer(&s, 0, 4).unwrap();
        assert_eq!(
            (back.gist_hops, back.ip_hops, back.latency_ms),
            (Some(2), Some(4), Some(40.0))
        );
        assert_eq!(back.path_vector, Some(vec![addr(2), addr(4)]));

        let c = s.counts();
        assert_eq!((c.rumor, c.forwarded, c.response, c.ack), (1, 1, 1, 1));
        assert_eq!(c.total(), s.network().transmissions());
    }

    #[test]
    fn q_mode_rumor_stops_at_first_interceptor() {
        let mut s = sim(Approach::QMode);
        s.exchange(NodeId(0), NodeId(4), DeliveryMode::QModeIntercept)
            .unwrap();
        s.run_for(1_000.0);
        assert!(s.node(NodeId(4)).unwrap().view.is_empty());
        assert_eq!(peer(&s, 2, 0).unwrap().gist_hops, Some(1));
        let learned = peer(&s, 0, 2).unwrap();
        assert_eq!(
            (learned.gist_hops, learned.ip_hops, learned.latency_ms),
            (Some(1), Some(2), Some(20.0))
        );
    }

    #[test]
    fn exhausted_hop_count_never_reaches_destination() {
        let cfg = GossipConfig {
            rumor_gist_hop_limit: 1,
            ..GossipConfig::default()
        };
        let mut s = DiscoverySim::new(line5(), NodeId(0), cfg, 1).unwrap();
        s.exchange(NodeId(0), NodeId(4), DeliveryMode::QModeFullPath)
            .unwrap();
        s.run_for(1_000.0);
        assert!(peer(&s, 2, 0).is_some());
        assert!(s.node(NodeId(4)).unwrap().view.is_empty());
        assert_eq!(s.counts().response, 0);
    }

    #[test]
    fn udp_round_trip_halves_rtt() {
        let mut s = sim(Approach::UdpMode);
        s.exchange(NodeId(0), NodeId(2), DeliveryMode::DMode)
            .unwrap();
        s.run_for(1_000.0);
        let d = peer(&s, 0, 2).unwrap();
        assert_eq!(
            (d.gist_hops, d.ip_hops, d.latency_ms),
            (None, Some(2), Some(20.0))
        );
        assert_eq!(s.counts().total(), 3);
    }

    #[test]
    fn first_exchange_goes_to_tracker() {
        let mut s = DiscoverySim::new(
            line5(),
            NodeId(4),
            GossipConfig::with_approach(Approach::UdpMode),
            3,
        )
        .unwrap();
        s.start();
        s.run_for(9_999.0);
        assert_eq!(peer(&s, 4, 0).unwrap().ip_hops, Some(4));
        assert!(peer(&s, 4, 2).is_some());
    }

    #[test]
    fn q_mode_bootstrap_is_eaten_on_path() {
        let mut s = DiscoverySim::new(
            line5(),
            NodeId(4),
            GossipConfig::with_approach(Approach::QMode),
            3,
        )
        .unwrap();
        s.exchange(NodeId(0), NodeId(4), DeliveryMode::QModeIntercept)
            .unwrap();
        s.run_for(1_000.0);
        assert!(peer(&s, 0, 2).is_some());
        assert!(peer(&s, 4, 0).is_none());
    }

    #[test]
    fn tracker_learns_exactly_the_joiner() {
        let mut s = sim(Approach::UdpMode);
        s.exchange(NodeId(2), NodeId(0), DeliveryMode::DMode)
            .unwrap();
        s.run_for(100.0);
        let ids: Vec<_> = s
            .node(NodeId(0))
            .unwrap()
            .view
            .identities()
            .copied()
            .collect();
        assert_eq!(ids, vec![PeerIdentity::for_node(NodeId(2))]);
    }

    #[test]
    fn duplicate_response_is_ignored() {
        let mut s = sim(Approach::UdpMode);
        s.exchange(NodeId(0), NodeId(2), DeliveryMode::DMode)
            .unwrap();
        s.run_for(1_000.0);
        assert!(s.node(NodeId(0)).unwrap().pending_sessions.is_empty());
        assert_eq!(s.counts().ack, 1);
    }

    #[test]
    fn line5_converges_and_quiets_down() {
        let mut s = sim(Approach::QFull);
        let stats = s.run_until_converged(50);
        assert!(stats.converged);
        s.run_for(s.now() + 400.0 * 10_000.0);
        assert!(s.all_suspended());
        let frozen = s.counts();
        s.run_for(s.now() + 100.0 * 10_000.0);
        assert_eq!(s.counts(), frozen);

        // A new descriptor wakes the node back up.
        let stranger = NodeDescriptor::new(
            PeerIdentity([0xaa; 16]),
            Address("10.9.9.9".parse().unwrap()),
        );
        s.introduce(NodeId(2), vec![stranger]).unwrap();
        let n = s.node(NodeId(2)).unwrap();
        assert_eq!(n.activity, Activity::Active);
        assert_eq!(n.current_delta_ms, 10_000.0);
        s.run_for(s.now() + 10_000.0);
        assert!(s.counts().rumor > frozen.rumor);
    }

    #[test]
    fn same_seed_same_trace() {
        let run = |seed| {
            let mut s = DiscoverySim::new(
                Underlay::new(Topology::nsfnet()),
                NodeId(0),
                GossipConfig::default(),
                seed,
            )
            .unwrap();
            s.run_until_converged(200)
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5).trace_digest, run(6).trace_digest);
    }

    #[test]
    fn tracker_must_be_gist() {
        assert_eq!(
            DiscoverySim::new(line5(), NodeId(1), GossipConfig::default(), 0).err(),
            Some(DiscoveryError::TrackerNotGist(NodeId(1)))
        );
    }

    #[test]
    fn single_gist_node_is_converged_at_zero() {
        let u = Underlay::new(Topology::line(3, &[1], 10.0));
        let mut s = DiscoverySim::new(u, NodeId(1), GossipConfig::default(), 0).unwrap();
        let stats = s.run_until_converged(10);
        assert!(stats.converged);
        assert_eq!(stats.cycles, 0);
    }
}

//! Discrete-event simulation of an AODV network with optional attackers and
//! forwarding verification.
//!
//! The radio is a unit disk with per-node transmit serialization: a node
//! sends one frame at a time, and a frame of `b` bits that starts at `t`
//! reaches its receivers at `t + b / rate + processing_delay`. Frames on the
//! same hop therefore arrive in the order they were sent.

pub mod queue;
pub mod report;
pub mod topology;
pub mod traffic;

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adversary::{AttackKind, AttestationPolicy, Attacker, ForwardDecision, PacketClass};
use crate::aodv::{
    AodvNode, DiscoveryStart, HelloMessage, RerrMessage, RouteLoss, RreqMessage, RreqOutcome, RrepMessage,
    RrepOutcome,
};
use crate::error::EngineError;
use crate::merkle::{leaf_value, Digest, NodeId, Secret};
use crate::metrics::MetricsSeries;
use crate::packet::{DataPacket, Packet};
use crate::scenario::ScenarioConfig;
use crate::verification::{
    apply_verdict, check_round, handle_probe_at_destination, initialize_route_security, relay_attestation,
    AttestationMessage, DealerView, DeliveryLedger, PendingProbe, ProbeMessage, RouteSecurityContext, Verdict,
};

pub use queue::{Scheduled, Scheduler};
pub use report::{
    BlacklistRecord, Counters, InsertionRecord, LossReason, PacketFate, PacketRecord, RouteRecord, RunReport,
    TraceEntry, VerdictRecord,
};
pub use topology::{LinkOverride, LinkState, Position, Topology};
pub use traffic::{TrafficGenerator, TrafficModel};

// Independent random streams derived from the run seed.
const SECRET_STREAM: u64 = 1;
const HELLO_STREAM: u64 = 2;
const FLOW_STREAM_BASE: u64 = 100;
const ATTACKER_STREAM_BASE: u64 = 1000;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// One copy of a transmission arriving at one receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub from: NodeId,
    pub to: NodeId,
    pub packet: Packet,
    /// Set on route replies that originate from a forgery, including when
    /// an honest node relays one. Bookkeeping only; nodes never read it.
    pub forged_by: Option<NodeId>,
    /// A copy picked up by a promiscuous listener rather than the addressee.
    pub overheard: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Timer {
    DiscoveryTimeout { destination: NodeId, attempt: u32 },
    ProbeTimeout { destination: NodeId, route_id: u32, round: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    PacketDelivery(Frame),
    TimerExpiry { node: NodeId, timer: Timer },
    TrafficArrival { flow: usize },
    LinkToggle { a: NodeId, b: NodeId, state: LinkState },
    HelloTick { node: NodeId },
}

impl Event {
    fn describe(&self) -> String {
        match self {
            Event::PacketDelivery(f) => format!(
                "{} {}->{}{}",
                f.packet.label(),
                f.from,
                f.to,
                if f.overheard { " overheard" } else { "" }
            ),
            Event::TimerExpiry { node, timer } => match timer {
                Timer::DiscoveryTimeout { destination, attempt } => {
                    format!("discovery-timeout {node} to {destination} attempt {attempt}")
                }
                Timer::ProbeTimeout {
                    destination,
                    route_id,
                    round,
                } => format!("probe-timeout {node} to {destination} route {route_id} round {round}"),
            },
            Event::TrafficArrival { flow } => format!("traffic flow {flow}"),
            Event::LinkToggle { a, b, state } => format!("link {a}-{b} {state:?}"),
            Event::HelloTick { node } => format!("hello-tick {node}"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Target {
    Unicast(NodeId),
    Broadcast,
}

/// Per-destination state of a node that originates traffic.
#[derive(Debug, Default)]
struct SourceState {
    buffer: VecDeque<DataPacket>,
    discovery_attempt: Option<u32>,
    security: Option<RouteSecurityContext>,
    last_route_id: u32,
}

#[derive(Debug)]
struct SimNode {
    aodv: AodvNode,
    attacker: Option<Attacker>,
    leaf: Digest,
    ledger: DeliveryLedger,
    tx_free_at: f64,
    sources: BTreeMap<NodeId, SourceState>,
}

pub struct Simulation {
    config: ScenarioConfig,
    topology: Topology,
    queue: Scheduler<Event>,
    nodes: Vec<SimNode>,
    dealer: DealerView,
    flows: Vec<(TrafficGenerator, ChaCha8Rng)>,
    metrics: MetricsSeries,
    counters: Counters,
    packets: Vec<PacketRecord>,
    verdicts: Vec<VerdictRecord>,
    blacklistings: Vec<BlacklistRecord>,
    insertions: Vec<InsertionRecord>,
    routes: Vec<RouteRecord>,
    trace: Vec<TraceEntry>,
}

/// Run a scenario for its configured duration.
pub fn run(config: &ScenarioConfig) -> Result<RunReport, EngineError> {
    let mut sim = Simulation::new(config.clone())?;
    sim.run_until(config.duration)?;
    Ok(sim.into_report())
}

impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self, EngineError> {
        config.validate().map_err(|e| EngineError::Config(e.to_string()))?;
        let n = config.node_count;
        let topology = Topology::new(config.positions(), config.radio_radius, config.link_events.clone());

        let mut secret_rng = stream(config.seed, SECRET_STREAM);
        let secrets: Vec<Secret> = (0..n).map(|_| Secret::random(&mut secret_rng)).collect();

        let mut nodes: Vec<SimNode> = secrets
            .iter()
            .enumerate()
            .map(|(i, secret)| {
                let id = NodeId(i as u32);
                let attacker = config
                    .attackers
                    .get(&id)
                    .filter(|p| p.kind != AttackKind::None)
                    .map(|p| {
                        Attacker::new(
                            id,
                            p.clone(),
                            secret.clone(),
                            stream(config.seed, ATTACKER_STREAM_BASE + i as u64),
                        )
                    });
                SimNode {
                    aodv: AodvNode::new(id, config.aodv.clone()),
                    attacker,
                    leaf: leaf_value(id, secret),
                    ledger: DeliveryLedger::default(),
                    tx_free_at: 0.0,
                    sources: BTreeMap::new(),
                }
            })
            .collect();

        // Colluders hand each other their secrets before the run starts.
        let mut disclosures = Vec::new();
        for node in &nodes {
            if let Some(a) = &node.attacker {
                for &peer in &a.profile().colluders {
                    let peer_is_attacker = nodes[peer.index()].attacker.is_some();
                    if peer != a.id() && peer_is_attacker {
                        disclosures.push((peer, a.collude_share_secret(peer).map_err(|e| EngineError::Config(e.to_string()))?));
                    }
                }
            }
        }
        for (peer, d) in disclosures {
            if let Some(a) = nodes[peer.index()].attacker.as_mut() {
                a.accept_disclosure(&d);
            }
        }

        for f in &config.flows {
            let src = &mut nodes[f.source.index()];
            src.aodv.register_flow(f.destination);
            src.sources.entry(f.destination).or_default();
        }

        let dealer = DealerView::new(nodes.iter().map(|s| (s.aodv.id(), s.leaf)));
        let flows = (0..config.flows.len())
            .map(|i| {
                Ok((
                    TrafficGenerator::new(config.traffic)?,
                    stream(config.seed, FLOW_STREAM_BASE + i as u64),
                ))
            })
            .collect::<Result<Vec<_>, EngineError>>()?;

        let metrics = MetricsSeries::new(config.bin_width, config.duration);
        let mut sim = Simulation {
            config,
            topology,
            queue: Scheduler::new(),
            nodes,
            dealer,
            flows,
            metrics,
            counters: Counters::default(),
            packets: Vec::new(),
            verdicts: Vec::new(),
            blacklistings: Vec::new(),
            insertions: Vec::new(),
            routes: Vec::new(),
            trace: Vec::new(),
        };

        let mut hello_rng = stream(sim.config.seed, HELLO_STREAM);
        let interval = sim.config.aodv.hello_interval;
        for i in 0..n {
            let phase = hello_rng.random::<f64>() * interval;
            sim.schedule(phase, Event::HelloTick { node: NodeId(i as u32) })?;
        }
        for flow in 0..sim.flows.len() {
            let (generator, rng) = &mut sim.flows[flow];
            let first = generator.next_arrival(rng, 0.0);
            sim.schedule(first, Event::TrafficArrival { flow })?;
        }
        for o in sim.topology.overrides().to_vec() {
            sim.schedule(
                o.from_time,
                Event::LinkToggle {
                    a: o.a,
                    b: o.b,
                    state: o.state,
                },
            )?;
        }
        Ok(sim)
    }

    pub fn now(&self) -> f64 {
        self.queue.now()
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn aodv(&self, node: NodeId) -> &AodvNode {
        &self.nodes[node.index()].aodv
    }

    pub fn leaf(&self, node: NodeId) -> Digest {
        self.nodes[node.index()].leaf
    }

    pub fn pending_events(&self) -> usize {
        self.queue.len()
    }

    pub fn schedule(&mut self, time: f64, event: Event) -> Result<u64, EngineError> {
        self.queue.schedule(time, event)
    }

    /// Process every event up to and including `t_end`, then park the clock
    /// at `t_end`.
    pub fn run_until(&mut self, t_end: f64) -> Result<(), EngineError> {
        if t_end.is_nan() || t_end < 0.0 {
            return Err(EngineError::NegativeEndTime(t_end));
        }
        while let Some(ev) = self.queue.pop_until(t_end) {
            if self.config.record_trace {
                self.trace.push(TraceEntry {
                    time: ev.time,
                    seq: ev.seq,
                    text: ev.payload.describe(),
                });
            }
            self.dispatch(ev.payload)?;
        }
        self.queue.advance_to(t_end);
        Ok(())
    }

    /// The route the dealer sees from `source`: follow each node's current
    /// next hop toward `destination`. If the walk dead-ends or revisits a
    /// node, the destination is appended directly.
    pub fn trace_route(&self, source: NodeId, destination: NodeId) -> Vec<NodeId> {
        let now = self.now();
        let mut route = vec![source];
        let mut current = source;
        while let Some(next) = self.nodes[current.index()].aodv.next_hop(destination, now) {
            if next == destination || route.contains(&next) {
                break;
            }
            route.push(next);
            current = next;
        }
        route.push(destination);
        route
    }

    pub fn into_report(self) -> RunReport {
        let mut counters = self.counters;
        counters.data_in_flight = self
            .queue
            .pending()
            .filter(|ev| {
                matches!(
                    &ev.payload,
                    Event::PacketDelivery(Frame {
                        packet: Packet::Data(_),
                        overheard: false,
                        ..
                    })
                )
            })
            .count() as u64;
        counters.data_buffered = self
            .nodes
            .iter()
            .flat_map(|n| n.sources.values())
            .map(|s| s.buffer.len() as u64)
            .sum();
        RunReport {
            scenario: self.config.name.clone(),
            seed: self.config.seed,
            duration: self.config.duration,
            positions: self.config.positions(),
            metrics: self.metrics,
            counters,
            packets: self.packets,
            verdicts: self.verdicts,
            blacklistings: self.blacklistings,
            insertions: self.insertions,
            routes: self.routes,
            trace: self.trace,
        }
    }

    fn dispatch(&mut self, event: Event) -> Result<(), EngineError> {
        match event {
            Event::PacketDelivery(frame) => self.on_frame(frame),
            Event::TimerExpiry { node, timer } => match timer {
                Timer::DiscoveryTimeout { destination, attempt } => {
                    self.on_discovery_timeout(node, destination, attempt)
                }
                Timer::ProbeTimeout {
                    destination,
                    route_id,
                    round,
                } => self.on_probe_timeout(node, destination, route_id, round),
            },
            Event::TrafficArrival { flow } => self.on_traffic(flow),
            // Connectivity is a function of time in the topology; the event
            // only marks the change in the trace.
            Event::LinkToggle { .. } => Ok(()),
            Event::HelloTick { node } => self.on_hello_tick(node),
        }
    }

    fn attacker_active(&self, node: NodeId) -> Option<&Attacker> {
        let now = self.now();
        self.nodes[node.index()]
            .attacker
            .as_ref()
            .filter(|a| a.is_active(now))
    }

    // ---- radio ----

    /// Put a packet on the air. Returns `false` if a unicast target is out of
    /// range; the caller decides what that means for the packet.
    fn transmit(
        &mut self,
        from: NodeId,
        target: Target,
        packet: Packet,
        forged_by: Option<NodeId>,
    ) -> Result<bool, EngineError> {
        let now = self.now();
        let bits = packet.size_bits();
        let airtime = bits as f64 / self.config.link_rate_bps;
        let sender = &mut self.nodes[from.index()];
        let start = sender.tx_free_at.max(now);
        sender.tx_free_at = start + airtime;
        let arrival = start + airtime + self.config.processing_delay;

        self.metrics.record_load(now, bits);
        self.counters.transmissions += 1;
        match &packet {
            Packet::Rreq(_) => self.counters.rreq_sent += 1,
            Packet::Rrep(_) => self.counters.rrep_sent += 1,
            Packet::Rerr(_) => self.counters.rerr_sent += 1,
            Packet::Hello(_) => self.counters.hello_sent += 1,
            Packet::Probe(_) => self.counters.probes_sent += 1,
            Packet::Attestation(_) => self.counters.attestations_sent += 1,
            Packet::Data(_) => {}
        }

        match target {
            Target::Broadcast => {
                for to in self.topology.neighbors(from, now) {
                    self.deliver_at(arrival, from, to, packet.clone(), forged_by, false)?;
                }
                Ok(true)
            }
            Target::Unicast(to) => {
                if !self.topology.linked(from, to, now) {
                    if !matches!(packet, Packet::Data(_)) {
                        self.counters.control_lost += 1;
                    }
                    return Ok(false);
                }
                if matches!(packet, Packet::Data(_) | Packet::Attestation(_)) {
                    let listeners: Vec<NodeId> = self
                        .nodes
                        .iter()
                        .filter(|n| n.attacker.as_ref().is_some_and(Attacker::is_promiscuous))
                        .map(|n| n.aodv.id())
                        .filter(|&w| w != from && w != to && self.topology.linked(from, w, now))
                        .collect();
                    for w in listeners {
                        self.deliver_at(arrival, from, w, packet.clone(), None, true)?;
                    }
                }
                self.deliver_at(arrival, from, to, packet, forged_by, false)?;
                Ok(true)
            }
        }
    }

    fn deliver_at(
        &mut self,
        time: f64,
        from: NodeId,
        to: NodeId,
        packet: Packet,
        forged_by: Option<NodeId>,
        overheard: bool,
    ) -> Result<(), EngineError> {
        self.schedule(
            time,
            Event::PacketDelivery(Frame {
                from,
                to,
                packet,
                forged_by,
                overheard,
            }),
        )
        .map(|_| ())
    }

    fn on_frame(&mut self, frame: Frame) -> Result<(), EngineError> {
        let Frame {
            from,
            to,
            packet,
            forged_by,
            overheard,
        } = frame;
        if overheard {
            return self.on_overheard(to, from, packet);
        }
        match packet {
            Packet::Rreq(m) => self.on_rreq(to, from, m),
            Packet::Rrep(m) => self.on_rrep(to, from, m, forged_by),
            Packet::Rerr(m) => {
                let loss = self.nodes[to.index()].aodv.handle_rerr(&m, from);
                self.apply_loss(to, loss)
            }
            Packet::Hello(m) => {
                self.on_hello(to, m);
                Ok(())
            }
            Packet::Data(d) => self.on_data(to, from, d),
            Packet::Probe(p) => self.on_probe(to, p),
            Packet::Attestation(a) => self.on_attestation(to, a),
        }
    }

    fn on_overheard(&mut self, listener: NodeId, transmitter: NodeId, packet: Packet) -> Result<(), EngineError> {
        let now = self.now();
        let Some(attacker) = self.nodes[listener.index()].attacker.as_mut() else {
            return Ok(());
        };
        match packet {
            Packet::Data(d) => {
                if let Some(forged) = attacker.observe_data(d.source, d.destination, transmitter, now) {
                    self.counters.forged_rreps += 1;
                    self.transmit(listener, Target::Unicast(forged.to), Packet::Rrep(forged.rrep), Some(listener))?;
                }
            }
            Packet::Attestation(a) => attacker.observe_attestation(&a),
            _ => {}
        }
        Ok(())
    }

    // ---- routing control ----

    fn on_hello(&mut self, node: NodeId, msg: HelloMessage) {
        let now = self.now();
        self.nodes[node.index()].aodv.handle_hello(&msg, now);
    }

    fn on_hello_tick(&mut self, node: NodeId) -> Result<(), EngineError> {
        let now = self.now();
        let tick = self.nodes[node.index()].aodv.hello_tick(now);
        self.transmit(node, Target::Broadcast, Packet::Hello(tick.hello), None)?;
        self.apply_loss(node, tick.loss)?;
        self.schedule(now + self.config.aodv.hello_interval, Event::HelloTick { node })?;
        Ok(())
    }

    fn on_rreq(&mut self, node: NodeId, from: NodeId, msg: RreqMessage) -> Result<(), EngineError> {
        let now = self.now();
        let outcome = self.nodes[node.index()].aodv.handle_rreq(&msg, from, now);

        let forging = self
            .attacker_active(node)
            .is_some_and(|a| a.profile().kind == AttackKind::ExternalBlackHole);
        if forging {
            let attacker = self.nodes[node.index()].attacker.as_mut().expect("checked above");
            if let Some(forged) = attacker.observe_and_forge_rrep(&msg, from, now) {
                self.counters.forged_rreps += 1;
                self.transmit(node, Target::Unicast(forged.to), Packet::Rrep(forged.rrep), Some(node))?;
            }
            return Ok(());
        }

        match outcome {
            RreqOutcome::Rebroadcast(m) => {
                self.transmit(node, Target::Broadcast, Packet::Rreq(m), None)?;
            }
            RreqOutcome::ReplyWithRrep { to, rrep } => {
                self.transmit(node, Target::Unicast(to), Packet::Rrep(rrep), None)?;
            }
            RreqOutcome::Drop(_) => {}
        }
        Ok(())
    }

    fn on_rrep(
        &mut self,
        node: NodeId,
        from: NodeId,
        msg: RrepMessage,
        forged_by: Option<NodeId>,
    ) -> Result<(), EngineError> {
        let now = self.now();
        match self.nodes[node.index()].aodv.handle_rrep(&msg, from, now) {
            RrepOutcome::Consumed { adopted } => {
                if adopted {
                    if let Some(attacker) = forged_by {
                        self.insertions.push(InsertionRecord {
                            time: now,
                            source: node,
                            destination: msg.destination,
                            attacker,
                        });
                    }
                }
                if self.nodes[node.index()].sources.contains_key(&msg.destination) {
                    self.flush(node, msg.destination)?;
                }
            }
            RrepOutcome::Forward { to, rrep, .. } => {
                self.transmit(node, Target::Unicast(to), Packet::Rrep(rrep), forged_by)?;
            }
            RrepOutcome::Dropped(_) => {}
        }
        Ok(())
    }

    fn apply_loss(&mut self, node: NodeId, loss: RouteLoss) -> Result<(), EngineError> {
        for (to, rerr) in loss.rerrs {
            self.transmit(node, Target::Unicast(to), Packet::Rerr(rerr), None)?;
        }
        // Rounds on a route that broke for ordinary reasons are abandoned
        // rather than judged.
        for d in &loss.invalidated {
            if let Some(s) = self.nodes[node.index()].sources.get_mut(d) {
                s.security = None;
            }
        }
        for d in loss.rediscover {
            self.ensure_discovery(node, d)?;
        }
        Ok(())
    }

    fn ensure_discovery(&mut self, node: NodeId, destination: NodeId) -> Result<(), EngineError> {
        let state = self.nodes[node.index()].sources.entry(destination).or_default();
        if state.discovery_attempt.is_some() {
            return Ok(());
        }
        self.start_discovery(node, destination, 0)
    }

    fn start_discovery(&mut self, node: NodeId, destination: NodeId, attempt: u32) -> Result<(), EngineError> {
        let now = self.now();
        let sim_node = &mut self.nodes[node.index()];
        match sim_node.aodv.originate_route_discovery(destination, now)? {
            DiscoveryStart::RouteKnown(_) => {
                sim_node.sources.entry(destination).or_default().discovery_attempt = None;
                self.flush(node, destination)
            }
            DiscoveryStart::Broadcast(rreq) => {
                sim_node.sources.entry(destination).or_default().discovery_attempt = Some(attempt);
                self.transmit(node, Target::Broadcast, Packet::Rreq(rreq), None)?;
                self.schedule(
                    now + self.config.aodv.discovery_timeout,
                    Event::TimerExpiry {
                        node,
                        timer: Timer::DiscoveryTimeout { destination, attempt },
                    },
                )?;
                Ok(())
            }
        }
    }

    fn on_discovery_timeout(&mut self, node: NodeId, destination: NodeId, attempt: u32) -> Result<(), EngineError> {
        let now = self.now();
        let Some(state) = self.nodes[node.index()].sources.get(&destination) else {
            return Ok(());
        };
        if state.discovery_attempt != Some(attempt) {
            return Ok(());
        }
        if self.nodes[node.index()].aodv.next_hop(destination, now).is_some() {
            return self.flush(node, destination);
        }
        if attempt < self.config.aodv.rreq_retries {
            return self.start_discovery(node, destination, attempt + 1);
        }
        let state = self.nodes[node.index()]
            .sources
            .get_mut(&destination)
            .expect("checked above");
        state.discovery_attempt = None;
        let abandoned: Vec<DataPacket> = state.buffer.drain(..).collect();
        for d in abandoned {
            self.lose(d.id, node, LossReason::DiscoveryFailed);
        }
        Ok(())
    }

    // ---- data ----

    fn on_traffic(&mut self, flow: usize) -> Result<(), EngineError> {
        let now = self.now();
        let wanted = self.config.flows[flow];
        let (generator, rng) = &mut self.flows[flow];
        let size_bits = generator.packet_size(rng);
        let next = generator.next_arrival(rng, now);
        self.schedule(next, Event::TrafficArrival { flow })?;

        let id = self.packets.len() as u64;
        self.packets.push(PacketRecord {
            id,
            flow,
            source: wanted.source,
            destination: wanted.destination,
            created_at: now,
            size_bits,
            hops: 0,
            fate: PacketFate::Pending,
        });
        self.counters.data_generated += 1;
        self.metrics.record_sent(now);

        let packet = DataPacket {
            id,
            flow,
            source: wanted.source,
            destination: wanted.destination,
            created_at: now,
            size_bits,
            route_tag: 0,
        };
        self.nodes[wanted.source.index()]
            .sources
            .entry(wanted.destination)
            .or_default()
            .buffer
            .push_back(packet);
        self.flush(wanted.source, wanted.destination)
    }

    /// Send buffered packets while a route exists; look for one otherwise.
    fn flush(&mut self, node: NodeId, destination: NodeId) -> Result<(), EngineError> {
        loop {
            let now = self.now();
            let sim_node = &mut self.nodes[node.index()];
            if sim_node.aodv.next_hop(destination, now).is_none() {
                break;
            }
            let state = sim_node.sources.entry(destination).or_default();
            state.discovery_attempt = None;
            let Some(packet) = state.buffer.pop_front() else {
                break;
            };
            self.source_send(node, packet)?;
        }
        let pending = self.nodes[node.index()]
            .sources
            .get(&destination)
            .is_some_and(|s| !s.buffer.is_empty());
        if pending {
            self.ensure_discovery(node, destination)?;
        }
        Ok(())
    }

    fn source_send(&mut self, node: NodeId, mut packet: DataPacket) -> Result<(), EngineError> {
        let now = self.now();
        let destination = packet.destination;
        let hop = self.nodes[node.index()]
            .aodv
            .next_hop(destination, now)
            .expect("caller checked for a route");
        self.nodes[node.index()].aodv.touch_route(destination, now);

        let mut probe = None;
        if self.config.defense.enabled {
            let route = self.trace_route(node, destination);
            let stale = self.nodes[node.index()]
                .sources
                .get(&destination)
                .and_then(|s| s.security.as_ref())
                .is_none_or(|ctx| ctx.route != route);
            if stale {
                let state = self.nodes[node.index()].sources.entry(destination).or_default();
                state.last_route_id += 1;
                let route_id = state.last_route_id;
                let ctx = initialize_route_security(route_id, &route, &self.dealer, &self.config.defense)?;
                self.routes.push(RouteRecord {
                    time: now,
                    source: node,
                    route_id,
                    route,
                });
                self.nodes[node.index()]
                    .sources
                    .get_mut(&destination)
                    .expect("created above")
                    .security = Some(ctx);
            }
            let ctx = self.nodes[node.index()]
                .sources
                .get_mut(&destination)
                .and_then(|s| s.security.as_mut())
                .expect("set above");
            packet.route_tag = ctx.route_id;
            ctx.record_data_sent();
            probe = ctx.maybe_initiate_probe(now);
        }

        if self.send_data(node, hop, packet)? {
            if let Some(p) = probe {
                self.launch_probe(node, destination, p)?;
            }
        }
        Ok(())
    }

    /// Hand a data packet to the next hop. On a dead link the packet is lost
    /// and the sender treats the neighbor as gone.
    fn send_data(&mut self, node: NodeId, hop: NodeId, packet: DataPacket) -> Result<bool, EngineError> {
        let id = packet.id;
        self.packets[id as usize].hops += 1;
        if self.transmit(node, Target::Unicast(hop), Packet::Data(packet), None)? {
            return Ok(true);
        }
        self.lose(id, node, LossReason::OutOfRange);
        let loss = self.nodes[node.index()].aodv.handle_link_break(hop);
        self.apply_loss(node, loss)?;
        Ok(false)
    }

    fn lose(&mut self, id: u64, node: NodeId, reason: LossReason) {
        self.packets[id as usize].fate = PacketFate::Lost {
            node,
            at: self.now(),
            reason,
        };
        self.counters.data_lost += 1;
    }

    fn on_data(&mut self, node: NodeId, from: NodeId, packet: DataPacket) -> Result<(), EngineError> {
        let now = self.now();
        let id = packet.id as usize;
        if node == packet.destination {
            self.packets[id].fate = PacketFate::Delivered { at: now };
            self.counters.data_delivered += 1;
            self.metrics.record_received(now);
            self.metrics.record_delay(packet.created_at, now)?;
            let sim_node = &mut self.nodes[node.index()];
            if packet.route_tag != 0 {
                sim_node.ledger.record(packet.source, packet.route_tag);
            }
            sim_node.aodv.touch_route(packet.source, now);
            return Ok(());
        }

        if let Some(attacker) = self.nodes[node.index()].attacker.as_mut() {
            if attacker.adversarial_forward(PacketClass::Data, now) == ForwardDecision::Drop {
                attacker.note_data(packet.source, packet.route_tag);
                self.packets[id].fate = PacketFate::DroppedByAdversary { node, at: now };
                self.counters.data_dropped_adversary += 1;
                return Ok(());
            }
        }

        if self.packets[id].hops as usize >= self.config.node_count {
            self.lose(packet.id, node, LossReason::Loop);
            return Ok(());
        }
        let sim_node = &mut self.nodes[node.index()];
        match sim_node.aodv.next_hop(packet.destination, now) {
            Some(hop) => {
                sim_node.aodv.touch_route(packet.destination, now);
                sim_node.aodv.touch_route(packet.source, now);
                self.send_data(node, hop, packet)?;
            }
            None => {
                self.lose(packet.id, node, LossReason::NoRoute);
                let rerr = RerrMessage {
                    unreachable_destination: packet.destination,
                    origin_of_report: node,
                };
                self.transmit(node, Target::Unicast(from), Packet::Rerr(rerr), None)?;
            }
        }
        Ok(())
    }

    // ---- verification ----

    fn launch_probe(&mut self, node: NodeId, destination: NodeId, pending: PendingProbe) -> Result<(), EngineError> {
        let timer = Timer::ProbeTimeout {
            destination,
            route_id: pending.probe.route_id,
            round: pending.probe.round,
        };
        self.transmit(node, Target::Unicast(pending.first_hop), Packet::Probe(pending.probe), None)?;
        self.schedule(pending.deadline, Event::TimerExpiry { node, timer })?;
        Ok(())
    }

    fn on_probe(&mut self, node: NodeId, probe: ProbeMessage) -> Result<(), EngineError> {
        let now = self.now();
        let Some(&destination) = probe.route.last() else {
            return Ok(());
        };
        if node == destination {
            let sim_node = &mut self.nodes[node.index()];
            let reply = handle_probe_at_destination(sim_node.leaf, &mut sim_node.ledger, &probe);
            let upstream = probe.route[probe.route.len() - 2];
            self.transmit(node, Target::Unicast(upstream), Packet::Attestation(reply), None)?;
            return Ok(());
        }

        if let Some(attacker) = self.nodes[node.index()].attacker.as_mut() {
            match attacker.adversarial_forward(PacketClass::Probe, now) {
                ForwardDecision::Drop => {
                    self.counters.probes_dropped_adversary += 1;
                    return Ok(());
                }
                ForwardDecision::Forward
                    if attacker.is_active(now)
                        && attacker.profile().is_black_hole()
                        && attacker.profile().attestation == AttestationPolicy::Forge =>
                {
                    if let Some((upstream, forged)) = attacker.forge_attestation(&probe) {
                        self.counters.forged_attestations += 1;
                        self.transmit(node, Target::Unicast(upstream), Packet::Attestation(forged), None)?;
                    }
                    return Ok(());
                }
                ForwardDecision::Forward => {}
            }
        }

        if let Some(next) = probe.next_after(node) {
            self.transmit(node, Target::Unicast(next), Packet::Probe(probe), None)?;
        }
        Ok(())
    }

    fn on_attestation(&mut self, node: NodeId, msg: AttestationMessage) -> Result<(), EngineError> {
        let now = self.now();
        if node == msg.source() {
            return self.on_attestation_at_source(node, msg);
        }
        let sim_node = &mut self.nodes[node.index()];
        if let Some(attacker) = sim_node.attacker.as_mut() {
            attacker.observe_attestation(&msg);
            if attacker.adversarial_forward(PacketClass::Attestation, now) == ForwardDecision::Drop {
                return Ok(());
            }
        }
        if let Some((upstream, out)) = relay_attestation(node, sim_node.leaf, &msg) {
            self.transmit(node, Target::Unicast(upstream), Packet::Attestation(out), None)?;
        }
        Ok(())
    }

    fn on_attestation_at_source(&mut self, node: NodeId, msg: AttestationMessage) -> Result<(), EngineError> {
        let Some(&destination) = msg.route.last() else {
            return Ok(());
        };
        self.judge_round(node, destination, msg.route_id, msg.round, Some(&msg))
    }

    fn on_probe_timeout(&mut self, node: NodeId, destination: NodeId, route_id: u32, round: u32) -> Result<(), EngineError> {
        self.judge_round(node, destination, route_id, round, None)
    }

    fn judge_round(
        &mut self,
        node: NodeId,
        destination: NodeId,
        route_id: u32,
        round: u32,
        received: Option<&AttestationMessage>,
    ) -> Result<(), EngineError> {
        let now = self.now();
        let threshold = self.config.defense.gray_threshold;
        let sim_node = &mut self.nodes[node.index()];
        let leaf = sim_node.leaf;
        let Some(ctx) = sim_node
            .sources
            .get_mut(&destination)
            .and_then(|s| s.security.as_mut())
            .filter(|c| c.route_id == route_id)
        else {
            return Ok(());
        };
        let Some(sent) = ctx.close_round(round) else {
            return Ok(());
        };
        let verdict = check_round(ctx, &leaf, received, sent, threshold);
        self.verdicts.push(VerdictRecord {
            time: now,
            source: node,
            destination,
            route_id,
            round,
            verdict: verdict.clone(),
        });
        if verdict == Verdict::Verified {
            return Ok(());
        }

        let sim_node = &mut self.nodes[node.index()];
        let ctx = sim_node
            .sources
            .get_mut(&destination)
            .and_then(|s| s.security.take())
            .expect("checked above");
        if let Some(penalty) = apply_verdict(&mut sim_node.aodv, &ctx, &verdict) {
            if penalty.newly_listed {
                self.blacklistings.push(BlacklistRecord {
                    time: now,
                    by: node,
                    node: penalty.blacklisted,
                });
            }
            self.apply_loss(node, penalty.loss)?;
        }
        Ok(())
    }
}

//! Scenario files.
//!
//! A scenario is a TOML document. Every key is optional except at least one
//! `[[flows]]` entry; omitted keys take the defaults below (10 nodes in a
//! 1 km x 1 km arena, 600 s, exponential traffic with 1 s mean gap and
//! 1024-bit mean size, SHA-1). Unknown keys are rejected.
//!
//! ```toml
//! name = "single-external"
//! seed = 1
//! positions = [[100, 500], [150, 290]]   # omit for seeded random placement
//!
//! [[flows]]
//! source = 0
//! destination = 4
//!
//! [[attackers]]
//! node = 8
//! kind = "external-black-hole"   # internal-black-hole | gray-hole
//! colluders = [8, 9]
//! attestation = "drop"           # or "forge"
//!
//! [defense]
//! enabled = true
//! probe_interval = 10
//! timeout = 2.0
//! gray_threshold = 0.2
//!
//! [[link_events]]
//! a = 1
//! b = 2
//! state = "down"
//! at = 100.0
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::adversary::{AttackKind, AttackProfile, AttestationPolicy, DEFAULT_FORGED_SEQ};
use crate::aodv::AodvConfig;
use crate::engine::topology::{random_connected_positions, random_positions, LinkOverride, LinkState, Position};
use crate::engine::traffic::TrafficModel;
use crate::error::ScenarioError;
use crate::merkle::NodeId;
use crate::verification::DefenseConfig;

pub const DEFAULT_NODES: usize = 10;
pub const DEFAULT_ARENA: (f64, f64) = (1000.0, 1000.0);
pub const DEFAULT_DURATION: f64 = 600.0;
pub const DEFAULT_RADIO_RADIUS: f64 = 250.0;
pub const DEFAULT_TRANSMIT_POWER_W: f64 = 0.0001;
pub const DEFAULT_LINK_RATE_BPS: f64 = 1_000_000.0;
pub const DEFAULT_PROCESSING_DELAY: f64 = 0.001;
pub const DEFAULT_BIN_WIDTH: f64 = 10.0;

const PLACEMENT_STREAM: u64 = 7;
const PLACEMENT_ATTEMPTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HashFunction {
    #[default]
    Sha1,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Placement {
    Fixed(Vec<Position>),
    /// Uniform over the arena, redrawn until connected. Uses the run seed
    /// when `seed` is `None`.
    Random { seed: Option<u64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowSpec {
    pub source: NodeId,
    pub destination: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub duration: f64,
    pub node_count: usize,
    pub arena: (f64, f64),
    pub placement: Placement,
    pub radio_radius: f64,
    /// Kept for the record; connectivity is unit-disk on `radio_radius`.
    pub transmit_power_w: f64,
    pub link_rate_bps: f64,
    pub processing_delay: f64,
    pub bin_width: f64,
    pub hash: HashFunction,
    pub flows: Vec<FlowSpec>,
    pub traffic: TrafficModel,
    pub attackers: BTreeMap<NodeId, AttackProfile>,
    pub defense: DefenseConfig,
    pub aodv: AodvConfig,
    pub link_events: Vec<LinkOverride>,
    /// Keep the full event trace in the run report.
    pub record_trace: bool,
}

impl ScenarioConfig {
    /// All defaults, one flow, random placement.
    pub fn with_flow(source: u32, destination: u32) -> Self {
        ScenarioConfig {
            name: "scenario".to_string(),
            seed: 1,
            duration: DEFAULT_DURATION,
            node_count: DEFAULT_NODES,
            arena: DEFAULT_ARENA,
            placement: Placement::Random { seed: None },
            radio_radius: DEFAULT_RADIO_RADIUS,
            transmit_power_w: DEFAULT_TRANSMIT_POWER_W,
            link_rate_bps: DEFAULT_LINK_RATE_BPS,
            processing_delay: DEFAULT_PROCESSING_DELAY,
            bin_width: DEFAULT_BIN_WIDTH,
            hash: HashFunction::Sha1,
            flows: vec![FlowSpec {
                source: NodeId(source),
                destination: NodeId(destination),
            }],
            traffic: TrafficModel::default(),
            attackers: BTreeMap::new(),
            defense: DefenseConfig {
                enabled: false,
                ..DefenseConfig::default()
            },
            aodv: AodvConfig::default(),
            link_events: Vec::new(),
            record_trace: false,
        }
    }

    pub fn positions(&self) -> Vec<Position> {
        match &self.placement {
            Placement::Fixed(p) => p.clone(),
            Placement::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(self.seed));
                rng.set_stream(PLACEMENT_STREAM);
                random_connected_positions(
                    &mut rng,
                    self.node_count,
                    self.arena,
                    self.radio_radius,
                    PLACEMENT_ATTEMPTS,
                )
                .unwrap_or_else(|| random_positions(&mut rng, self.node_count, self.arena))
            }
        }
    }

    fn check_node(&self, node: NodeId, what: &str) -> Result<(), ScenarioError> {
        if node.index() < self.node_count {
            Ok(())
        } else {
            Err(invalid(format!(
                "{what} refers to node {} but the scenario has {} nodes",
                node.0, self.node_count
            )))
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        positive(self.duration, "duration")?;
        positive(self.radio_radius, "radio_radius")?;
        positive(self.link_rate_bps, "link_rate_bps")?;
        positive(self.bin_width, "bin_width")?;
        positive(self.arena.0, "arena width")?;
        positive(self.arena.1, "arena height")?;
        positive(self.traffic.inter_arrival_mean, "traffic.inter_arrival_mean")?;
        positive(self.traffic.size_mean_bits, "traffic.size_mean_bits")?;
        if !(self.processing_delay >= 0.0 && self.processing_delay.is_finite()) {
            return Err(invalid("processing_delay must be non-negative"));
        }
        if self.node_count < 2 {
            return Err(invalid("a scenario needs at least 2 nodes"));
        }
        if let Placement::Fixed(positions) = &self.placement {
            if positions.len() != self.node_count {
                return Err(invalid(format!(
                    "{} positions given for {} nodes",
                    positions.len(),
                    self.node_count
                )));
            }
            for (i, p) in positions.iter().enumerate() {
                let inside = (0.0..=self.arena.0).contains(&p.x) && (0.0..=self.arena.1).contains(&p.y);
                if !inside {
                    return Err(invalid(format!(
                        "node {i} at ({}, {}) lies outside the {} x {} arena",
                        p.x, p.y, self.arena.0, self.arena.1
                    )));
                }
            }
        }
        if self.flows.is_empty() {
            return Err(invalid("at least one flow is required"));
        }
        for (i, f) in self.flows.iter().enumerate() {
            self.check_node(f.source, &format!("flow {i} source"))?;
            self.check_node(f.destination, &format!("flow {i} destination"))?;
            if f.source == f.destination {
                return Err(invalid(format!("flow {i} has the same source and destination")));
            }
        }
        for (&node, profile) in &self.attackers {
            self.check_node(node, "attacker")?;
            for &c in &profile.colluders {
                self.check_node(c, &format!("colluder of attacker {}", node.0))?;
            }
            if !(0.0..=1.0).contains(&profile.gray_drop_fraction) {
                return Err(invalid(format!(
                    "attacker {}: gray_drop_fraction must lie in [0, 1]",
                    node.0
                )));
            }
        }
        for e in &self.link_events {
            self.check_node(e.a, "link event")?;
            self.check_node(e.b, "link event")?;
            if e.from_time.is_nan() || e.from_time < 0.0 {
                return Err(invalid("link event time must be non-negative"));
            }
        }
        if self.defense.probe_interval_packets == 0 {
            return Err(invalid("defense.probe_interval must be at least 1"));
        }
        positive(self.defense.timeout, "defense.timeout")?;
        if !(0.0..=1.0).contains(&self.defense.gray_threshold) {
            return Err(invalid("defense.gray_threshold must lie in [0, 1]"));
        }
        positive(self.aodv.hello_interval, "aodv.hello_interval")?;
        positive(self.aodv.route_expiry, "aodv.route_expiry")?;
        positive(self.aodv.discovery_timeout, "aodv.discovery_timeout")?;
        if self.aodv.allowed_hello_loss == 0 {
            return Err(invalid("aodv.allowed_hello_loss must be at least 1"));
        }
        Ok(())
    }
}

/// Command-line style adjustments applied on top of a parsed scenario.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub duration: Option<f64>,
    pub defense: Option<bool>,
}

impl Overrides {
    pub fn apply(&self, config: &mut ScenarioConfig) -> Result<(), ScenarioError> {
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(duration) = self.duration {
            config.duration = duration;
        }
        if let Some(enabled) = self.defense {
            config.defense.enabled = enabled;
        }
        config.validate()
    }
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

fn positive(v: f64, what: &str) -> Result<(), ScenarioError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{what} must be positive, got {v}")))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    seed: Option<u64>,
    duration: Option<f64>,
    nodes: Option<usize>,
    arena: Option<[f64; 2]>,
    positions: Option<Vec<[f64; 2]>>,
    placement_seed: Option<u64>,
    radio_radius: Option<f64>,
    transmit_power_w: Option<f64>,
    link_rate_bps: Option<f64>,
    processing_delay: Option<f64>,
    bin_width: Option<f64>,
    hash: Option<HashFunction>,
    #[serde(default)]
    flows: Vec<RawFlow>,
    traffic: Option<RawTraffic>,
    #[serde(default)]
    attackers: Vec<RawAttacker>,
    defense: Option<RawDefense>,
    aodv: Option<RawAodv>,
    #[serde(default)]
    link_events: Vec<RawLinkEvent>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFlow {
    source: Option<u32>,
    destination: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTraffic {
    inter_arrival_mean: Option<f64>,
    size_mean_bits: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAttacker {
    node: u32,
    kind: AttackKind,
    #[serde(default)]
    colluders: Vec<u32>,
    gray_drop_fraction: Option<f64>,
    attestation: Option<AttestationPolicy>,
    forged_seq: Option<u32>,
    active_from: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDefense {
    enabled: Option<bool>,
    probe_interval: Option<u32>,
    timeout: Option<f64>,
    gray_threshold: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAodv {
    hello_interval: Option<f64>,
    allowed_hello_loss: Option<u32>,
    route_expiry: Option<f64>,
    strict_freshness: Option<bool>,
    discovery_timeout: Option<f64>,
    rreq_retries: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLinkEvent {
    a: u32,
    b: u32,
    state: LinkState,
    at: f64,
}

pub fn parse_scenario(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut config = parse_scenario_str(&text)?;
    if config.name == "scenario" {
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            config.name = stem.to_string();
        }
    }
    Ok(config)
}

pub fn parse_scenario_str(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let raw: RawScenario = toml::from_str(text)?;

    let mut flows = Vec::with_capacity(raw.flows.len());
    for (i, f) in raw.flows.iter().enumerate() {
        let source = f
            .source
            .ok_or_else(|| invalid(format!("flow {i} is missing its source")))?;
        let destination = f
            .destination
            .ok_or_else(|| invalid(format!("flow {i} is missing its destination")))?;
        flows.push(FlowSpec {
            source: NodeId(source),
            destination: NodeId(destination),
        });
    }

    let positions: Option<Vec<Position>> = raw
        .positions
        .map(|ps| ps.into_iter().map(|[x, y]| Position::new(x, y)).collect());
    let node_count = raw
        .nodes
        .or(positions.as_ref().map(Vec::len))
        .unwrap_or(DEFAULT_NODES);
    let placement = match positions {
        Some(p) => Placement::Fixed(p),
        None => Placement::Random {
            seed: raw.placement_seed,
        },
    };

    let traffic_defaults = TrafficModel::default();
    let traffic = raw.traffic.map_or(traffic_defaults, |t| TrafficModel {
        inter_arrival_mean: t.inter_arrival_mean.unwrap_or(traffic_defaults.inter_arrival_mean),
        size_mean_bits: t.size_mean_bits.unwrap_or(traffic_defaults.size_mean_bits),
    });

    let mut attackers = BTreeMap::new();
    for a in raw.attackers {
        let node = NodeId(a.node);
        let mut colluders: BTreeSet<NodeId> = a.colluders.into_iter().map(NodeId).collect();
        if !colluders.is_empty() {
            colluders.insert(node);
        }
        let profile = AttackProfile {
            kind: a.kind,
            colluders,
            gray_drop_fraction: a.gray_drop_fraction.unwrap_or(0.0),
            attestation: a.attestation.unwrap_or_default(),
            forged_seq: a.forged_seq.unwrap_or(DEFAULT_FORGED_SEQ),
            active_from: a.active_from.unwrap_or(0.0),
        };
        if attackers.insert(node, profile).is_some() {
            return Err(invalid(format!("attacker {} listed twice", node.0)));
        }
    }

    let defense_defaults = DefenseConfig::default();
    let defense = match raw.defense {
        None => DefenseConfig {
            enabled: false,
            ..defense_defaults
        },
        Some(d) => DefenseConfig {
            enabled: d.enabled.unwrap_or(true),
            probe_interval_packets: d.probe_interval.unwrap_or(defense_defaults.probe_interval_packets),
            timeout: d.timeout.unwrap_or(defense_defaults.timeout),
            gray_threshold: d.gray_threshold.unwrap_or(defense_defaults.gray_threshold),
        },
    };

    let aodv_defaults = AodvConfig::default();
    let aodv = raw.aodv.map_or_else(AodvConfig::default, |a| AodvConfig {
        hello_interval: a.hello_interval.unwrap_or(aodv_defaults.hello_interval),
        allowed_hello_loss: a.allowed_hello_loss.unwrap_or(aodv_defaults.allowed_hello_loss),
        route_expiry: a.route_expiry.unwrap_or(aodv_defaults.route_expiry),
        strict_freshness: a.strict_freshness.unwrap_or(aodv_defaults.strict_freshness),
        discovery_timeout: a.discovery_timeout.unwrap_or(aodv_defaults.discovery_timeout),
        rreq_retries: a.rreq_retries.unwrap_or(aodv_defaults.rreq_retries),
    });

    let link_events = raw
        .link_events
        .into_iter()
        .map(|e| LinkOverride {
            a: NodeId(e.a),
            b: NodeId(e.b),
            state: e.state,
            from_time: e.at,
        })
        .collect();

    let config = ScenarioConfig {
        name: raw.name.unwrap_or_else(|| "scenario".to_string()),
        seed: raw.seed.unwrap_or(1),
        duration: raw.duration.unwrap_or(DEFAULT_DURATION),
        node_count,
        arena: raw.arena.map_or(DEFAULT_ARENA, |[w, h]| (w, h)),
        placement,
        radio_radius: raw.radio_radius.unwrap_or(DEFAULT_RADIO_RADIUS),
        transmit_power_w: raw.transmit_power_w.unwrap_or(DEFAULT_TRANSMIT_POWER_W),
        link_rate_bps: raw.link_rate_bps.unwrap_or(DEFAULT_LINK_RATE_BPS),
        processing_delay: raw.processing_delay.unwrap_or(DEFAULT_PROCESSING_DELAY),
        bin_width: raw.bin_width.unwrap_or(DEFAULT_BIN_WIDTH),
        hash: raw.hash.unwrap_or_default(),
        flows,
        traffic,
        attackers,
        defense,
        aodv,
        link_events,
        record_trace: false,
    };
    config.validate()?;
    Ok(config)
}

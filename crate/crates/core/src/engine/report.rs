//! What a finished run hands back: metrics, packet fates, and defense logs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::engine::topology::Position;
use crate::merkle::NodeId;
use crate::metrics::MetricsSeries;
use crate::verification::Verdict;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossReason {
    /// Unicast to a node no longer in radio range.
    OutOfRange,
    /// Intermediate node had no usable route.
    NoRoute,
    /// The source gave up on route discovery.
    DiscoveryFailed,
    /// Hop limit exceeded.
    Loop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PacketFate {
    Pending,
    Delivered { at: f64 },
    DroppedByAdversary { node: NodeId, at: f64 },
    Lost { node: NodeId, at: f64, reason: LossReason },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PacketRecord {
    pub id: u64,
    pub flow: usize,
    pub source: NodeId,
    pub destination: NodeId,
    pub created_at: f64,
    pub size_bits: u32,
    pub hops: u32,
    pub fate: PacketFate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerdictRecord {
    pub time: f64,
    pub source: NodeId,
    pub destination: NodeId,
    pub route_id: u32,
    pub round: u32,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlacklistRecord {
    pub time: f64,
    pub by: NodeId,
    pub node: NodeId,
}

/// A source adopted a route built on a forged reply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InsertionRecord {
    pub time: f64,
    pub source: NodeId,
    pub destination: NodeId,
    pub attacker: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteRecord {
    pub time: f64,
    pub source: NodeId,
    pub route_id: u32,
    pub route: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub time: f64,
    pub seq: u64,
    pub text: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub data_generated: u64,
    pub data_delivered: u64,
    pub data_dropped_adversary: u64,
    pub data_lost: u64,
    pub data_in_flight: u64,
    pub data_buffered: u64,
    pub transmissions: u64,
    pub control_lost: u64,
    pub rreq_sent: u64,
    pub rrep_sent: u64,
    pub rerr_sent: u64,
    pub hello_sent: u64,
    pub forged_rreps: u64,
    pub probes_sent: u64,
    pub attestations_sent: u64,
    pub probes_dropped_adversary: u64,
    pub forged_attestations: u64,
}

impl Counters {
    /// Every generated data packet is accounted for exactly once.
    pub fn is_conserved(&self) -> bool {
        self.data_generated
            == self.data_delivered
                + self.data_dropped_adversary
                + self.data_lost
                + self.data_in_flight
                + self.data_buffered
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub duration: f64,
    pub positions: Vec<Position>,
    pub metrics: MetricsSeries,
    pub counters: Counters,
    pub packets: Vec<PacketRecord>,
    pub verdicts: Vec<VerdictRecord>,
    pub blacklistings: Vec<BlacklistRecord>,
    pub insertions: Vec<InsertionRecord>,
    pub routes: Vec<RouteRecord>,
    pub trace: Vec<TraceEntry>,
}

fn ratio(delivered: usize, sent: usize) -> Option<f64> {
    (sent > 0).then(|| delivered as f64 / sent as f64)
}

impl RunReport {
    /// Delivered over generated, for packets created in `[from, to)`.
    pub fn delivery_ratio_between(&self, from: f64, to: f64) -> Option<f64> {
        let window: Vec<&PacketRecord> = self
            .packets
            .iter()
            .filter(|p| p.created_at >= from && p.created_at < to)
            .collect();
        let delivered = window
            .iter()
            .filter(|p| matches!(p.fate, PacketFate::Delivered { .. }))
            .count();
        ratio(delivered, window.len())
    }

    pub fn delivery_ratio(&self) -> Option<f64> {
        self.delivery_ratio_between(f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Creation time of the `n`-th packet (1-based) created strictly after `t`.
    pub fn nth_packet_after(&self, t: f64, n: usize) -> Option<f64> {
        self.packets
            .iter()
            .filter(|p| p.created_at > t)
            .nth(n.checked_sub(1)?)
            .map(|p| p.created_at)
    }

    pub fn first_insertion(&self) -> Option<f64> {
        self.insertions.first().map(|i| i.time)
    }

    /// When `node` was first blacklisted by anyone.
    pub fn detection_time(&self, node: NodeId) -> Option<f64> {
        self.blacklistings
            .iter()
            .find(|b| b.node == node)
            .map(|b| b.time)
    }

    pub fn blacklisted_nodes(&self) -> BTreeSet<NodeId> {
        self.blacklistings.iter().map(|b| b.node).collect()
    }

    pub fn suspicions(&self) -> impl Iterator<Item = &VerdictRecord> {
        self.verdicts.iter().filter(|v| !v.verdict.is_verified())
    }

    pub fn gray_suspicions(&self) -> impl Iterator<Item = &VerdictRecord> {
        self.verdicts
            .iter()
            .filter(|v| matches!(v.verdict, Verdict::GrayHoleSuspected { .. }))
    }

    pub fn mean_load_bps(&self) -> f64 {
        self.metrics.mean_load_bps()
    }

    pub fn mean_delay_after(&self, t: f64) -> Option<f64> {
        self.metrics.mean_delay_after(t)
    }

    /// Human-readable run summary.
    pub fn summary(&self) -> String {
        let c = &self.counters;
        let mut s = String::new();
        let _ = writeln!(s, "scenario {} seed {} ({} s)", self.scenario, self.seed, self.duration);
        let _ = writeln!(
            s,
            "data: generated {} delivered {} dropped-by-adversary {} lost {} in-flight {} buffered {}",
            c.data_generated,
            c.data_delivered,
            c.data_dropped_adversary,
            c.data_lost,
            c.data_in_flight,
            c.data_buffered
        );
        match self.delivery_ratio() {
            Some(r) => {
                let _ = writeln!(s, "delivery ratio {r:.4}");
            }
            None => {
                let _ = writeln!(s, "delivery ratio n/a");
            }
        }
        let _ = writeln!(
            s,
            "control: rreq {} rrep {} (forged {}) rerr {} hello {} probes {} attestations {}",
            c.rreq_sent, c.rrep_sent, c.forged_rreps, c.rerr_sent, c.hello_sent, c.probes_sent, c.attestations_sent
        );
        let _ = writeln!(
            s,
            "mean load {:.1} bit/s, mean delay {}",
            self.mean_load_bps(),
            self.mean_delay_after(f64::NEG_INFINITY)
                .map_or_else(|| "n/a".to_string(), |d| format!("{d:.6} s"))
        );
        let verified = self.verdicts.iter().filter(|v| v.verdict.is_verified()).count();
        let _ = writeln!(
            s,
            "verification rounds {} (verified {}, suspicious {})",
            self.verdicts.len(),
            verified,
            self.verdicts.len() - verified
        );
        if self.blacklistings.is_empty() {
            let _ = writeln!(s, "blacklisted: none");
        } else {
            let mut seen: BTreeMap<NodeId, f64> = BTreeMap::new();
            for b in &self.blacklistings {
                seen.entry(b.node).or_insert(b.time);
            }
            for (node, t) in seen {
                let _ = writeln!(s, "blacklisted: {node} at {t:.3} s");
            }
        }
        s
    }
}

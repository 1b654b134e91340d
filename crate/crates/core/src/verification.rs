//! Forwarding verification over an established route.
//!
//! At route establishment a trusted dealer hands the source the expected
//! root of the route's hash chain. Every `probe_interval_packets` data
//! packets the source sends a probe along the route; the destination answers
//! with its leaf and the number of data packets it saw, and each relay
//! prepends its own leaf on the way back. The source folds its own leaf with
//! what came back and compares against the expected root. A missing or
//! mismatching attestation blames the source's next hop.

use std::collections::{BTreeMap, BTreeSet};

use crate::aodv::{AodvNode, RouteLoss};
use crate::error::VerificationError;
use crate::merkle::{fold_root, verify_route_proof, Digest, NodeId, RouteProof};

/// Nodes excluded from all routing decisions of the owner. Only grows.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BlackList {
    entries: BTreeSet<NodeId>,
}

impl BlackList {
    /// Returns `true` if the node was not already listed.
    pub fn insert(&mut self, node: NodeId) -> bool {
        self.entries.insert(node)
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.entries.contains(&node)
    }

    pub fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.entries.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefenseConfig {
    pub enabled: bool,
    pub probe_interval_packets: u32,
    pub timeout: f64,
    pub gray_threshold: f64,
}

impl Default for DefenseConfig {
    fn default() -> Self {
        DefenseConfig {
            enabled: true,
            probe_interval_packets: 10,
            timeout: 2.0,
            gray_threshold: 0.2,
        }
    }
}

/// Out-of-band initializer that knows every node's leaf.
#[derive(Debug, Clone, Default)]
pub struct DealerView {
    leaves: BTreeMap<NodeId, Digest>,
}

impl DealerView {
    pub fn new(leaves: impl IntoIterator<Item = (NodeId, Digest)>) -> Self {
        DealerView {
            leaves: leaves.into_iter().collect(),
        }
    }

    pub fn leaf(&self, node: NodeId) -> Option<Digest> {
        self.leaves.get(&node).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OutstandingRound {
    sent_count: u32,
    deadline: f64,
}

/// What the source knows about one secured route.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteSecurityContext {
    pub route_id: u32,
    /// Source first, destination last.
    pub route: Vec<NodeId>,
    pub expected_root: Digest,
    pub round_counter: u32,
    pub probe_interval_packets: u32,
    pub timeout: f64,
    sent_this_round: u32,
    outstanding: BTreeMap<u32, OutstandingRound>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeMessage {
    pub route_id: u32,
    pub round: u32,
    pub route: Vec<NodeId>,
}

impl ProbeMessage {
    pub fn source(&self) -> NodeId {
        self.route[0]
    }

    /// Next member after `node`, if `node` is on the route and not last.
    pub fn next_after(&self, node: NodeId) -> Option<NodeId> {
        let pos = self.route.iter().position(|&n| n == node)?;
        self.route.get(pos + 1).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttestationMessage {
    pub route_id: u32,
    pub round: u32,
    pub route: Vec<NodeId>,
    pub leaves_so_far: RouteProof,
    /// Data packets of this route the destination received since the
    /// previous probe.
    pub delivered_count: u32,
}

impl AttestationMessage {
    pub fn source(&self) -> NodeId {
        self.route[0]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Verified,
    BlackHoleSuspected { next_hop: NodeId },
    GrayHoleSuspected { route: Vec<NodeId> },
}

impl Verdict {
    pub fn is_verified(&self) -> bool {
        matches!(self, Verdict::Verified)
    }
}

/// A probe the source just emitted and when to give up on it.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingProbe {
    pub probe: ProbeMessage,
    pub first_hop: NodeId,
    pub deadline: f64,
}

pub fn initialize_route_security(
    route_id: u32,
    route: &[NodeId],
    dealer: &DealerView,
    config: &DefenseConfig,
) -> Result<RouteSecurityContext, VerificationError> {
    if route.len() < 2 {
        return Err(VerificationError::RouteTooShort(route.len()));
    }
    let leaves = route
        .iter()
        .map(|&n| dealer.leaf(n).ok_or(VerificationError::UnknownMember(n)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RouteSecurityContext {
        route_id,
        route: route.to_vec(),
        expected_root: fold_root(&leaves)?,
        round_counter: 0,
        probe_interval_packets: config.probe_interval_packets.max(1),
        timeout: config.timeout,
        sent_this_round: 0,
        outstanding: BTreeMap::new(),
    })
}

impl RouteSecurityContext {
    pub fn source(&self) -> NodeId {
        self.route[0]
    }

    pub fn destination(&self) -> NodeId {
        *self.route.last().expect("route has at least two members")
    }

    pub fn first_hop(&self) -> NodeId {
        self.route[1]
    }

    pub fn sent_this_round(&self) -> u32 {
        self.sent_this_round
    }

    pub fn record_data_sent(&mut self) {
        self.sent_this_round += 1;
    }

    /// Emit a probe once `probe_interval_packets` data packets have gone out
    /// in the current round, and open the next round.
    pub fn maybe_initiate_probe(&mut self, now: f64) -> Option<PendingProbe> {
        if self.sent_this_round < self.probe_interval_packets {
            return None;
        }
        let round = self.round_counter;
        let deadline = now + self.timeout;
        self.outstanding.insert(
            round,
            OutstandingRound {
                sent_count: self.sent_this_round,
                deadline,
            },
        );
        self.round_counter += 1;
        self.sent_this_round = 0;
        Some(PendingProbe {
            probe: ProbeMessage {
                route_id: self.route_id,
                round,
                route: self.route.clone(),
            },
            first_hop: self.first_hop(),
            deadline,
        })
    }

    pub fn is_outstanding(&self, round: u32) -> bool {
        self.outstanding.contains_key(&round)
    }

    pub fn outstanding_rounds(&self) -> usize {
        self.outstanding.len()
    }

    /// Close an outstanding round, returning its data packet count.
    pub fn close_round(&mut self, round: u32) -> Option<u32> {
        self.outstanding.remove(&round).map(|r| r.sent_count)
    }

    pub fn deadline(&self, round: u32) -> Option<f64> {
        self.outstanding.get(&round).map(|r| r.deadline)
    }
}

/// Destination-side count of data packets per (source, route).
#[derive(Debug, Clone, Default)]
pub struct DeliveryLedger {
    counts: BTreeMap<(NodeId, u32), u32>,
}

impl DeliveryLedger {
    pub fn record(&mut self, source: NodeId, route_id: u32) {
        *self.counts.entry((source, route_id)).or_default() += 1;
    }

    /// Count since the previous call for this route, then reset.
    pub fn take(&mut self, source: NodeId, route_id: u32) -> u32 {
        self.counts.remove(&(source, route_id)).unwrap_or(0)
    }
}

pub fn handle_probe_at_destination(
    own_leaf: Digest,
    ledger: &mut DeliveryLedger,
    probe: &ProbeMessage,
) -> AttestationMessage {
    AttestationMessage {
        route_id: probe.route_id,
        round: probe.round,
        route: probe.route.clone(),
        leaves_so_far: RouteProof::new(vec![own_leaf]),
        delivered_count: ledger.take(probe.source(), probe.route_id),
    }
}

/// Prepend this relay's leaf and return the upstream neighbor to send to.
/// `None` if `node` is not an intermediate member of the route.
pub fn relay_attestation(
    node: NodeId,
    own_leaf: Digest,
    msg: &AttestationMessage,
) -> Option<(NodeId, AttestationMessage)> {
    let pos = msg.route.iter().position(|&n| n == node)?;
    if pos == 0 || pos + 1 == msg.route.len() {
        return None;
    }
    let mut out = msg.clone();
    out.leaves_so_far.prepend(own_leaf);
    Some((msg.route[pos - 1], out))
}

pub fn check_round(
    ctx: &RouteSecurityContext,
    own_leaf: &Digest,
    received: Option<&AttestationMessage>,
    sent_count: u32,
    gray_threshold: f64,
) -> Verdict {
    let blame = Verdict::BlackHoleSuspected {
        next_hop: ctx.first_hop(),
    };
    let Some(msg) = received else {
        return blame;
    };
    if !verify_route_proof(own_leaf, &msg.leaves_so_far, &ctx.expected_root) {
        return blame;
    }
    if sent_count > 0 {
        let ratio = msg.delivered_count as f64 / sent_count as f64;
        if ratio < 1.0 - gray_threshold {
            return Verdict::GrayHoleSuspected {
                route: ctx.route.clone(),
            };
        }
    }
    Verdict::Verified
}

/// Result of acting on a failed round.
#[derive(Debug, Clone, PartialEq)]
pub struct Penalty {
    pub blacklisted: NodeId,
    pub newly_listed: bool,
    pub loss: RouteLoss,
}

/// Blacklist the suspect, drop every route through it, and ask for a fresh
/// discovery toward the route's destination. A `Verified` verdict changes
/// nothing.
pub fn apply_verdict(
    node: &mut AodvNode,
    ctx: &RouteSecurityContext,
    verdict: &Verdict,
) -> Option<Penalty> {
    let suspect = match verdict {
        Verdict::Verified => return None,
        Verdict::BlackHoleSuspected { next_hop } => *next_hop,
        Verdict::GrayHoleSuspected { route } => route[1],
    };
    let newly_listed = node.blacklist_mut().insert(suspect);
    let mut loss = node.invalidate_via(suspect);
    let dest = ctx.destination();
    let direct = node.invalidate_route(dest, None);
    loss.invalidated.extend(direct.invalidated);
    loss.rerrs.extend(direct.rerrs);
    if !loss.rediscover.contains(&dest) {
        loss.rediscover.push(dest);
    }
    Some(Penalty {
        blacklisted: suspect,
        newly_listed,
        loss,
    })
}

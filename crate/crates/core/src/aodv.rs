//! Per-node AODV state machine.
//!
//! Handlers are pure state transitions: they take a received message and
//! return what the node wants to transmit. The simulator owns the radio and
//! the clock and executes the returned actions.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::AodvError;
use crate::merkle::NodeId;
use crate::verification::BlackList;

#[derive(Debug, Clone, PartialEq)]
pub struct AodvConfig {
    pub hello_interval: f64,
    pub allowed_hello_loss: u32,
    pub route_expiry: f64,
    /// `true`: an intermediate replies only with a strictly newer sequence
    /// number than the request carries. `false`: newer-or-equal.
    pub strict_freshness: bool,
    pub discovery_timeout: f64,
    pub rreq_retries: u32,
}

impl Default for AodvConfig {
    fn default() -> Self {
        AodvConfig {
            hello_interval: 1.0,
            allowed_hello_loss: 2,
            route_expiry: 10.0,
            strict_freshness: true,
            discovery_timeout: 1.0,
            rreq_retries: 2,
        }
    }
}

impl AodvConfig {
    /// Silence after which a neighbor is declared lost.
    pub fn neighbor_timeout(&self) -> f64 {
        self.allowed_hello_loss as f64 * self.hello_interval
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingTableEntry {
    pub destination: NodeId,
    pub next_hop: NodeId,
    pub seq_number: u32,
    pub hop_count: u16,
    pub valid: bool,
    pub expiry: f64,
    /// Upstream neighbors that route to `destination` through this node.
    pub precursors: BTreeSet<NodeId>,
}

impl RoutingTableEntry {
    pub fn is_usable(&self, now: f64) -> bool {
        self.valid && self.expiry > now
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RreqMessage {
    pub origin: NodeId,
    pub origin_seq: u32,
    pub rreq_id: u32,
    pub destination: NodeId,
    pub dest_seq: u32,
    pub hop_count: u16,
    /// The originator's blacklist. Copies relayed by these nodes are
    /// ignored, and cached routes through them are not offered.
    pub avoid: BTreeSet<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RrepMessage {
    pub destination: NodeId,
    pub dest_seq: u32,
    pub hop_count: u16,
    /// The node that asked for the route; the reply travels back to it.
    pub origin: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RerrMessage {
    pub unreachable_destination: NodeId,
    pub origin_of_report: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HelloMessage {
    pub origin: NodeId,
    pub seq: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    Duplicate,
    OwnRequest,
    Blacklisted,
    NoReverseRoute,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RreqOutcome {
    Rebroadcast(RreqMessage),
    ReplyWithRrep { to: NodeId, rrep: RrepMessage },
    Drop(DropReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RrepOutcome {
    /// This node asked for the route.
    Consumed { adopted: bool },
    Forward { to: NodeId, rrep: RrepMessage, adopted: bool },
    Dropped(DropReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiscoveryStart {
    RouteKnown(NodeId),
    Broadcast(RreqMessage),
}

/// Effects of losing routes: who to warn, and whether to look again.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RouteLoss {
    pub invalidated: Vec<NodeId>,
    pub rerrs: Vec<(NodeId, RerrMessage)>,
    pub rediscover: Vec<NodeId>,
}

impl RouteLoss {
    fn merge(&mut self, other: RouteLoss) {
        self.invalidated.extend(other.invalidated);
        self.rerrs.extend(other.rerrs);
        for d in other.rediscover {
            if !self.rediscover.contains(&d) {
                self.rediscover.push(d);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HelloTick {
    pub hello: HelloMessage,
    pub lost_neighbors: Vec<NodeId>,
    pub loss: RouteLoss,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AodvStats {
    pub rreq_originated: u64,
    pub rreq_duplicates: u64,
    pub rrep_no_reverse_route: u64,
    pub ignored_blacklisted: u64,
}

#[derive(Debug, Clone)]
pub struct AodvNode {
    id: NodeId,
    config: AodvConfig,
    own_seq: u32,
    next_rreq_id: u32,
    table: BTreeMap<NodeId, RoutingTableEntry>,
    seen_rreqs: BTreeSet<(NodeId, u32)>,
    neighbors: BTreeMap<NodeId, f64>,
    blacklist: BlackList,
    active_destinations: BTreeSet<NodeId>,
    stats: AodvStats,
}

impl AodvNode {
    pub fn new(id: NodeId, config: AodvConfig) -> Self {
        AodvNode {
            id,
            config,
            own_seq: 0,
            next_rreq_id: 0,
            table: BTreeMap::new(),
            seen_rreqs: BTreeSet::new(),
            neighbors: BTreeMap::new(),
            blacklist: BlackList::default(),
            active_destinations: BTreeSet::new(),
            stats: AodvStats::default(),
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn config(&self) -> &AodvConfig {
        &self.config
    }

    pub fn own_seq(&self) -> u32 {
        self.own_seq
    }

    pub fn stats(&self) -> AodvStats {
        self.stats
    }

    pub fn entry(&self, destination: NodeId) -> Option<&RoutingTableEntry> {
        self.table.get(&destination)
    }

    pub fn entries(&self) -> impl Iterator<Item = &RoutingTableEntry> {
        self.table.values()
    }

    pub fn blacklist(&self) -> &BlackList {
        &self.blacklist
    }

    pub fn blacklist_mut(&mut self) -> &mut BlackList {
        &mut self.blacklist
    }

    pub fn neighbors(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.neighbors.keys().copied()
    }

    /// Mark `destination` as having application traffic originating here.
    pub fn register_flow(&mut self, destination: NodeId) {
        self.active_destinations.insert(destination);
    }

    pub fn has_pending_traffic(&self, destination: NodeId) -> bool {
        self.active_destinations.contains(&destination)
    }

    /// Next hop of a valid, unexpired entry that does not lead through a
    /// blacklisted node.
    pub fn next_hop(&self, destination: NodeId, now: f64) -> Option<NodeId> {
        self.table
            .get(&destination)
            .filter(|e| e.is_usable(now) && !self.blacklist.contains(e.next_hop))
            .map(|e| e.next_hop)
    }

    /// Extend the lifetime of an entry that is carrying traffic.
    pub fn touch_route(&mut self, destination: NodeId, now: f64) {
        let lifetime = now + self.config.route_expiry;
        if let Some(e) = self.table.get_mut(&destination) {
            if e.valid && e.expiry < lifetime {
                e.expiry = lifetime;
            }
        }
    }

    pub fn add_precursor(&mut self, destination: NodeId, precursor: NodeId) {
        if let Some(e) = self.table.get_mut(&destination) {
            e.precursors.insert(precursor);
        }
    }

    pub fn originate_route_discovery(
        &mut self,
        destination: NodeId,
        now: f64,
    ) -> Result<DiscoveryStart, AodvError> {
        if destination == self.id {
            return Err(AodvError::SelfRoute(self.id));
        }
        if let Some(hop) = self.next_hop(destination, now) {
            return Ok(DiscoveryStart::RouteKnown(hop));
        }
        self.own_seq = self.own_seq.saturating_add(1);
        let rreq_id = self.next_rreq_id;
        self.next_rreq_id += 1;
        self.seen_rreqs.insert((self.id, rreq_id));
        self.stats.rreq_originated += 1;
        let dest_seq = self.table.get(&destination).map_or(0, |e| e.seq_number);
        Ok(DiscoveryStart::Broadcast(RreqMessage {
            origin: self.id,
            origin_seq: self.own_seq,
            rreq_id,
            destination,
            dest_seq,
            hop_count: 0,
            avoid: self.blacklist.iter().collect(),
        }))
    }

    /// Install or refresh a route if the offer is at least as good as what
    /// is held. Returns whether the table changed its next hop or freshness.
    fn offer_route(
        &mut self,
        destination: NodeId,
        next_hop: NodeId,
        seq: u32,
        hop_count: u16,
        now: f64,
    ) -> bool {
        if destination == self.id || self.blacklist.contains(next_hop) {
            return false;
        }
        let expiry = now + self.config.route_expiry;
        match self.table.get_mut(&destination) {
            Some(e) if e.is_usable(now) && !self.blacklist.contains(e.next_hop) => {
                let better = seq > e.seq_number || (seq == e.seq_number && hop_count < e.hop_count);
                if better {
                    e.next_hop = next_hop;
                    e.seq_number = seq;
                    e.hop_count = hop_count;
                    e.expiry = expiry;
                    true
                } else {
                    if e.next_hop == next_hop && e.seq_number == seq && e.hop_count == hop_count {
                        e.expiry = e.expiry.max(expiry);
                    }
                    false
                }
            }
            Some(e) => {
                e.next_hop = next_hop;
                e.seq_number = seq;
                e.hop_count = hop_count;
                e.valid = true;
                e.expiry = expiry;
                e.precursors.clear();
                true
            }
            None => {
                self.table.insert(
                    destination,
                    RoutingTableEntry {
                        destination,
                        next_hop,
                        seq_number: seq,
                        hop_count,
                        valid: true,
                        expiry,
                        precursors: BTreeSet::new(),
                    },
                );
                true
            }
        }
    }

    /// Record that `neighbor` was heard. Keeps a one-hop route to it.
    pub fn heard_from(&mut self, neighbor: NodeId, now: f64) {
        self.neighbors.insert(neighbor, now);
        if self.blacklist.contains(neighbor) {
            return;
        }
        let seq = self.table.get(&neighbor).map_or(0, |e| e.seq_number);
        self.offer_route(neighbor, neighbor, seq, 1, now);
    }

    pub fn handle_hello(&mut self, msg: &HelloMessage, now: f64) {
        self.neighbors.insert(msg.origin, now);
        if !self.blacklist.contains(msg.origin) {
            self.offer_route(msg.origin, msg.origin, msg.seq, 1, now);
        }
    }

    pub fn handle_rreq(&mut self, msg: &RreqMessage, from: NodeId, now: f64) -> RreqOutcome {
        if self.blacklist.contains(from) {
            self.stats.ignored_blacklisted += 1;
            return RreqOutcome::Drop(DropReason::Blacklisted);
        }
        if msg.avoid.contains(&from) {
            self.stats.ignored_blacklisted += 1;
            return RreqOutcome::Drop(DropReason::Blacklisted);
        }
        if msg.origin == self.id {
            return RreqOutcome::Drop(DropReason::OwnRequest);
        }
        if !self.seen_rreqs.insert((msg.origin, msg.rreq_id)) {
            self.stats.rreq_duplicates += 1;
            return RreqOutcome::Drop(DropReason::Duplicate);
        }
        self.heard_from(from, now);
        self.offer_route(msg.origin, from, msg.origin_seq, msg.hop_count + 1, now);

        if msg.destination == self.id {
            if msg.dest_seq == self.own_seq.wrapping_add(1) {
                self.own_seq = msg.dest_seq;
            }
            return RreqOutcome::ReplyWithRrep {
                to: from,
                rrep: RrepMessage {
                    destination: self.id,
                    dest_seq: self.own_seq,
                    hop_count: 0,
                    origin: msg.origin,
                },
            };
        }

        let strict = self.config.strict_freshness;
        if let Some(e) = self.table.get(&msg.destination) {
            let fresh = if strict {
                e.seq_number > msg.dest_seq
            } else {
                e.seq_number >= msg.dest_seq
            };
            let avoided = self.blacklist.contains(e.next_hop) || msg.avoid.contains(&e.next_hop);
            if e.is_usable(now) && !avoided && fresh {
                let rrep = RrepMessage {
                    destination: msg.destination,
                    dest_seq: e.seq_number,
                    hop_count: e.hop_count,
                    origin: msg.origin,
                };
                self.add_precursor(msg.destination, from);
                return RreqOutcome::ReplyWithRrep { to: from, rrep };
            }
        }

        RreqOutcome::Rebroadcast(RreqMessage {
            hop_count: msg.hop_count + 1,
            ..msg.clone()
        })
    }

    pub fn handle_rrep(&mut self, msg: &RrepMessage, from: NodeId, now: f64) -> RrepOutcome {
        if self.blacklist.contains(from) {
            self.stats.ignored_blacklisted += 1;
            return RrepOutcome::Dropped(DropReason::Blacklisted);
        }
        self.heard_from(from, now);
        let adopted = self.offer_route(msg.destination, from, msg.dest_seq, msg.hop_count + 1, now);
        if msg.origin == self.id {
            return RrepOutcome::Consumed { adopted };
        }
        match self.next_hop(msg.origin, now) {
            Some(to) => {
                self.add_precursor(msg.destination, to);
                RrepOutcome::Forward {
                    to,
                    rrep: RrepMessage {
                        hop_count: msg.hop_count + 1,
                        ..*msg
                    },
                    adopted,
                }
            }
            None => {
                self.stats.rrep_no_reverse_route += 1;
                RrepOutcome::Dropped(DropReason::NoReverseRoute)
            }
        }
    }

    /// Invalidate `destination` and warn its precursors.
    pub fn invalidate_route(&mut self, destination: NodeId, skip: Option<NodeId>) -> RouteLoss {
        let mut loss = RouteLoss::default();
        let Some(e) = self.table.get_mut(&destination) else {
            return loss;
        };
        if !e.valid {
            return loss;
        }
        e.valid = false;
        loss.invalidated.push(destination);
        let precursors = std::mem::take(&mut e.precursors);
        for p in precursors {
            if Some(p) != skip && p != self.id {
                loss.rerrs.push((
                    p,
                    RerrMessage {
                        unreachable_destination: destination,
                        origin_of_report: self.id,
                    },
                ));
            }
        }
        if self.active_destinations.contains(&destination) {
            loss.rediscover.push(destination);
        }
        loss
    }

    /// Invalidate every route whose next hop is `neighbor`.
    pub fn invalidate_via(&mut self, neighbor: NodeId) -> RouteLoss {
        let affected: Vec<NodeId> = self
            .table
            .values()
            .filter(|e| e.valid && e.next_hop == neighbor)
            .map(|e| e.destination)
            .collect();
        let mut loss = RouteLoss::default();
        for d in affected {
            loss.merge(self.invalidate_route(d, None));
        }
        loss
    }

    pub fn handle_link_break(&mut self, neighbor: NodeId) -> RouteLoss {
        self.neighbors.remove(&neighbor);
        self.invalidate_via(neighbor)
    }

    pub fn handle_rerr(&mut self, msg: &RerrMessage, from: NodeId) -> RouteLoss {
        let dest = msg.unreachable_destination;
        match self.table.get(&dest) {
            Some(e) if e.valid && e.next_hop == from => self.invalidate_route(dest, Some(from)),
            _ => RouteLoss::default(),
        }
    }

    /// Emit a Hello and expire silent neighbors.
    pub fn hello_tick(&mut self, now: f64) -> HelloTick {
        let limit = self.config.neighbor_timeout();
        let lost: Vec<NodeId> = self
            .neighbors
            .iter()
            .filter(|(_, &heard)| now - heard > limit)
            .map(|(&n, _)| n)
            .collect();
        let mut loss = RouteLoss::default();
        for &n in &lost {
            loss.merge(self.handle_link_break(n));
        }
        HelloTick {
            hello: HelloMessage {
                origin: self.id,
                seq: self.own_seq,
            },
            lost_neighbors: lost,
            loss,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(i: u32) -> NodeId {
        NodeId(i)
    }

    fn node(i: u32) -> AodvNode {
        AodvNode::new(n(i), AodvConfig::default())
    }

    fn rreq(origin: u32, id: u32, dest: u32, dest_seq: u32) -> RreqMessage {
        RreqMessage {
            origin: n(origin),
            origin_seq: 1,
            rreq_id: id,
            destination: n(dest),
            dest_seq,
            hop_count: 0,
            avoid: BTreeSet::new(),
        }
    }

    fn rrep(dest: u32, seq: u32, hops: u16, origin: u32) -> RrepMessage {
        RrepMessage {
            destination: n(dest),
            dest_seq: seq,
            hop_count: hops,
            origin: n(origin),
        }
    }

    #[test]
    fn discovery_broadcasts_without_route() {
        let mut s = node(0);
        match s.originate_route_discovery(n(4), 0.0).unwrap() {
            DiscoveryStart::Broadcast(m) => {
                assert_eq!(m.origin, n(0));
                assert_eq!(m.destination, n(4));
                assert_eq!(m.hop_count, 0);
            }
            other => panic!("expected broadcast, got {other:?}"),
        }
    }

    #[test]
    fn discovery_uses_known_route() {
        let mut s = node(0);
        s.handle_rrep(&rrep(4, 3, 2, 0), n(1), 0.0);
        assert_eq!(
            s.originate_route_discovery(n(4), 0.5).unwrap(),
            DiscoveryStart::RouteKnown(n(1))
        );
    }

    #[test]
    fn discovery_ids_are_unique() {
        let mut s = node(0);
        let ids: Vec<u32> = (0..2)
            .map(|_| match s.originate_route_discovery(n(4), 0.0).unwrap() {
                DiscoveryStart::Broadcast(m) => m.rreq_id,
                _ => unreachable!(),
            })
            .collect();
        assert_ne!(ids[0], ids[1]);
    }

    #[test]
    fn discovery_to_self_is_an_error() {
        let mut s = node(3);
        assert_eq!(
            s.originate_route_discovery(n(3), 0.0),
            Err(AodvError::SelfRoute(n(3)))
        );
    }

    #[test]
    fn intermediate_with_fresher_route_replies() {
        let mut a = node(1);
        a.handle_rrep(&rrep(4, 12, 1, 1), n(2), 0.0);
        let out = a.handle_rreq(&rreq(0, 0, 4, 9), n(0), 0.1);
        match out {
            RreqOutcome::ReplyWithRrep { to, rrep } => {
                assert_eq!(to, n(0));
                assert_eq!(rrep.dest_seq, 12);
                assert_eq!(rrep.hop_count, 2);
            }
            other => panic!("expected reply, got {other:?}"),
        }
    }

    #[test]
    fn intermediate_with_stale_route_rebroadcasts() {
        let mut a = node(1);
        a.handle_rrep(&rrep(4, 9, 1, 1), n(2), 0.0);
        let out = a.handle_rreq(&rreq(0, 0, 4, 12), n(0), 0.1);
        assert!(matches!(out, RreqOutcome::Rebroadcast(m) if m.hop_count == 1));
    }

    #[test]
    fn equal_sequence_number_is_not_fresh_when_strict() {
        let mut strict = node(1);
        strict.handle_rrep(&rrep(4, 9, 1, 1), n(2), 0.0);
        assert!(matches!(
            strict.handle_rreq(&rreq(0, 0, 4, 9), n(0), 0.1),
            RreqOutcome::Rebroadcast(_)
        ));

        let mut lax = AodvNode::new(
            n(1),
            AodvConfig {
                strict_freshness: false,
                ..AodvConfig::default()
            },
        );
        lax.handle_rrep(&rrep(4, 9, 1, 1), n(2), 0.0);
        assert!(matches!(
            lax.handle_rreq(&rreq(0, 0, 4, 9), n(0), 0.1),
            RreqOutcome::ReplyWithRrep { .. }
        ));
    }

    #[test]
    fn duplicate_rreq_is_dropped() {
        let mut a = node(1);
        let m = rreq(0, 5, 4, 0);
        assert!(matches!(a.handle_rreq(&m, n(0), 0.0), RreqOutcome::Rebroadcast(_)));
        assert_eq!(
            a.handle_rreq(&m, n(2), 0.0),
            RreqOutcome::Drop(DropReason::Duplicate)
        );
    }

    #[test]
    fn destination_replies_with_own_sequence_number() {
        let mut d = node(4);
        let out = d.handle_rreq(&rreq(0, 0, 4, 0), n(3), 0.0);
        assert_eq!(
            out,
            RreqOutcome::ReplyWithRrep {
                to: n(3),
                rrep: rrep(4, 0, 0, 0)
            }
        );
    }

    #[test]
    fn rreq_installs_reverse_route() {
        let mut a = node(1);
        let mut m = rreq(0, 0, 4, 0);
        m.hop_count = 2;
        a.handle_rreq(&m, n(7), 0.0);
        let e = a.entry(n(0)).unwrap();
        assert_eq!(e.next_hop, n(7));
        assert_eq!(e.hop_count, 3);
    }

    #[test]
    fn newer_rrep_replaces_older() {
        let mut s = node(0);
        s.handle_rrep(&rrep(4, 7, 1, 0), n(1), 0.0);
        assert_eq!(
            s.handle_rrep(&rrep(4, 10, 3, 0), n(2), 0.1),
            RrepOutcome::Consumed { adopted: true }
        );
        assert_eq!(s.next_hop(n(4), 0.2), Some(n(2)));
    }

    #[test]
    fn shorter_rrep_wins_on_equal_sequence() {
        let mut s = node(0);
        s.handle_rrep(&rrep(4, 10, 3, 0), n(1), 0.0);
        s.handle_rrep(&rrep(4, 10, 1, 0), n(2), 0.1);
        let e = s.entry(n(4)).unwrap();
        assert_eq!((e.next_hop, e.hop_count), (n(2), 2));
        // and a longer one afterwards does not displace it
        assert_eq!(
            s.handle_rrep(&rrep(4, 10, 5, 0), n(3), 0.2),
            RrepOutcome::Consumed { adopted: false }
        );
    }

    #[test]
    fn first_rrep_into_empty_table_is_adopted() {
        let mut s = node(0);
        assert_eq!(
            s.handle_rrep(&rrep(4, 1, 2, 0), n(1), 0.0),
            RrepOutcome::Consumed { adopted: true }
        );
    }

    #[test]
    fn rrep_is_forwarded_along_reverse_route() {
        let mut a = node(1);
        a.handle_rreq(&rreq(0, 0, 4, 0), n(0), 0.0);
        let out = a.handle_rrep(&rrep(4, 1, 1, 0), n(2), 0.1);
        assert_eq!(
            out,
            RrepOutcome::Forward {
                to: n(0),
                rrep: rrep(4, 1, 2, 0),
                adopted: true
            }
        );
        assert!(a.entry(n(4)).unwrap().precursors.contains(&n(0)));
    }

    #[test]
    fn rrep_without_reverse_route_is_dropped_and_counted() {
        let mut a = node(1);
        let out = a.handle_rrep(&rrep(4, 1, 1, 0), n(2), 0.1);
        assert_eq!(out, RrepOutcome::Dropped(DropReason::NoReverseRoute));
        assert_eq!(a.stats().rrep_no_reverse_route, 1);
    }

    #[test]
    fn neighbor_liveness_follows_hello_allowance() {
        let mut a = node(1);
        a.handle_hello(&HelloMessage { origin: n(2), seq: 0 }, 10.0);
        assert!(a.hello_tick(11.0).lost_neighbors.is_empty());
        assert!(a.hello_tick(12.0).lost_neighbors.is_empty());
        assert_eq!(a.hello_tick(13.0).lost_neighbors, vec![n(2)]);
    }

    #[test]
    fn losing_next_hop_of_active_route_emits_rerr() {
        let mut a = node(1);
        a.handle_rreq(&rreq(0, 0, 4, 0), n(0), 0.0);
        a.handle_rrep(&rrep(4, 1, 1, 0), n(2), 0.0);
        let tick = a.hello_tick(5.0);
        assert!(tick.lost_neighbors.contains(&n(2)));
        assert!(tick.loss.rerrs.contains(&(
            n(0),
            RerrMessage {
                unreachable_destination: n(4),
                origin_of_report: n(1)
            }
        )));
    }

    #[test]
    fn source_rediscovers_after_rerr() {
        let mut s = node(0);
        s.register_flow(n(4));
        s.handle_rrep(&rrep(4, 1, 2, 0), n(1), 0.0);
        let loss = s.handle_rerr(
            &RerrMessage {
                unreachable_destination: n(4),
                origin_of_report: n(1),
            },
            n(1),
        );
        assert_eq!(loss.rediscover, vec![n(4)]);
        assert_eq!(s.next_hop(n(4), 0.1), None);
        assert!(matches!(
            s.originate_route_discovery(n(4), 0.1).unwrap(),
            DiscoveryStart::Broadcast(_)
        ));
    }

    #[test]
    fn rerr_for_unknown_destination_is_a_no_op() {
        let mut s = node(0);
        let loss = s.handle_rerr(
            &RerrMessage {
                unreachable_destination: n(9),
                origin_of_report: n(1),
            },
            n(1),
        );
        assert_eq!(loss, RouteLoss::default());
    }

    #[test]
    fn intermediate_invalidates_and_forwards_rerr() {
        let mut a = node(1);
        a.handle_rreq(&rreq(0, 0, 4, 0), n(0), 0.0);
        a.handle_rrep(&rrep(4, 1, 1, 0), n(2), 0.0);
        let loss = a.handle_rerr(
            &RerrMessage {
                unreachable_destination: n(4),
                origin_of_report: n(2),
            },
            n(2),
        );
        assert_eq!(loss.invalidated, vec![n(4)]);
        assert_eq!(loss.rerrs.len(), 1);
        assert_eq!(loss.rerrs[0].0, n(0));
        assert!(loss.rediscover.is_empty());
    }

    #[test]
    fn next_hop_lookup() {
        let mut s = node(0);
        s.handle_rrep(&rrep(4, 1, 2, 0), n(1), 0.0);
        assert_eq!(s.next_hop(n(4), 1.0), Some(n(1)));
        // expires without use
        assert_eq!(s.next_hop(n(4), 10.5), None);
        s.touch_route(n(4), 5.0);
        assert_eq!(s.next_hop(n(4), 10.5), Some(n(1)));
        s.invalidate_route(n(4), None);
        assert_eq!(s.next_hop(n(4), 10.6), None);
    }

    #[test]
    fn blacklisted_next_hop_is_not_used() {
        let mut s = node(0);
        s.handle_rrep(&rrep(4, 1, 2, 0), n(1), 0.0);
        s.blacklist_mut().insert(n(1));
        assert_eq!(s.next_hop(n(4), 0.5), None);
        assert_eq!(
            s.handle_rrep(&rrep(4, 99, 1, 0), n(1), 0.6),
            RrepOutcome::Dropped(DropReason::Blacklisted)
        );
        assert_eq!(
            s.handle_rreq(&rreq(7, 0, 4, 0), n(1), 0.6),
            RreqOutcome::Drop(DropReason::Blacklisted)
        );
    }

    #[test]
    fn discovery_carries_the_blacklist() {
        let mut s = node(0);
        s.blacklist_mut().insert(n(8));
        match s.originate_route_discovery(n(4), 0.0).unwrap() {
            DiscoveryStart::Broadcast(m) => assert!(m.avoid.contains(&n(8))),
            other => panic!("expected broadcast, got {other:?}"),
        }
    }

    #[test]
    fn copies_relayed_by_avoided_nodes_are_ignored() {
        let mut p = node(5);
        let mut m = rreq(0, 0, 4, 0);
        m.avoid.insert(n(8));
        assert_eq!(
            p.handle_rreq(&m, n(8), 0.0),
            RreqOutcome::Drop(DropReason::Blacklisted)
        );
        // not marked as seen: the copy through an honest relay still counts
        assert!(matches!(p.handle_rreq(&m, n(9), 0.0), RreqOutcome::Rebroadcast(_)));
        assert_eq!(p.entry(n(0)).unwrap().next_hop, n(9));
    }

    #[test]
    fn cached_route_through_avoided_node_is_not_offered() {
        let mut a = node(1);
        a.handle_rrep(&rrep(4, 12, 1, 1), n(8), 0.0);
        let mut m = rreq(0, 0, 4, 9);
        m.avoid.insert(n(8));
        assert!(matches!(a.handle_rreq(&m, n(0), 0.1), RreqOutcome::Rebroadcast(_)));
    }

    #[test]
    fn own_sequence_number_is_monotone() {
        let mut d = node(4);
        let mut last = d.own_seq();
        for (i, ds) in [0u32, 1, 2, 2, 7, 3, 4].into_iter().enumerate() {
            d.handle_rreq(&rreq(0, i as u32, 4, ds), n(3), i as f64);
            let _ = d.originate_route_discovery(n(9), i as f64);
            assert!(d.own_seq() >= last);
            last = d.own_seq();
        }
    }
}

//! Malicious node behaviors layered over an otherwise normal AODV node.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::aodv::{RreqMessage, RrepMessage};
use crate::error::AdversaryError;
use crate::merkle::{leaf_value, Digest, NodeId, RouteProof, Secret};
use crate::verification::{AttestationMessage, DeliveryLedger, ProbeMessage};

/// Sequence number a forged reply advertises unless configured otherwise.
pub const DEFAULT_FORGED_SEQ: u32 = 1 << 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    #[default]
    None,
    InternalBlackHole,
    ExternalBlackHole,
    GrayHole,
}

/// How a black hole treats probes and attestations routed through it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttestationPolicy {
    /// Swallow them; the source times out.
    #[default]
    Drop,
    /// Answer probes with the best attestation it can assemble from its own,
    /// shared and previously overheard leaves.
    Forge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackProfile {
    pub kind: AttackKind,
    pub colluders: BTreeSet<NodeId>,
    pub gray_drop_fraction: f64,
    pub attestation: AttestationPolicy,
    pub forged_seq: u32,
    /// Behaves honestly before this time.
    pub active_from: f64,
}

impl Default for AttackProfile {
    fn default() -> Self {
        AttackProfile {
            kind: AttackKind::None,
            colluders: BTreeSet::new(),
            gray_drop_fraction: 0.0,
            attestation: AttestationPolicy::Drop,
            forged_seq: DEFAULT_FORGED_SEQ,
            active_from: 0.0,
        }
    }
}

impl AttackProfile {
    pub fn is_black_hole(&self) -> bool {
        matches!(
            self.kind,
            AttackKind::InternalBlackHole | AttackKind::ExternalBlackHole
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketClass {
    Data,
    Control,
    Probe,
    Attestation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardDecision {
    Drop,
    Forward,
}

/// A colluder handing its secret to a peer. Travels as shared state, not
/// over the radio.
#[derive(Debug, Clone)]
pub struct SecretDisclosure {
    pub owner: NodeId,
    pub secret: Secret,
}

/// Forged reply and the neighbor it is unicast to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForgedReply {
    pub to: NodeId,
    pub rrep: RrepMessage,
}

#[derive(Debug, Clone)]
pub struct Attacker {
    id: NodeId,
    profile: AttackProfile,
    secret: Secret,
    /// Leaves it can emit: its own plus those of colluders that shared.
    known_leaves: BTreeMap<NodeId, Digest>,
    /// Leaves seen passing by in attestations, replayable later.
    overheard_leaves: BTreeMap<NodeId, Digest>,
    forged_requests: BTreeSet<(NodeId, u32)>,
    forged_pairs: BTreeSet<(NodeId, NodeId)>,
    received_data: DeliveryLedger,
    rng: ChaCha8Rng,
}

impl Attacker {
    pub fn new(id: NodeId, profile: AttackProfile, secret: Secret, rng: ChaCha8Rng) -> Self {
        let mut known_leaves = BTreeMap::new();
        known_leaves.insert(id, leaf_value(id, &secret));
        Attacker {
            id,
            profile,
            secret,
            known_leaves,
            overheard_leaves: BTreeMap::new(),
            forged_requests: BTreeSet::new(),
            forged_pairs: BTreeSet::new(),
            received_data: DeliveryLedger::default(),
            rng,
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn profile(&self) -> &AttackProfile {
        &self.profile
    }

    pub fn is_active(&self, now: f64) -> bool {
        self.profile.kind != AttackKind::None && now >= self.profile.active_from
    }

    /// Whether the radio should hand this node copies of traffic it is not
    /// addressed by.
    pub fn is_promiscuous(&self) -> bool {
        self.profile.kind == AttackKind::ExternalBlackHole
    }

    /// External black hole reacting to an overheard route request: reply to
    /// the neighbor it came from, claiming a huge sequence number and a
    /// one-hop distance. Fires once per request.
    pub fn observe_and_forge_rrep(
        &mut self,
        observed: &RreqMessage,
        from: NodeId,
        now: f64,
    ) -> Option<ForgedReply> {
        if !self.can_forge_for(observed.origin, observed.destination, now) {
            return None;
        }
        if !self.forged_requests.insert((observed.origin, observed.rreq_id)) {
            return None;
        }
        self.forged_pairs.insert((observed.origin, observed.destination));
        Some(self.forged_reply(observed.origin, observed.destination, from))
    }

    /// External black hole noticing a data flow it is not part of. Fires at
    /// most once per (origin, destination) and never for a pair it already
    /// answered.
    pub fn observe_data(
        &mut self,
        origin: NodeId,
        destination: NodeId,
        transmitter: NodeId,
        now: f64,
    ) -> Option<ForgedReply> {
        if !self.can_forge_for(origin, destination, now) {
            return None;
        }
        if !self.forged_pairs.insert((origin, destination)) {
            return None;
        }
        Some(self.forged_reply(origin, destination, transmitter))
    }

    fn can_forge_for(&self, origin: NodeId, destination: NodeId, now: f64) -> bool {
        self.profile.kind == AttackKind::ExternalBlackHole
            && self.is_active(now)
            && origin != self.id
            && destination != self.id
    }

    fn forged_reply(&self, origin: NodeId, destination: NodeId, to: NodeId) -> ForgedReply {
        ForgedReply {
            to,
            rrep: RrepMessage {
                destination,
                dest_seq: self.profile.forged_seq,
                hop_count: 1,
                origin,
            },
        }
    }

    pub fn adversarial_forward(&mut self, class: PacketClass, now: f64) -> ForwardDecision {
        if !self.is_active(now) {
            return ForwardDecision::Forward;
        }
        match (self.profile.kind, class) {
            (AttackKind::None, _) | (_, PacketClass::Control) => ForwardDecision::Forward,
            (AttackKind::GrayHole, PacketClass::Data) => {
                if self.rng.random::<f64>() < self.profile.gray_drop_fraction {
                    ForwardDecision::Drop
                } else {
                    ForwardDecision::Forward
                }
            }
            (AttackKind::GrayHole, _) => ForwardDecision::Forward,
            (_, PacketClass::Data) => ForwardDecision::Drop,
            (_, PacketClass::Probe | PacketClass::Attestation) => match self.profile.attestation {
                AttestationPolicy::Drop => ForwardDecision::Drop,
                AttestationPolicy::Forge => ForwardDecision::Forward,
            },
        }
    }

    /// Hand this node's secret to a fellow colluder.
    pub fn collude_share_secret(&self, peer: NodeId) -> Result<SecretDisclosure, AdversaryError> {
        if peer == self.id || !self.profile.colluders.contains(&peer) {
            return Err(AdversaryError::NotColluder {
                owner: self.id,
                requester: peer,
            });
        }
        Ok(SecretDisclosure {
            owner: self.id,
            secret: self.secret.clone(),
        })
    }

    pub fn accept_disclosure(&mut self, disclosure: &SecretDisclosure) {
        self.known_leaves
            .insert(disclosure.owner, leaf_value(disclosure.owner, &disclosure.secret));
    }

    /// Nodes whose leaf this attacker can produce.
    pub fn producible_leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.known_leaves.keys().copied()
    }

    pub fn note_data(&mut self, source: NodeId, route_tag: u32) {
        self.received_data.record(source, route_tag);
    }

    pub fn observe_attestation(&mut self, msg: &AttestationMessage) {
        let Some(start) = msg.route.len().checked_sub(msg.leaves_so_far.len()) else {
            return;
        };
        for (&owner, leaf) in msg.route[start..].iter().zip(&msg.leaves_so_far.leaves) {
            if owner != self.id {
                self.overheard_leaves.insert(owner, *leaf);
            }
        }
    }

    /// Fabricate an attestation for a probe that reached this node, using
    /// known leaves where possible and random guesses elsewhere. Returns the
    /// upstream neighbor and the message.
    pub fn forge_attestation(&mut self, probe: &ProbeMessage) -> Option<(NodeId, AttestationMessage)> {
        let pos = probe.route.iter().position(|&n| n == self.id)?;
        if pos == 0 {
            return None;
        }
        let mut leaves = Vec::with_capacity(probe.route.len() - pos);
        for &member in &probe.route[pos..] {
            let leaf = self
                .known_leaves
                .get(&member)
                .or_else(|| self.overheard_leaves.get(&member))
                .copied()
                .unwrap_or_else(|| Digest::random(&mut self.rng));
            leaves.push(leaf);
        }
        let delivered_count = self.received_data.take(probe.source(), probe.route_id);
        Some((
            probe.route[pos - 1],
            AttestationMessage {
                route_id: probe.route_id,
                round: probe.round,
                route: probe.route.clone(),
                leaves_so_far: RouteProof::new(leaves),
                delivered_count,
            },
        ))
    }
}

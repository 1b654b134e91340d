//! Messages carried by the simulated radio.

use crate::adversary::PacketClass;
use crate::aodv::{HelloMessage, RerrMessage, RreqMessage, RrepMessage};
use crate::merkle::{NodeId, DIGEST_LEN};
use crate::verification::{AttestationMessage, ProbeMessage};

// On-air sizes in bits. AODV sizes follow the RFC 3561 message layouts.
pub const RREQ_BITS: u32 = 24 * 8;
pub const RREP_BITS: u32 = 20 * 8;
pub const RERR_BITS: u32 = 12 * 8;
pub const HELLO_BITS: u32 = RREP_BITS;
const PROBE_HEADER_BITS: u32 = 12 * 8;
const ATTESTATION_HEADER_BITS: u32 = 16 * 8;
const ROUTE_MEMBER_BITS: u32 = 4 * 8;
const LEAF_BITS: u32 = DIGEST_LEN as u32 * 8;

#[derive(Debug, Clone, PartialEq)]
pub struct DataPacket {
    /// Index into the run's packet log.
    pub id: u64,
    pub flow: usize,
    pub source: NodeId,
    pub destination: NodeId,
    pub created_at: f64,
    pub size_bits: u32,
    /// Route the source was securing when it sent this packet; 0 if none.
    pub route_tag: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Packet {
    Rreq(RreqMessage),
    Rrep(RrepMessage),
    Rerr(RerrMessage),
    Hello(HelloMessage),
    Data(DataPacket),
    Probe(ProbeMessage),
    Attestation(AttestationMessage),
}

impl Packet {
    pub fn size_bits(&self) -> u32 {
        match self {
            Packet::Rreq(m) => RREQ_BITS + ROUTE_MEMBER_BITS * m.avoid.len() as u32,
            Packet::Rrep(_) => RREP_BITS,
            Packet::Rerr(_) => RERR_BITS,
            Packet::Hello(_) => HELLO_BITS,
            Packet::Data(d) => d.size_bits,
            Packet::Probe(p) => PROBE_HEADER_BITS + ROUTE_MEMBER_BITS * p.route.len() as u32,
            Packet::Attestation(a) => {
                ATTESTATION_HEADER_BITS
                    + ROUTE_MEMBER_BITS * a.route.len() as u32
                    + LEAF_BITS * a.leaves_so_far.len() as u32
            }
        }
    }

    pub fn class(&self) -> PacketClass {
        match self {
            Packet::Data(_) => PacketClass::Data,
            Packet::Probe(_) => PacketClass::Probe,
            Packet::Attestation(_) => PacketClass::Attestation,
            _ => PacketClass::Control,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Packet::Rreq(_) => "rreq",
            Packet::Rrep(_) => "rrep",
            Packet::Rerr(_) => "rerr",
            Packet::Hello(_) => "hello",
            Packet::Data(_) => "data",
            Packet::Probe(_) => "probe",
            Packet::Attestation(_) => "attestation",
        }
    }
}

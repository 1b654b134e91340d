//! Per-node leaf values and the left-deep hash chain that commits a route.
//!
//! Every node `i` holds `h(id_i || S_i)`. The root of a route
//! `(n0, n1, ..., nk)` is the left fold
//! `h(...h(h(leaf0 || leaf1) || leaf2)... || leafk)`, so a source holding
//! its own leaf and the expected root can check the leaves released by the
//! downstream members without learning any secret.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha1::{Digest as _, Sha1};

use crate::error::MerkleError;

/// Width of a digest in bytes (SHA-1 output).
pub const DIGEST_LEN: usize = 20;

/// Width of a node secret in bytes.
pub const SECRET_LEN: usize = 16;

/// Identity of a node within a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    /// Fixed 4-byte big-endian encoding hashed into the leaf.
    pub fn to_be_bytes(self) -> [u8; 4] {
        self.0.to_be_bytes()
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl From<u32> for NodeId {
    fn from(v: u32) -> Self {
        NodeId(v)
    }
}

/// A node's private secret. Never leaves its owner unless the owner colludes.
#[derive(Clone, PartialEq, Eq)]
pub struct Secret([u8; SECRET_LEN]);

impl Secret {
    pub fn from_bytes(bytes: [u8; SECRET_LEN]) -> Self {
        Secret(bytes)
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut bytes = [0u8; SECRET_LEN];
        rng.fill(&mut bytes[..]);
        Secret(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; SECRET_LEN] {
        &self.0
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(..)")
    }
}

/// Output of the one-way function.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest(pub [u8; DIGEST_LEN]);

impl Digest {
    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut bytes = [0u8; DIGEST_LEN];
        rng.fill(&mut bytes[..]);
        Digest(bytes)
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

/// One-way function used for leaves and interior values.
pub trait OneWayHash {
    fn hash(&self, data: &[u8]) -> Digest;

    /// `h(left || right)`.
    fn hash_pair(&self, left: &Digest, right: &Digest) -> Digest {
        let mut buf = [0u8; 2 * DIGEST_LEN];
        buf[..DIGEST_LEN].copy_from_slice(&left.0);
        buf[DIGEST_LEN..].copy_from_slice(&right.0);
        self.hash(&buf)
    }
}

/// SHA-1, the default one-way function.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sha1Hash;

impl OneWayHash for Sha1Hash {
    fn hash(&self, data: &[u8]) -> Digest {
        let out = Sha1::digest(data);
        let mut bytes = [0u8; DIGEST_LEN];
        bytes.copy_from_slice(&out);
        Digest(bytes)
    }
}

/// Leaves released by the downstream members of a route, nearest hop first.
/// The source's own leaf is not included.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RouteProof {
    pub leaves: Vec<Digest>,
}

impl RouteProof {
    pub fn new(leaves: Vec<Digest>) -> Self {
        RouteProof { leaves }
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    /// Prepend a relaying node's leaf.
    pub fn prepend(&mut self, leaf: Digest) {
        self.leaves.insert(0, leaf);
    }
}

/// `h(encode(id) || secret)` with the default hash.
pub fn leaf_value(id: NodeId, secret: &Secret) -> Digest {
    leaf_value_with(&Sha1Hash, id, secret)
}

pub fn leaf_value_with<H: OneWayHash + ?Sized>(hasher: &H, id: NodeId, secret: &Secret) -> Digest {
    let mut buf = [0u8; 4 + SECRET_LEN];
    buf[..4].copy_from_slice(&id.to_be_bytes());
    buf[4..].copy_from_slice(secret.as_bytes());
    hasher.hash(&buf)
}

/// Left-deep fold over `leaves` with the default hash.
pub fn fold_root(leaves: &[Digest]) -> Result<Digest, MerkleError> {
    fold_root_with(&Sha1Hash, leaves)
}

pub fn fold_root_with<H: OneWayHash + ?Sized>(
    hasher: &H,
    leaves: &[Digest],
) -> Result<Digest, MerkleError> {
    let (first, rest) = leaves.split_first().ok_or(MerkleError::EmptyLeafSet)?;
    Ok(rest
        .iter()
        .fold(*first, |acc, leaf| hasher.hash_pair(&acc, leaf)))
}

/// True iff `fold([own_leaf] ++ proof)` equals `expected_root`. An empty proof
/// is an incomplete attestation and never verifies.
pub fn verify_route_proof(own_leaf: &Digest, proof: &RouteProof, expected_root: &Digest) -> bool {
    verify_route_proof_with(&Sha1Hash, own_leaf, proof, expected_root)
}

pub fn verify_route_proof_with<H: OneWayHash + ?Sized>(
    hasher: &H,
    own_leaf: &Digest,
    proof: &RouteProof,
    expected_root: &Digest,
) -> bool {
    if proof.is_empty() {
        return false;
    }
    let root = proof
        .leaves
        .iter()
        .fold(*own_leaf, |acc, leaf| hasher.hash_pair(&acc, leaf));
    root == *expected_root
}

use std::path::PathBuf;

use thiserror::Error;

use crate::merkle::NodeId;
use crate::metrics::NegativeDelay;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MerkleError {
    #[error("empty leaf set")]
    EmptyLeafSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AodvError {
    #[error("self-route: node {0} cannot discover a route to itself")]
    SelfRoute(NodeId),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdversaryError {
    #[error("node {requester} is not a colluder of {owner}; secret refused")]
    NotColluder { owner: NodeId, requester: NodeId },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerificationError {
    #[error("route must have at least 2 members, got {0}")]
    RouteTooShort(usize),
    #[error("no leaf registered for route member {0}")]
    UnknownMember(NodeId),
    #[error(transparent)]
    Merkle(#[from] MerkleError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("event scheduled in the past: {at} < now {now}")]
    EventInPast { at: f64, now: f64 },
    #[error("end time must be non-negative, got {0}")]
    NegativeEndTime(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Aodv(#[from] AodvError),
    #[error(transparent)]
    Verification(#[from] VerificationError),
    #[error(transparent)]
    Delay(#[from] NegativeDelay),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

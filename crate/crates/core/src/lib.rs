//! Deterministic AODV ad hoc network simulator with black hole and gray
//! hole attackers and a hash-chain forwarding verification defense.

pub mod adversary;
pub mod aodv;
pub mod engine;
pub mod error;
pub mod merkle;
pub mod metrics;
pub mod packet;
pub mod runner;
pub mod scenario;
pub mod verification;

pub use engine::{run, RunReport, Simulation};
pub use error::{EngineError, RunError, ScenarioError};
pub use merkle::{fold_root, leaf_value, verify_route_proof, Digest, NodeId, RouteProof, Secret};
pub use scenario::{parse_scenario, parse_scenario_str, Overrides, ScenarioConfig};

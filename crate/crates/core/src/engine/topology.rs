//! Static node placement and unit-disk connectivity.

use rand::Rng;
use serde::Deserialize;

use crate::merkle::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkState {
    Up,
    Down,
}

/// Forces the link between `a` and `b` up or down from `from_time` on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkOverride {
    pub a: NodeId,
    pub b: NodeId,
    pub state: LinkState,
    pub from_time: f64,
}

impl LinkOverride {
    fn covers(&self, u: NodeId, v: NodeId) -> bool {
        (self.a == u && self.b == v) || (self.a == v && self.b == u)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    positions: Vec<Position>,
    radio_radius: f64,
    overrides: Vec<LinkOverride>,
}

impl Topology {
    pub fn new(positions: Vec<Position>, radio_radius: f64, mut overrides: Vec<LinkOverride>) -> Self {
        overrides.sort_by(|x, y| x.from_time.total_cmp(&y.from_time));
        Topology {
            positions,
            radio_radius,
            overrides,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn radio_radius(&self) -> f64 {
        self.radio_radius
    }

    pub fn position(&self, node: NodeId) -> Position {
        self.positions[node.index()]
    }

    pub fn overrides(&self) -> &[LinkOverride] {
        &self.overrides
    }

    pub fn in_range(&self, u: NodeId, v: NodeId) -> bool {
        self.position(u).distance(&self.position(v)) <= self.radio_radius
    }

    pub fn linked(&self, u: NodeId, v: NodeId, time: f64) -> bool {
        if u == v {
            return false;
        }
        self.overrides
            .iter()
            .rev()
            .find(|o| o.from_time <= time && o.covers(u, v))
            .map_or_else(|| self.in_range(u, v), |o| o.state == LinkState::Up)
    }

    /// Nodes `node` can reach at `time`, in id order.
    pub fn neighbors(&self, node: NodeId, time: f64) -> Vec<NodeId> {
        (0..self.positions.len() as u32)
            .map(NodeId)
            .filter(|&v| self.linked(node, v, time))
            .collect()
    }

    /// Whether every node can reach every other at `time`.
    pub fn is_connected(&self, time: f64) -> bool {
        let n = self.positions.len();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![NodeId(0)];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in self.neighbors(u, time) {
                if !seen[v.index()] {
                    seen[v.index()] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Uniform placement over the arena.
pub fn random_positions<R: Rng + ?Sized>(rng: &mut R, count: usize, arena: (f64, f64)) -> Vec<Position> {
    (0..count)
        .map(|_| Position::new(rng.random::<f64>() * arena.0, rng.random::<f64>() * arena.1))
        .collect()
}

/// Uniform placement redrawn until the unit-disk graph is connected.
/// Gives up after `max_attempts` draws.
pub fn random_connected_positions<R: Rng + ?Sized>(
    rng: &mut R,
    count: usize,
    arena: (f64, f64),
    radius: f64,
    max_attempts: usize,
) -> Option<Vec<Position>> {
    (0..max_attempts).find_map(|_| {
        let positions = random_positions(rng, count, arena);
        Topology::new(positions.clone(), radius, Vec::new())
            .is_connected(0.0)
            .then_some(positions)
    })
}

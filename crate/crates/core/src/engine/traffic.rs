//! Exponential application traffic.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::EngineError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficModel {
    pub inter_arrival_mean: f64,
    pub size_mean_bits: f64,
}

impl Default for TrafficModel {
    fn default() -> Self {
        TrafficModel {
            inter_arrival_mean: 1.0,
            size_mean_bits: 1024.0,
        }
    }
}

/// Sampler for one flow.
#[derive(Debug, Clone, Copy)]
pub struct TrafficGenerator {
    gap: Exp<f64>,
    size: Exp<f64>,
}

impl TrafficGenerator {
    pub fn new(model: TrafficModel) -> Result<Self, EngineError> {
        let rate = |mean: f64, what: &str| {
            if mean.is_finite() && mean > 0.0 {
                Exp::new(1.0 / mean).map_err(|e| EngineError::Config(format!("{what}: {e}")))
            } else {
                Err(EngineError::Config(format!("{what} mean must be positive, got {mean}")))
            }
        };
        Ok(TrafficGenerator {
            gap: rate(model.inter_arrival_mean, "inter-arrival")?,
            size: rate(model.size_mean_bits, "packet size")?,
        })
    }

    /// Time of the next arrival after `now`.
    pub fn next_arrival<R: Rng + ?Sized>(&self, rng: &mut R, now: f64) -> f64 {
        now + self.gap.sample(rng)
    }

    /// Packet size in whole bits, at least 1.
    pub fn packet_size<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        (self.size.sample(rng).ceil() as u32).max(1)
    }
}

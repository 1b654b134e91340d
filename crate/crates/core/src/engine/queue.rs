//! Time-ordered event queue.
//!
//! Min-heap keyed by `(time, seq)`. `seq` is assigned at scheduling and is
//! strictly increasing, so events at equal times run in scheduling order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::EngineError;

#[derive(Debug, Clone)]
pub struct Scheduled<T> {
    pub time: f64,
    pub seq: u64,
    pub payload: T,
}

impl<T> PartialEq for Scheduled<T> {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}

impl<T> Eq for Scheduled<T> {}

impl<T> PartialOrd for Scheduled<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for Scheduled<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone)]
pub struct Scheduler<T> {
    now: f64,
    next_seq: u64,
    queue: BinaryHeap<Scheduled<T>>,
}

impl<T> Default for Scheduler<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> Scheduler<T> {
    pub fn new() -> Self {
        Scheduler {
            now: 0.0,
            next_seq: 0,
            queue: BinaryHeap::new(),
        }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn schedule(&mut self, time: f64, payload: T) -> Result<u64, EngineError> {
        if time < self.now || time.is_nan() {
            return Err(EngineError::EventInPast { at: time, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Scheduled { time, seq, payload });
        Ok(seq)
    }

    /// Pop the next event at or before `limit`, advancing the clock to it.
    pub fn pop_until(&mut self, limit: f64) -> Option<Scheduled<T>> {
        if self.queue.peek()?.time > limit {
            return None;
        }
        let ev = self.queue.pop()?;
        self.now = ev.time;
        Some(ev)
    }

    /// Move the clock forward without running anything.
    pub fn advance_to(&mut self, time: f64) {
        if time > self.now {
            self.now = time;
        }
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn pending(&self) -> impl Iterator<Item = &Scheduled<T>> {
        self.queue.iter()
    }
}

//! Time-binned traffic, delay and load series, and their CSV export.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::RunError;

pub const CSV_HEADER: &str = "time_s,sent_pps,received_pps,mean_delay_s,load_bps";

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSeries {
    pub bin_width: f64,
    pub t_end: f64,
    pub sent_pkts: Vec<u64>,
    pub received_pkts: Vec<u64>,
    /// (receive time, end-to-end delay)
    pub delay_samples: Vec<(f64, f64)>,
    pub load_bits: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("negative delay: received at {received} before sent at {sent}")]
pub struct NegativeDelay {
    pub sent: f64,
    pub received: f64,
}

impl MetricsSeries {
    pub fn new(bin_width: f64, t_end: f64) -> Self {
        let bins = ((t_end / bin_width).ceil() as usize).max(1);
        MetricsSeries {
            bin_width,
            t_end,
            sent_pkts: vec![0; bins],
            received_pkts: vec![0; bins],
            delay_samples: Vec::new(),
            load_bits: vec![0; bins],
        }
    }

    pub fn bins(&self) -> usize {
        self.sent_pkts.len()
    }

    fn bin(&self, time: f64) -> usize {
        ((time / self.bin_width).floor().max(0.0) as usize).min(self.bins() - 1)
    }

    pub fn record_sent(&mut self, time: f64) {
        let b = self.bin(time);
        self.sent_pkts[b] += 1;
    }

    pub fn record_received(&mut self, time: f64) {
        let b = self.bin(time);
        self.received_pkts[b] += 1;
    }

    pub fn record_delay(&mut self, sent: f64, received: f64) -> Result<(), NegativeDelay> {
        if received < sent {
            return Err(NegativeDelay { sent, received });
        }
        self.delay_samples.push((received, received - sent));
        Ok(())
    }

    pub fn record_load(&mut self, time: f64, bits: u32) {
        let b = self.bin(time);
        self.load_bits[b] += bits as u64;
    }

    pub fn total_sent(&self) -> u64 {
        self.sent_pkts.iter().sum()
    }

    pub fn total_received(&self) -> u64 {
        self.received_pkts.iter().sum()
    }

    pub fn total_load_bits(&self) -> u64 {
        self.load_bits.iter().sum()
    }

    /// Network load averaged over the whole run, bits per second.
    pub fn mean_load_bps(&self) -> f64 {
        self.total_load_bits() as f64 / self.t_end
    }

    /// Mean delay of packets received strictly after `after`.
    pub fn mean_delay_after(&self, after: f64) -> Option<f64> {
        let (sum, n) = self
            .delay_samples
            .iter()
            .filter(|(t, _)| *t > after)
            .fold((0.0, 0usize), |(s, n), (_, d)| (s + d, n + 1));
        (n > 0).then(|| sum / n as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut delay_sum = vec![0.0; self.bins()];
        let mut delay_n = vec![0u64; self.bins()];
        for &(t, d) in &self.delay_samples {
            let b = self.bin(t);
            delay_sum[b] += d;
            delay_n[b] += 1;
        }
        let mut out = String::with_capacity(64 * (self.bins() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for b in 0..self.bins() {
            let mean_delay = if delay_n[b] > 0 {
                delay_sum[b] / delay_n[b] as f64
            } else {
                0.0
            };
            let _ = writeln!(
                out,
                "{:.3},{:.6},{:.6},{:.9},{:.3}",
                b as f64 * self.bin_width,
                self.sent_pkts[b] as f64 / self.bin_width,
                self.received_pkts[b] as f64 / self.bin_width,
                mean_delay,
                self.load_bits[b] as f64 / self.bin_width,
            );
        }
        out
    }

    pub fn export(&self, path: &Path) -> Result<(), RunError> {
        fs::write(path, self.to_csv()).map_err(|source| RunError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

//! ADWIN: adaptive windowing over an exponential histogram.
//!
//! The window is stored as rows of buckets; row `i` holds buckets summarising
//! `2^i` values each, newest first. After every insertion each boundary
//! between buckets is tried as a split into an older part `W0` and a newer
//! part `W1`. A split cuts when
//!
//! ```text
//! |mean(W0) - mean(W1)| >= sqrt( ln(4 / delta') / (2 m) ),
//! m = 1 / (1/|W0| + 1/|W1|),   delta' = delta / |W|
//! ```
//!
//! and the oldest bucket is dropped until no split cuts.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::types::DriftSignal;

pub const DEFAULT_DELTA: f64 = 0.002;
pub const DEFAULT_MAX_BUCKETS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Bucket {
    sum: f64,
    count: u64,
}

#[derive(Debug, Clone)]
pub struct AdwinDetector {
    delta: f64,
    max_buckets: usize,
    rows: Vec<VecDeque<Bucket>>,
    total_count: u64,
    total_sum: f64,
    /// Window mean just before the most recent cut.
    mean_before_cut: Option<f64>,
}

impl Default for AdwinDetector {
    fn default() -> Self {
        Self::new(DEFAULT_DELTA).expect("default delta is valid")
    }
}

impl AdwinDetector {
    pub fn new(delta: f64) -> Result<Self> {
        Self::with_max_buckets(delta, DEFAULT_MAX_BUCKETS)
    }

    pub fn with_max_buckets(delta: f64, max_buckets: usize) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::param("adwin-delta", format!("{delta} outside (0, 1)")));
        }
        if max_buckets < 2 {
            return Err(Error::param("max_buckets", "must be at least 2"));
        }
        Ok(Self {
            delta,
            max_buckets,
            rows: Vec::new(),
            total_count: 0,
            total_sum: 0.0,
            mean_before_cut: None,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn width(&self) -> u64 {
        self.total_count
    }

    pub fn total_sum(&self) -> f64 {
        self.total_sum
    }

    pub fn mean(&self) -> f64 {
        if self.total_count == 0 {
            0.0
        } else {
            self.total_sum / self.total_count as f64
        }
    }

    pub fn bucket_count(&self) -> usize {
        self.rows.iter().map(VecDeque::len).sum()
    }

    /// Bucket sizes per row, newest first.
    pub fn bucket_sizes(&self) -> Vec<Vec<u64>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|b| b.count).collect())
            .collect()
    }

    /// Window mean immediately before the last reported drift.
    pub fn mean_before_cut(&self) -> Option<f64> {
        self.mean_before_cut
    }

    pub fn update(&mut self, value: f64) -> Result<DriftSignal> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::param("value", format!("{value} outside [0, 1]")));
        }
        self.insert(value);
        let before = self.mean();
        let mut cut = false;
        while self.rows.len() > 0 && self.find_cut() {
            self.drop_oldest();
            cut = true;
        }
        if cut {
            self.mean_before_cut = Some(before);
            Ok(DriftSignal::Drift)
        } else {
            Ok(DriftSignal::Stable)
        }
    }

    pub fn reset(&mut self) {
        self.rows.clear();
        self.total_count = 0;
        self.total_sum = 0.0;
        self.mean_before_cut = None;
    }

    fn insert(&mut self, value: f64) {
        if self.rows.is_empty() {
            self.rows.push(VecDeque::new());
        }
        self.rows[0].push_front(Bucket { sum: value, count: 1 });
        self.total_count += 1;
        self.total_sum += value;

        let mut level = 0;
        while level < self.rows.len() && self.rows[level].len() > self.max_buckets {
            let older = self.rows[level].pop_back().expect("row over capacity");
            let newer = self.rows[level].pop_back().expect("row over capacity");
            let merged = Bucket {
                sum: older.sum + newer.sum,
                count: older.count + newer.count,
            };
            if level + 1 == self.rows.len() {
                self.rows.push(VecDeque::new());
            }
            self.rows[level + 1].push_front(merged);
            level += 1;
        }
    }

    /// Scans splits from oldest to newest.
    fn find_cut(&self) -> bool {
        let n = self.total_count as f64;
        if self.total_count < 2 {
            return false;
        }
        let log_term = (4.0 * n / self.delta).ln();
        let mut n0 = 0.0;
        let mut s0 = 0.0;
        for row in self.rows.iter().rev() {
            for b in row.iter().rev() {
                n0 += b.count as f64;
                s0 += b.sum;
                let n1 = n - n0;
                if n1 < 1.0 {
                    return false;
                }
                let s1 = self.total_sum - s0;
                let diff = (s0 / n0 - s1 / n1).abs();
                let m = 1.0 / (1.0 / n0 + 1.0 / n1);
                let eps = (log_term / (2.0 * m)).sqrt();
                if diff >= eps {
                    return true;
                }
            }
        }
        false
    }

    fn drop_oldest(&mut self) {
        while let Some(row) = self.rows.last_mut() {
            if let Some(b) = row.pop_back() {
                self.total_count -= b.count;
                self.total_sum -= b.sum;
                if row.is_empty() {
                    self.rows.pop();
                }
                return;
            }
            self.rows.pop();
        }
    }
}

//! Incremental decision trees built on the Hoeffding bound.

mod hoeffding;
mod observer;

pub use hoeffding::{HoeffdingTree, SplitRule, TreeCounters};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoeffdingTreeConfig {
    /// Split confidence.
    pub delta: f64,
    /// Weight a leaf must accumulate between split attempts.
    pub grace_period: u64,
    pub tie_threshold: f64,
    /// Equal-width bins per numeric feature.
    pub numeric_bins: usize,
    pub max_depth: Option<usize>,
}

impl Default for HoeffdingTreeConfig {
    fn default() -> Self {
        Self {
            delta: 1e-7,
            grace_period: 200,
            tie_threshold: 0.05,
            numeric_bins: 10,
            max_depth: None,
        }
    }
}

impl HoeffdingTreeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::param("delta", format!("{} outside (0, 1)", self.delta)));
        }
        if self.grace_period == 0 {
            return Err(Error::param("grace_period", "must be at least 1"));
        }
        if self.numeric_bins < 2 {
            return Err(Error::param("numeric_bins", "must be at least 2"));
        }
        if !(self.tie_threshold >= 0.0) {
            return Err(Error::param("tie_threshold", "must be non-negative"));
        }
        Ok(())
    }
}

/// `sqrt(range^2 * ln(1/delta) / (2n))`
pub fn hoeffding_bound(range: f64, delta: f64, n: u64) -> Result<f64> {
    if !(range > 0.0) {
        return Err(Error::param("range", format!("{range} must be positive")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", format!("{delta} outside (0, 1)")));
    }
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    Ok((range * range * (1.0 / delta).ln() / (2.0 * n as f64)).sqrt())
}

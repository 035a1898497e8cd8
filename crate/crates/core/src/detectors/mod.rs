//! Streaming drift detectors fed one error indicator per instance.

mod adwin;
mod ddm;

pub use adwin::{AdwinDetector, DEFAULT_DELTA, DEFAULT_MAX_BUCKETS};
pub use ddm::{DdmDetector, DEFAULT_DRIFT_COEFF, DEFAULT_MIN_INSTANCES, DEFAULT_WARNING_COEFF};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::types::DriftSignal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Adwin,
    Ddm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub adwin_delta: f64,
    pub ddm_warning: f64,
    pub ddm_drift: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            adwin_delta: DEFAULT_DELTA,
            ddm_warning: DEFAULT_WARNING_COEFF,
            ddm_drift: DEFAULT_DRIFT_COEFF,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Detector {
    Adwin(AdwinDetector),
    Ddm(DdmDetector),
}

impl Detector {
    pub fn build(kind: DetectorKind, cfg: &DetectorConfig) -> Result<Self> {
        Ok(match kind {
            DetectorKind::Adwin => Detector::Adwin(AdwinDetector::new(cfg.adwin_delta)?),
            DetectorKind::Ddm => Detector::Ddm(DdmDetector::new(cfg.ddm_warning, cfg.ddm_drift)?),
        })
    }

    pub fn kind(&self) -> DetectorKind {
        match self {
            Detector::Adwin(_) => DetectorKind::Adwin,
            Detector::Ddm(_) => DetectorKind::Ddm,
        }
    }

    /// Feeds one 0/1 error indicator.
    pub fn update(&mut self, error: bool) -> DriftSignal {
        let r = match self {
            Detector::Adwin(d) => d.update(if error { 1.0 } else { 0.0 }),
            Detector::Ddm(d) => d.update(u8::from(error)),
        };
        r.expect("0/1 indicators are always in range")
    }

    /// Positions in `errors` at which the detector signalled drift.
    pub fn detection_indices(&mut self, errors: &[u8]) -> Vec<usize> {
        errors
            .iter()
            .enumerate()
            .filter(|&(_, &e)| self.update(e != 0) == DriftSignal::Drift)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn reset(&mut self) {
        match self {
            Detector::Adwin(d) => d.reset(),
            Detector::Ddm(d) => d.reset(),
        }
    }
}

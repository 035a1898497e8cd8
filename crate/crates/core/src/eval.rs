//! Hold-out initialisation, the prequential (test-then-train) loop and binary
//! classification metrics.

use std::cell::RefCell;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::streams::StreamSource;
use crate::types::{AdaptiveLearner, ClassDistribution, Instance, LabeledInstance};

/// Cumulative accuracy is recorded every this many test instances.
pub const CHECKPOINT_INTERVAL: u64 = 50;

/// Class index treated as positive ("abnormal").
pub const POSITIVE_CLASS: usize = 1;

/// Splits an ordered dataset into the first `floor(fraction * n)` records and
/// the rest.
pub fn holdout_split<T: Clone>(data: &[T], train_fraction: f64) -> Result<(Vec<T>, Vec<T>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::param(
            "train_fraction",
            format!("{train_fraction} outside (0, 1)"),
        ));
    }
    let cut = (train_fraction * data.len() as f64).floor() as usize;
    if cut == 0 || cut == data.len() {
        return Err(Error::EmptyPartition(format!(
            "train fraction {train_fraction} of {} records leaves {} training and {} test records",
            data.len(),
            cut,
            data.len() - cut
        )));
    }
    Ok((data[..cut].to_vec(), data[cut..].to_vec()))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn record(&mut self, predicted: usize, actual: usize) {
        match (predicted == POSITIVE_CLASS, actual == POSITIVE_CLASS) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn from_log(log: &[(usize, usize)]) -> Self {
        let mut c = Self::default();
        for &(p, y) in log {
            c.record(p, y);
        }
        c
    }
}

/// Precision, recall and F1 are only defined for binary streams.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn compute_metrics(c: &ConfusionCounts) -> Result<Metrics> {
    let total = c.total();
    if total == 0 {
        return Err(Error::param("confusion", "no instances evaluated"));
    }
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Metrics {
        accuracy: ratio(c.tp + c.tn, total),
        precision: Some(precision),
        recall: Some(recall),
        f1: Some(f1),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub instance_index: u64,
    pub cumulative_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub model_name: String,
    pub seed: u64,
    pub config_fingerprint: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrequentialReport {
    pub meta: RunMeta,
    pub curve: Vec<CurvePoint>,
    pub metrics: Metrics,
    /// `None` for streams with more than two classes.
    pub confusion: Option<ConfusionCounts>,
    pub evaluated: u64,
    pub correct: u64,
    /// Wall-clock seconds per predict call.
    pub mean_test_time: f64,
    /// `(predicted, actual)` per test instance.
    pub log: Vec<(usize, usize)>,
}

impl PrequentialReport {
    pub fn mean_test_time_ms(&self) -> f64 {
        self.mean_test_time * 1e3
    }
}

/// Trains on `warmup`, then predicts and trains on every record of
/// `test_stream` in turn.
pub fn prequential_run(
    model: &mut dyn AdaptiveLearner,
    warmup: &[LabeledInstance],
    test_stream: &mut dyn StreamSource,
    meta: RunMeta,
) -> Result<PrequentialReport> {
    let schema = test_stream.schema();
    if schema.feature_count() != model.feature_count() {
        return Err(Error::SchemaMismatch {
            expected: model.feature_count(),
            actual: schema.feature_count(),
        });
    }
    if schema.class_count() != model.class_count() {
        return Err(Error::param(
            "model",
            format!(
                "model has {} classes, stream has {}",
                model.class_count(),
                schema.class_count()
            ),
        ));
    }
    let binary = model.class_count() == 2;
    let at = |index: u64| move |e: Error| Error::AtInstance {
        index,
        source: Box::new(e),
    };
    for (i, x) in warmup.iter().enumerate() {
        model.train_one(x).map_err(at(i as u64 + 1))?;
    }
    let offset = warmup.len() as u64;

    let mut curve = Vec::new();
    let mut log = Vec::new();
    let mut correct = 0u64;
    let mut seen = 0u64;
    let mut predict_secs = 0.0;
    while let Some(x) = test_stream.next_instance() {
        let index = offset + seen + 1;
        if x.instance.len() != model.feature_count() {
            return Err(at(index)(Error::SchemaMismatch {
                expected: model.feature_count(),
                actual: x.instance.len(),
            }));
        }
        let start = Instant::now();
        let predicted = model.predict(&x.instance);
        predict_secs += start.elapsed().as_secs_f64();
        log.push((predicted, x.label));
        seen += 1;
        correct += u64::from(predicted == x.label);
        if seen % CHECKPOINT_INTERVAL == 0 {
            curve.push(CurvePoint {
                instance_index: seen,
                cumulative_accuracy: correct as f64 / seen as f64,
            });
        }
        model.train_one(&x).map_err(at(index))?;
    }
    if seen == 0 {
        return Err(Error::EmptyPartition("test stream is empty".into()));
    }
    if seen % CHECKPOINT_INTERVAL != 0 {
        curve.push(CurvePoint {
            instance_index: seen,
            cumulative_accuracy: correct as f64 / seen as f64,
        });
    }

    let (metrics, confusion) = if binary {
        let c = ConfusionCounts::from_log(&log);
        (compute_metrics(&c)?, Some(c))
    } else {
        let m = Metrics {
            accuracy: correct as f64 / seen as f64,
            precision: None,
            recall: None,
            f1: None,
        };
        (m, None)
    };
    Ok(PrequentialReport {
        meta,
        curve,
        metrics,
        confusion,
        evaluated: seen,
        correct,
        mean_test_time: predict_secs / seen as f64,
        log,
    })
}

/// Majority-class learner that counts protocol violations: a training call
/// on an instance that was not the most recent prediction, or one made after
/// prediction started without a pending prediction.
#[derive(Debug)]
pub struct ProbeLearner {
    feature_count: usize,
    counts: Vec<u64>,
    pending: RefCell<Option<Vec<f64>>>,
    predicting: RefCell<bool>,
    violations: u64,
}

impl ProbeLearner {
    pub fn new(feature_count: usize, class_count: usize) -> Self {
        Self {
            feature_count,
            counts: vec![0; class_count],
            pending: RefCell::new(None),
            predicting: RefCell::new(false),
            violations: 0,
        }
    }

    pub fn violations(&self) -> u64 {
        self.violations
    }
}

impl AdaptiveLearner for ProbeLearner {
    fn class_count(&self) -> usize {
        self.counts.len()
    }

    fn feature_count(&self) -> usize {
        self.feature_count
    }

    fn predict_proba(&self, x: &Instance) -> ClassDistribution {
        *self.predicting.borrow_mut() = true;
        *self.pending.borrow_mut() = Some(x.features.clone());
        let total: u64 = self.counts.iter().sum();
        if total == 0 {
            return ClassDistribution::uniform(self.counts.len());
        }
        ClassDistribution(self.counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    fn train_one(&mut self, x: &LabeledInstance) -> Result<()> {
        if *self.predicting.borrow() {
            match self.pending.borrow_mut().take() {
                Some(f) if f == x.instance.features => {}
                _ => self.violations += 1,
            }
        }
        self.counts[x.label] += 1;
        Ok(())
    }
}

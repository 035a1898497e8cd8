//! Performance weighted probability averaging ensemble.
//!
//! Four drift-adaptive base learners (ARF and SRP, each with ADWIN and with
//! DDM members) vote with class probabilities. Learner `j` is weighted by
//! `1 / (error_j + epsilon)`, where `error_j` is its cumulative prequential
//! error rate, and the predicted class is
//!
//! ```text
//! argmax_i  sum_j w_j * p_j(y = i | x) / k
//! ```
//!
//! Weights for an instance come from the counters as they stood before that
//! instance was seen.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::{build_model, ModelName, ModelParams};
use crate::types::{argmax_class, normalize, AdaptiveLearner, ClassDistribution, Instance, LabeledInstance};

pub const DEFAULT_EPSILON: f64 = 0.001;

/// The base learners, in fusion order.
pub const BASE_LEARNERS: [ModelName; 4] = [
    ModelName::ArfAdwin,
    ModelName::ArfDdm,
    ModelName::SrpAdwin,
    ModelName::SrpDdm,
];

/// `misclassified / processed`, zero before anything was processed.
pub fn pwpae_error_rate(processed: u64, misclassified: u64) -> Result<f64> {
    if misclassified > processed {
        return Err(Error::Invariant(format!(
            "{misclassified} misclassified out of {processed} processed"
        )));
    }
    if processed == 0 {
        return Ok(0.0);
    }
    Ok(misclassified as f64 / processed as f64)
}

/// `1 / (error_rate + epsilon)`, evaluated so the rounding of the sum does
/// not leak into the quotient. Stays within one ulp of the exact value.
pub fn pwpae_weight(error_rate: f64, epsilon: f64) -> f64 {
    let s = error_rate + epsilon;
    // TwoSum: s + err == error_rate + epsilon exactly.
    let bb = s - error_rate;
    let err = (error_rate - (s - bb)) + (epsilon - bb);
    let q = 1.0 / s;
    if err == 0.0 || !q.is_finite() {
        return q;
    }
    let r = (-q).mul_add(s, 1.0);
    q + (r - q * err) / s
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnerCounters {
    pub processed: u64,
    pub misclassified: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerWeight {
    pub error_rate: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerWeightSnapshot {
    /// Number of instances processed before this snapshot.
    pub instance_index: u64,
    pub learners: Vec<LearnerWeight>,
}

impl LearnerWeightSnapshot {
    pub fn weights(&self) -> Vec<f64> {
        self.learners.iter().map(|l| l.weight).collect()
    }
}

/// Result of fusing learner distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct Fusion {
    pub class: usize,
    /// `sum_j w_j p_j(i) / k` per class, before normalization.
    pub scores: Vec<f64>,
    pub distribution: ClassDistribution,
    /// Weighted-probability accumulations performed.
    pub accumulations: usize,
}

/// Weighted probability averaging over `k = dists.len()` learners.
pub fn fuse(weights: &[f64], dists: &[ClassDistribution], class_count: usize) -> Fusion {
    assert_eq!(weights.len(), dists.len(), "one weight per learner");
    let k = dists.len() as f64;
    let mut scores = vec![0.0; class_count];
    let mut accumulations = 0;
    for (w, p) in weights.iter().zip(dists) {
        for (score, prob) in scores.iter_mut().zip(&p.0) {
            *score += w * prob;
            accumulations += 1;
        }
    }
    for s in &mut scores {
        *s /= k;
    }
    let distribution = normalize(&ClassDistribution(scores.clone()));
    Fusion {
        class: argmax_class(&ClassDistribution(scores.clone())),
        scores,
        distribution,
        accumulations,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub class: usize,
    pub distribution: ClassDistribution,
    pub learner_predictions: Vec<usize>,
    pub snapshot: LearnerWeightSnapshot,
}

pub struct PwpaeModel {
    names: Vec<String>,
    learners: Vec<Box<dyn AdaptiveLearner>>,
    counters: Vec<LearnerCounters>,
    epsilon: f64,
    feature_count: usize,
    class_count: usize,
    processed: u64,
    trace: Option<Vec<LearnerWeightSnapshot>>,
}

impl std::fmt::Debug for PwpaeModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PwpaeModel")
            .field("names", &self.names)
            .field("counters", &self.counters)
            .field("epsilon", &self.epsilon)
            .finish_non_exhaustive()
    }
}

impl PwpaeModel {
    /// The standard four-learner model. Each base learner is seeded exactly
    /// as the standalone model of the same name would be.
    pub fn new(params: &ModelParams, feature_count: usize, class_count: usize) -> Result<Self> {
        let mut learners = Vec::with_capacity(BASE_LEARNERS.len());
        for name in BASE_LEARNERS {
            learners.push(build_model(name, params, feature_count, class_count)?);
        }
        Self::with_learners(
            BASE_LEARNERS.iter().map(|n| n.as_str().to_string()).collect(),
            learners,
            params.epsilon,
        )
    }

    /// Fusion over arbitrary learners.
    pub fn with_learners(
        names: Vec<String>,
        learners: Vec<Box<dyn AdaptiveLearner>>,
        epsilon: f64,
    ) -> Result<Self> {
        if learners.is_empty() || names.len() != learners.len() {
            return Err(Error::param("learners", "need one name per learner and at least one learner"));
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::param("epsilon", format!("{epsilon} must be positive")));
        }
        let feature_count = learners[0].feature_count();
        let class_count = learners[0].class_count();
        if learners
            .iter()
            .any(|l| l.feature_count() != feature_count || l.class_count() != class_count)
        {
            return Err(Error::param("learners", "learners disagree on the schema"));
        }
        Ok(Self {
            names,
            counters: vec![LearnerCounters::default(); learners.len()],
            learners,
            epsilon,
            feature_count,
            class_count,
            processed: 0,
            trace: None,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn counters(&self) -> &[LearnerCounters] {
        &self.counters
    }

    pub fn processed(&self) -> u64 {
        self.processed
    }

    /// Keep the weight snapshot used for every processed instance.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn trace(&self) -> Option<&[LearnerWeightSnapshot]> {
        self.trace.as_deref()
    }

    /// Error rates and weights from the current counters.
    pub fn snapshot(&self) -> LearnerWeightSnapshot {
        LearnerWeightSnapshot {
            instance_index: self.processed,
            learners: self
                .counters
                .iter()
                .map(|c| {
                    let error_rate = pwpae_error_rate(c.processed, c.misclassified)
                        .expect("counters are updated together");
                    LearnerWeight {
                        error_rate,
                        weight: pwpae_weight(error_rate, self.epsilon),
                    }
                })
                .collect(),
        }
    }

    fn learner_dists(&self, x: &Instance) -> Vec<ClassDistribution> {
        self.learners.iter().map(|l| l.predict_proba(x)).collect()
    }

    pub fn predict_fused(&self, x: &Instance) -> Fusion {
        let snapshot = self.snapshot();
        fuse(&snapshot.weights(), &self.learner_dists(x), self.class_count)
    }

    /// Test-then-train on one instance.
    pub fn process_one(&mut self, x: &LabeledInstance) -> Result<PredictionRecord> {
        crate::types::check_instance(x, self.feature_count, self.class_count)?;
        let dists = self.learner_dists(&x.instance);
        let snapshot = self.snapshot();
        let fusion = fuse(&snapshot.weights(), &dists, self.class_count);
        let learner_predictions: Vec<usize> = dists.iter().map(argmax_class).collect();
        for (c, &p) in self.counters.iter_mut().zip(&learner_predictions) {
            c.processed += 1;
            c.misclassified += u64::from(p != x.label);
        }
        self.processed += 1;
        if let Some(t) = self.trace.as_mut() {
            t.push(snapshot.clone());
        }
        for (name, learner) in self.names.iter().zip(self.learners.iter_mut()) {
            learner.train_one(x).map_err(|e| match e {
                Error::Invariant(m) => Error::Invariant(format!("{name}: {m}")),
                other => other,
            })?;
        }
        Ok(PredictionRecord {
            class: fusion.class,
            distribution: fusion.distribution,
            learner_predictions,
            snapshot,
        })
    }
}

impl AdaptiveLearner for PwpaeModel {
    fn class_count(&self) -> usize {
        self.class_count
    }

    fn feature_count(&self) -> usize {
        self.feature_count
    }

    fn predict_proba(&self, x: &Instance) -> ClassDistribution {
        self.predict_fused(x).distribution
    }

    fn predict(&self, x: &Instance) -> usize {
        self.predict_fused(x).class
    }

    fn train_one(&mut self, x: &LabeledInstance) -> Result<()> {
        self.process_one(x).map(|_| ())
    }
}

/// Writes `instance_index` followed by `<name>_error_rate,<name>_weight`
/// per learner.
pub fn write_weight_trace<W: Write>(out: W, names: &[String], snapshots: &[LearnerWeightSnapshot]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(out);
    write!(w, "instance_index")?;
    for n in names {
        write!(w, ",{n}_error_rate,{n}_weight")?;
    }
    writeln!(w)?;
    for s in snapshots {
        write!(w, "{}", s.instance_index)?;
        for l in &s.learners {
            write!(w, ",{},{}", l.error_rate, l.weight)?;
        }
        writeln!(w)?;
    }
    w.flush()
}

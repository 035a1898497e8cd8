//! Domain types shared by every learner and evaluator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamSchema {
    pub feature_names: Vec<String>,
    pub label_name: String,
    /// Original label text per dense class index.
    pub class_names: Vec<String>,
}

impl StreamSchema {
    pub fn new(feature_names: Vec<String>, label_name: impl Into<String>, class_names: Vec<String>) -> Result<Self> {
        if feature_names.is_empty() {
            return Err(Error::param("feature_names", "at least one feature is required"));
        }
        if class_names.len() < 2 {
            return Err(Error::param("class_names", "at least two classes are required"));
        }
        Ok(Self {
            feature_names,
            label_name: label_name.into(),
            class_names,
        })
    }

    /// Schema with generated names `f1..fd` and classes `0..c-1`.
    pub fn synthetic(feature_count: usize, class_count: usize) -> Result<Self> {
        Self::new(
            (1..=feature_count).map(|i| format!("f{i}")).collect(),
            "label",
            (0..class_count).map(|i| i.to_string()).collect(),
        )
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }
}

/// One feature vector. Values are finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub features: Vec<f64>,
}

impl Instance {
    pub fn new(features: Vec<f64>) -> Result<Self> {
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::param("features", format!("non-finite value at index {pos}")));
        }
        Ok(Self { features })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledInstance {
    pub instance: Instance,
    pub label: usize,
}

impl LabeledInstance {
    pub fn new(instance: Instance, label: usize) -> Self {
        Self { instance, label }
    }

    pub fn features(&self) -> &[f64] {
        &self.instance.features
    }
}

/// Per-class scores. Only guaranteed to sum to one after [`normalize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution(pub Vec<f64>);

impl ClassDistribution {
    pub fn uniform(class_count: usize) -> Self {
        Self(vec![1.0 / class_count as f64; class_count])
    }

    /// Point mass on `class`.
    pub fn one_hot(class_count: usize, class: usize) -> Self {
        let mut probs = vec![0.0; class_count];
        probs[class] = 1.0;
        Self(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn argmax(&self) -> usize {
        argmax_class(self)
    }
}

/// Rescales entries to sum to one. A vector with no positive mass maps to
/// the uniform distribution.
pub fn normalize(dist: &ClassDistribution) -> ClassDistribution {
    let sum: f64 = dist.0.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return ClassDistribution::uniform(dist.len());
    }
    ClassDistribution(dist.0.iter().map(|p| p / sum).collect())
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax_class(dist: &ClassDistribution) -> usize {
    let mut best = 0;
    for (i, &p) in dist.0.iter().enumerate().skip(1) {
        if p > dist.0[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DriftSignal {
    Stable,
    Warning,
    Drift,
}

/// Uniform contract for anything that learns one instance at a time.
pub trait AdaptiveLearner: Send {
    fn class_count(&self) -> usize;

    fn feature_count(&self) -> usize;

    fn predict_proba(&self, x: &Instance) -> ClassDistribution;

    fn train_one(&mut self, x: &LabeledInstance) -> Result<()>;

    fn predict(&self, x: &Instance) -> usize {
        argmax_class(&self.predict_proba(x))
    }
}

pub(crate) fn check_instance(x: &LabeledInstance, feature_count: usize, class_count: usize) -> Result<()> {
    if x.instance.len() != feature_count {
        return Err(Error::SchemaMismatch {
            expected: feature_count,
            actual: x.instance.len(),
        });
    }
    if x.label >= class_count {
        return Err(Error::LabelOutOfRange {
            label: x.label,
            class_count,
        });
    }
    Ok(())
}

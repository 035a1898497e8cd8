//! Online ensembles of Hoeffding trees with per-member drift detection.
//!
//! All three ensembles share one engine: every member trains on each
//! instance with a Poisson(`lambda`) weight and feeds its own prequential
//! error indicator to a private detector. They differ in how members see the
//! feature space:
//!
//! * ARF: each leaf samples `floor(sqrt(d)) + 1` candidate features.
//! * SRP: each member owns a fixed random subset of `ceil(fraction * d)`
//!   features, redrawn when the member is replaced.
//! * LB: every member sees every feature.
//!
//! DDM members grow a background tree while in warning and promote it on
//! drift. ADWIN has no warning level, so ADWIN members are replaced by a
//! fresh tree as soon as a cut shows their error rate went up.

use serde::{Deserialize, Serialize};

use crate::detectors::{Detector, DetectorConfig, DetectorKind};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, poisson_draw, SeededRng};
use crate::trees::{HoeffdingTree, HoeffdingTreeConfig, SplitRule};
use crate::types::{
    argmax_class, check_instance, normalize, AdaptiveLearner, ClassDistribution, DriftSignal, Instance,
    LabeledInstance,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleKind {
    Arf,
    Srp,
    Lb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubspaceMode {
    /// Per-leaf feature sampling.
    Local,
    /// Per-member fixed feature subset.
    Global,
    /// All features.
    Full,
}

impl EnsembleKind {
    pub fn subspace_mode(self) -> SubspaceMode {
        match self {
            EnsembleKind::Arf => SubspaceMode::Local,
            EnsembleKind::Srp => SubspaceMode::Global,
            EnsembleKind::Lb => SubspaceMode::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_members: usize,
    pub lambda: f64,
    pub detector_kind: DetectorKind,
    pub detectors: DetectorConfig,
    /// Overrides the kind's native mode; must agree with it.
    pub subspace_mode: Option<SubspaceMode>,
    pub subspace_fraction: f64,
    pub tree: HoeffdingTreeConfig,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            n_members: 10,
            lambda: 6.0,
            detector_kind: DetectorKind::Adwin,
            detectors: DetectorConfig::default(),
            subspace_mode: None,
            subspace_fraction: 0.6,
            tree: HoeffdingTreeConfig::default(),
            seed: 0,
        }
    }
}

/// `floor(sqrt(d)) + 1`, capped at `d`.
pub fn local_subspace_size(d: usize) -> usize {
    ((d as f64).sqrt().floor() as usize + 1).min(d)
}

/// `ceil(fraction * d)`, at least one.
pub fn global_subspace_size(d: usize, fraction: f64) -> usize {
    ((fraction * d as f64).ceil() as usize).clamp(1, d)
}

#[derive(Debug, Clone)]
struct Learner {
    tree: HoeffdingTree,
    mask: Option<Vec<usize>>,
}

impl Learner {
    fn project(&self, x: &[f64]) -> Instance {
        match &self.mask {
            Some(mask) => Instance {
                features: mask.iter().map(|&f| x[f]).collect(),
            },
            None => Instance { features: x.to_vec() },
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleMember {
    learner: Learner,
    background: Option<Learner>,
    detector: Detector,
    rng: SeededRng,
    trained_weight: u64,
    instances_seen: u64,
    replacements: u64,
}

impl EnsembleMember {
    pub fn feature_mask(&self) -> Option<&[usize]> {
        self.learner.mask.as_deref()
    }

    pub fn has_background(&self) -> bool {
        self.background.is_some()
    }

    pub fn replacements(&self) -> u64 {
        self.replacements
    }

    /// Sum of Poisson weights this member has trained with.
    pub fn trained_weight(&self) -> u64 {
        self.trained_weight
    }

    pub fn instances_seen(&self) -> u64 {
        self.instances_seen
    }

    pub fn tree(&self) -> &HoeffdingTree {
        &self.learner.tree
    }

    pub fn detector(&self) -> &Detector {
        &self.detector
    }

    pub fn predict_proba(&self, x: &Instance) -> ClassDistribution {
        let projected = self.learner.project(&x.features);
        self.learner.tree.predict_proba(&projected)
    }
}

/// Detector outcome for one member on one instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemberEvent {
    pub member: usize,
    pub signal: DriftSignal,
    /// The member's tree was swapped out on this instance.
    pub replaced: bool,
}

#[derive(Debug, Clone)]
pub struct OnlineEnsemble {
    kind: EnsembleKind,
    cfg: EnsembleConfig,
    feature_count: usize,
    class_count: usize,
    members: Vec<EnsembleMember>,
}

pub fn build_ensemble(
    kind: EnsembleKind,
    cfg: EnsembleConfig,
    feature_count: usize,
    class_count: usize,
) -> Result<OnlineEnsemble> {
    if cfg.n_members == 0 {
        return Err(Error::param("members", "must be at least 1"));
    }
    if !(cfg.lambda > 0.0) || !cfg.lambda.is_finite() {
        return Err(Error::param("lambda", format!("{} must be positive", cfg.lambda)));
    }
    if !(cfg.subspace_fraction > 0.0 && cfg.subspace_fraction <= 1.0) {
        return Err(Error::param(
            "subspace-fraction",
            format!("{} outside (0, 1]", cfg.subspace_fraction),
        ));
    }
    if let Some(mode) = cfg.subspace_mode {
        if mode != kind.subspace_mode() {
            return Err(Error::param(
                "subspace_mode",
                format!("{kind:?} requires {:?}, got {mode:?}", kind.subspace_mode()),
            ));
        }
    }
    if kind == EnsembleKind::Lb && cfg.detector_kind != DetectorKind::Adwin {
        return Err(Error::param("detector_kind", "leveraging bagging uses ADWIN members"));
    }
    if feature_count == 0 || class_count < 2 {
        return Err(Error::param("schema", "need at least one feature and two classes"));
    }
    cfg.tree.validate()?;
    // Surface detector parameter errors at build time.
    Detector::build(cfg.detector_kind, &cfg.detectors)?;

    let mut ensemble = OnlineEnsemble {
        kind,
        cfg,
        feature_count,
        class_count,
        members: Vec::new(),
    };
    for i in 0..ensemble.cfg.n_members {
        let mut rng = SeededRng::new(derive_seed(ensemble.cfg.seed, &format!("member{i}")));
        let learner = ensemble.new_learner(&mut rng)?;
        ensemble.members.push(EnsembleMember {
            learner,
            background: None,
            detector: Detector::build(ensemble.cfg.detector_kind, &ensemble.cfg.detectors)?,
            rng,
            trained_weight: 0,
            instances_seen: 0,
            replacements: 0,
        });
    }
    Ok(ensemble)
}

/// Arithmetic mean of member distributions, normalized. Each class sums its
/// member values in sorted order, so member order never changes the result.
pub fn average_distributions(dists: &[ClassDistribution], class_count: usize) -> ClassDistribution {
    if dists.is_empty() {
        return ClassDistribution::uniform(class_count);
    }
    let mut column = Vec::with_capacity(dists.len());
    let mean = (0..class_count)
        .map(|c| {
            column.clear();
            column.extend(dists.iter().map(|d| d.0[c]));
            column.sort_by(f64::total_cmp);
            column.iter().sum::<f64>() / dists.len() as f64
        })
        .collect();
    normalize(&ClassDistribution(mean))
}

impl OnlineEnsemble {
    pub fn kind(&self) -> EnsembleKind {
        self.kind
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.cfg
    }

    pub fn members(&self) -> &[EnsembleMember] {
        &self.members
    }

    /// Reorders members; `order` must be a permutation of member indices.
    pub fn permute_members(&mut self, order: &[usize]) {
        assert_eq!(order.len(), self.members.len());
        let mut taken: Vec<Option<EnsembleMember>> = self.members.drain(..).map(Some).collect();
        self.members = order
            .iter()
            .map(|&i| taken[i].take().expect("order is a permutation"))
            .collect();
    }

    pub fn total_replacements(&self) -> u64 {
        self.members.iter().map(|m| m.replacements).sum()
    }

    fn new_learner(&self, rng: &mut SeededRng) -> Result<Learner> {
        let d = self.feature_count;
        let tree_seed = rng.fork().seed();
        match self.kind.subspace_mode() {
            SubspaceMode::Local => Ok(Learner {
                tree: HoeffdingTree::with_leaf_features(
                    self.cfg.tree.clone(),
                    SplitRule::Hoeffding,
                    d,
                    self.class_count,
                    Some(local_subspace_size(d)),
                    tree_seed,
                )?,
                mask: None,
            }),
            SubspaceMode::Global => {
                let m = global_subspace_size(d, self.cfg.subspace_fraction);
                let mut mask = rand::seq::index::sample(rng, d, m).into_vec();
                mask.sort_unstable();
                Ok(Learner {
                    tree: HoeffdingTree::ht(self.cfg.tree.clone(), m, self.class_count)?,
                    mask: Some(mask),
                })
            }
            SubspaceMode::Full => Ok(Learner {
                tree: HoeffdingTree::ht(self.cfg.tree.clone(), d, self.class_count)?,
                mask: None,
            }),
        }
    }

    /// Trains every member on `x`, returning the non-stable detector outcomes.
    pub fn train_with_events(&mut self, x: &LabeledInstance) -> Result<Vec<MemberEvent>> {
        check_instance(x, self.feature_count, self.class_count)?;
        let mut events = Vec::new();
        for i in 0..self.members.len() {
            let member = &mut self.members[i];
            member.instances_seen += 1;
            let projected = member.learner.project(x.features());
            let predicted = argmax_class(&member.learner.tree.predict_proba(&projected));
            let wrong = predicted != x.label;

            let k = u64::from(poisson_draw(self.cfg.lambda, &mut member.rng)?);
            if k > 0 {
                member.trained_weight += k;
                let y = LabeledInstance::new(projected, x.label);
                member.learner.tree.train_weighted(&y, k)?;
                if let Some(bg) = member.background.as_mut() {
                    let y = LabeledInstance::new(bg.project(x.features()), x.label);
                    bg.tree.train_weighted(&y, k)?;
                }
            }

            let signal = member.detector.update(wrong);
            let mut replaced = false;
            match signal {
                DriftSignal::Stable => {
                    member.background = None;
                }
                DriftSignal::Warning => {
                    if member.background.is_none() {
                        let mut rng = std::mem::replace(&mut member.rng, SeededRng::new(0));
                        let bg = self.new_learner(&mut rng);
                        let member = &mut self.members[i];
                        member.rng = rng;
                        member.background = Some(bg?);
                    }
                }
                DriftSignal::Drift => {
                    let worse = match &member.detector {
                        Detector::Adwin(a) => a.mean_before_cut().is_some_and(|before| a.mean() > before),
                        Detector::Ddm(_) => true,
                    };
                    if worse {
                        let replacement = match member.background.take() {
                            Some(bg) => bg,
                            None => {
                                let mut rng = std::mem::replace(&mut member.rng, SeededRng::new(0));
                                let fresh = self.new_learner(&mut rng);
                                self.members[i].rng = rng;
                                fresh?
                            }
                        };
                        let member = &mut self.members[i];
                        member.learner = replacement;
                        member.detector.reset();
                        member.replacements += 1;
                        replaced = true;
                    }
                }
            }
            if signal != DriftSignal::Stable {
                events.push(MemberEvent {
                    member: i,
                    signal,
                    replaced,
                });
            }
        }
        Ok(events)
    }
}

impl AdaptiveLearner for OnlineEnsemble {
    fn class_count(&self) -> usize {
        self.class_count
    }

    fn feature_count(&self) -> usize {
        self.feature_count
    }

    fn predict_proba(&self, x: &Instance) -> ClassDistribution {
        let dists: Vec<ClassDistribution> = self.members.iter().map(|m| m.predict_proba(x)).collect();
        average_distributions(&dists, self.class_count)
    }

    fn train_one(&mut self, x: &LabeledInstance) -> Result<()> {
        self.train_with_events(x).map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::{generate_concept_switch, ConceptSwitchConfig, StreamSource};

    fn d(v: &[f64]) -> ClassDistribution {
        ClassDistribution(v.to_vec())
    }

    fn cfg(seed: u64, detector: DetectorKind) -> EnsembleConfig {
        EnsembleConfig {
            seed,
            detector_kind: detector,
            ..Default::default()
        }
    }

    #[test]
    fn averaging_examples() {
        assert_eq!(average_distributions(&[d(&[1.0, 0.0]), d(&[0.0, 1.0])], 2).0, vec![0.5, 0.5]);
        let avg = average_distributions(&[d(&[0.9, 0.1]), d(&[0.6, 0.4]), d(&[0.9, 0.1])], 2);
        // (0.9 + 0.6 + 0.9) / 3 = 0.8
        assert!((avg.0[0] - 0.8).abs() < 1e-12 && (avg.0[1] - 0.2).abs() < 1e-12, "{avg:?}");
    }

    #[test]
    fn untrained_ensemble_is_uniform() {
        for kind in [EnsembleKind::Arf, EnsembleKind::Srp, EnsembleKind::Lb] {
            let e = build_ensemble(kind, cfg(1, DetectorKind::Adwin), 5, 2).unwrap();
            assert_eq!(e.predict_proba(&Instance { features: vec![0.5; 5] }).0, vec![0.5, 0.5]);
        }
    }

    #[test]
    fn subspace_sizes() {
        let srp = build_ensemble(EnsembleKind::Srp, cfg(3, DetectorKind::Adwin), 20, 2).unwrap();
        for m in srp.members() {
            assert_eq!(m.feature_mask().unwrap().len(), 12);
        }
        let masks: Vec<_> = srp.members().iter().map(|m| m.feature_mask().unwrap().to_vec()).collect();
        assert!(masks.iter().any(|m| m != &masks[0]));

        assert_eq!(local_subspace_size(20), 5);
        let arf = build_ensemble(EnsembleKind::Arf, cfg(3, DetectorKind::Adwin), 20, 2).unwrap();
        assert!(arf.members().iter().all(|m| m.feature_mask().is_none()));

        let lb = build_ensemble(EnsembleKind::Lb, cfg(3, DetectorKind::Adwin), 20, 2).unwrap();
        for m in lb.members() {
            assert!(m.feature_mask().is_none());
            assert_eq!(m.tree().feature_count(), 20);
        }
    }

    #[test]
    fn inconsistent_overrides_rejected() {
        let mut c = cfg(1, DetectorKind::Adwin);
        c.subspace_mode = Some(SubspaceMode::Global);
        assert!(build_ensemble(EnsembleKind::Arf, c.clone(), 4, 2).is_err());
        assert!(build_ensemble(EnsembleKind::Srp, c, 4, 2).is_ok());
        assert!(build_ensemble(EnsembleKind::Lb, cfg(1, DetectorKind::Ddm), 4, 2).is_err());
        let mut c = cfg(1, DetectorKind::Adwin);
        c.n_members = 0;
        assert!(build_ensemble(EnsembleKind::Arf, c, 4, 2).is_err());
        let mut c = cfg(1, DetectorKind::Adwin);
        c.subspace_fraction = 0.0;
        assert!(build_ensemble(EnsembleKind::Srp, c, 4, 2).is_err());
    }

    #[test]
    fn member_order_does_not_change_predictions() {
        let mut e = build_ensemble(EnsembleKind::Srp, cfg(5, DetectorKind::Ddm), 6, 2).unwrap();
        let mut s = generate_concept_switch(ConceptSwitchConfig::abrupt(6, 1500, 1000, 0.05, 5)).unwrap();
        let data = s.collect_all();
        for x in &data {
            e.train_one(x).unwrap();
        }
        let before: Vec<_> = data.iter().take(300).map(|x| e.predict_proba(&x.instance)).collect();
        let order: Vec<usize> = (0..e.members().len()).rev().collect();
        e.permute_members(&order);
        e.permute_members(&[3, 1, 4, 0, 5, 9, 2, 6, 8, 7]);
        for (x, b) in data.iter().take(300).zip(&before) {
            let after = e.predict_proba(&x.instance);
            assert!(after.0.iter().zip(&b.0).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn ddm_background_exists_only_in_warning() {
        let mut e = build_ensemble(EnsembleKind::Arf, cfg(8, DetectorKind::Ddm), 5, 2).unwrap();
        let mut s = generate_concept_switch(ConceptSwitchConfig::abrupt(5, 4000, 2000, 0.05, 8)).unwrap();
        while let Some(x) = s.next_instance() {
            e.train_one(&x).unwrap();
            for m in e.members() {
                let warning = matches!(m.detector(), Detector::Ddm(d) if d.last_signal() == DriftSignal::Warning);
                assert_eq!(m.has_background(), warning);
            }
        }
    }

    #[test]
    fn training_is_deterministic() {
        let run = || {
            let mut e = build_ensemble(EnsembleKind::Srp, cfg(11, DetectorKind::Adwin), 4, 2).unwrap();
            let mut s = generate_concept_switch(ConceptSwitchConfig::abrupt(4, 2000, 1000, 0.05, 11)).unwrap();
            let mut events = Vec::new();
            let mut preds = Vec::new();
            while let Some(x) = s.next_instance() {
                preds.push(e.predict_proba(&x.instance));
                events.extend(e.train_with_events(&x).unwrap());
            }
            let masks: Vec<_> = e.members().iter().map(|m| m.feature_mask().map(<[usize]>::to_vec)).collect();
            (events, preds, masks)
        };
        assert_eq!(run(), run());
    }
}

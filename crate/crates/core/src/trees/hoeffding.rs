use std::fmt::Write as _;

use crate::error::Result;
use crate::rng::SeededRng;
use crate::types::{check_instance, AdaptiveLearner, ClassDistribution, Instance, LabeledInstance};

use super::observer::{FeatureObserver, Histogram};
use super::{hoeffding_bound, HoeffdingTreeConfig};

/// Split policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitRule {
    /// Split when the best candidate beats the runner-up by the bound.
    Hoeffding,
    /// Split when the best candidate beats not splitting by the bound, and
    /// revisit internal splits as statistics accumulate.
    Efdt,
}

#[derive(Debug, Clone)]
struct NodeStats {
    class_counts: Vec<u64>,
    /// Feature indices tracked at this node.
    features: Vec<usize>,
    observers: Vec<FeatureObserver>,
}

impl NodeStats {
    fn total(&self) -> u64 {
        self.class_counts.iter().sum()
    }

    fn add(&mut self, x: &[f64], label: usize, weight: u64) {
        self.class_counts[label] += weight;
        for (obs, &f) in self.observers.iter_mut().zip(&self.features) {
            obs.add(x[f], label, weight);
        }
    }

    fn is_pure(&self) -> bool {
        self.class_counts.iter().filter(|&&c| c > 0).count() <= 1
    }

    /// Best split per tracked feature, sorted by decreasing gain.
    fn candidates(&mut self, bins: usize) -> Vec<Candidate> {
        let classes = self.class_counts.len();
        let mut out = Vec::new();
        for (obs, &f) in self.observers.iter_mut().zip(&self.features) {
            let h = obs.freeze(bins, classes);
            if let Some((edge, gain)) = h.best_edge(&self.class_counts) {
                out.push(Candidate {
                    feature: f,
                    edge,
                    threshold: h.threshold(edge),
                    gain,
                    left_dist: h.left_counts(edge),
                });
            }
        }
        // Stable sort keeps lower feature indices first on equal gain.
        out.sort_by(|a, b| b.gain.total_cmp(&a.gain));
        out
    }

    fn histogram_of(&self, feature: usize) -> Option<&Histogram> {
        let pos = self.features.iter().position(|&f| f == feature)?;
        self.observers[pos].histogram()
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    feature: usize,
    edge: usize,
    threshold: f64,
    gain: f64,
    left_dist: Vec<u64>,
}

#[derive(Debug, Clone)]
struct Leaf {
    stats: NodeStats,
    /// Class counts handed down by the parent split. They count towards the
    /// leaf's distribution but not towards its split statistics.
    inherited: Vec<u64>,
}

impl Leaf {
    fn class_counts(&self) -> Vec<u64> {
        self.inherited.iter().zip(&self.stats.class_counts).map(|(a, b)| a + b).collect()
    }
}

#[derive(Debug, Clone)]
struct Split {
    feature: usize,
    edge: usize,
    threshold: f64,
    left: Box<Node>,
    right: Box<Node>,
    /// Kept only under [`SplitRule::Efdt`] for re-evaluation.
    stats: Option<NodeStats>,
    /// Inherited counts of the leaf this split replaced.
    inherited: Vec<u64>,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(Leaf),
    Split(Split),
}

/// Counters exposed for instrumentation and tests.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TreeCounters {
    pub splits: u64,
    pub split_attempts: u64,
    pub subtree_replacements: u64,
    /// Weight seen at the leaf for each attempt, when logging is enabled.
    pub attempt_log: Option<Vec<u64>>,
}

struct Ctx<'a> {
    cfg: &'a HoeffdingTreeConfig,
    rule: SplitRule,
    class_count: usize,
    feature_count: usize,
    leaf_features: Option<usize>,
    rng: &'a mut SeededRng,
    counters: &'a mut TreeCounters,
}

impl Ctx<'_> {
    fn new_stats(&mut self) -> NodeStats {
        let features = match self.leaf_features {
            Some(m) if m < self.feature_count => {
                let mut f = rand::seq::index::sample(&mut *self.rng, self.feature_count, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..self.feature_count).collect(),
        };
        NodeStats {
            class_counts: vec![0; self.class_count],
            observers: features.iter().map(|_| FeatureObserver::new()).collect(),
            features,
        }
    }

    fn new_leaf(&mut self, inherited: Vec<u64>) -> Node {
        Node::Leaf(Leaf {
            stats: self.new_stats(),
            inherited,
        })
    }

    fn bound(&self, n: u64) -> f64 {
        let range = (self.class_count as f64).log2();
        hoeffding_bound(range, self.cfg.delta, n).expect("validated configuration")
    }

    /// Children start from the candidate's side counts plus a per-class
    /// proportional share of `inherited`, so no weight is lost.
    fn split_from(&mut self, c: &Candidate, totals: &[u64], keep: Option<NodeStats>, inherited: Vec<u64>) -> Node {
        let mut left_counts = c.left_dist.clone();
        let mut right_counts: Vec<u64> = totals.iter().zip(&c.left_dist).map(|(t, l)| t - l).collect();
        for k in 0..totals.len() {
            let share = if totals[k] == 0 {
                inherited[k]
            } else {
                ((inherited[k] as u128 * c.left_dist[k] as u128) / totals[k] as u128) as u64
            };
            left_counts[k] += share;
            right_counts[k] += inherited[k] - share;
        }
        let left = self.new_leaf(left_counts);
        let right = self.new_leaf(right_counts);
        self.counters.splits += 1;
        Node::Split(Split {
            feature: c.feature,
            edge: c.edge,
            threshold: c.threshold,
            left: Box::new(left),
            right: Box::new(right),
            stats: keep,
            inherited,
        })
    }
}

fn to_probs(counts: &[u64]) -> Vec<f64> {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return vec![1.0 / counts.len() as f64; counts.len()];
    }
    counts.iter().map(|&c| c as f64 / n as f64).collect()
}

fn crossed_multiple(before: u64, after: u64, period: u64) -> bool {
    after / period > before / period
}

/// Incremental decision tree over numeric features. One type serves both the
/// Hoeffding tree and the extremely fast decision tree, selected by
/// [`SplitRule`].
#[derive(Debug, Clone)]
pub struct HoeffdingTree {
    cfg: HoeffdingTreeConfig,
    rule: SplitRule,
    class_count: usize,
    feature_count: usize,
    leaf_features: Option<usize>,
    rng: SeededRng,
    root: Node,
    counters: TreeCounters,
    trained_weight: u64,
}

impl HoeffdingTree {
    pub fn new(cfg: HoeffdingTreeConfig, rule: SplitRule, feature_count: usize, class_count: usize) -> Result<Self> {
        Self::with_leaf_features(cfg, rule, feature_count, class_count, None, 0)
    }

    /// Tree whose leaves each track a random subset of `leaf_features`
    /// features, drawn with the given seed when the leaf is created.
    pub fn with_leaf_features(
        cfg: HoeffdingTreeConfig,
        rule: SplitRule,
        feature_count: usize,
        class_count: usize,
        leaf_features: Option<usize>,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        if feature_count == 0 {
            return Err(crate::Error::param("feature_count", "must be positive"));
        }
        if class_count < 2 {
            return Err(crate::Error::param("class_count", "must be at least 2"));
        }
        if leaf_features == Some(0) {
            return Err(crate::Error::param("leaf_features", "must be positive"));
        }
        let mut rng = SeededRng::new(seed);
        let mut counters = TreeCounters::default();
        let root = Ctx {
            cfg: &cfg,
            rule,
            class_count,
            feature_count,
            leaf_features,
            rng: &mut rng,
            counters: &mut counters,
        }
        .new_leaf(vec![0; class_count]);
        Ok(Self {
            cfg,
            rule,
            class_count,
            feature_count,
            leaf_features,
            rng,
            root,
            counters,
            trained_weight: 0,
        })
    }

    pub fn ht(cfg: HoeffdingTreeConfig, feature_count: usize, class_count: usize) -> Result<Self> {
        Self::new(cfg, SplitRule::Hoeffding, feature_count, class_count)
    }

    pub fn efdt(cfg: HoeffdingTreeConfig, feature_count: usize, class_count: usize) -> Result<Self> {
        Self::new(cfg, SplitRule::Efdt, feature_count, class_count)
    }

    pub fn config(&self) -> &HoeffdingTreeConfig {
        &self.cfg
    }

    pub fn rule(&self) -> SplitRule {
        self.rule
    }

    pub fn counters(&self) -> &TreeCounters {
        &self.counters
    }

    pub fn enable_attempt_log(&mut self) {
        self.counters.attempt_log.get_or_insert_with(Vec::new);
    }

    pub fn trained_weight(&self) -> u64 {
        self.trained_weight
    }

    /// Split feature at the root, if the root has split.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match &self.root {
            Node::Split(s) => Some((s.feature, s.threshold)),
            Node::Leaf(_) => None,
        }
    }

    pub fn leaf_count(&self) -> usize {
        fn walk(n: &Node) -> usize {
            match n {
                Node::Leaf(_) => 1,
                Node::Split(s) => walk(&s.left) + walk(&s.right),
            }
        }
        walk(&self.root)
    }

    pub fn split_count(&self) -> usize {
        self.leaf_count() - 1
    }

    pub fn depth(&self) -> usize {
        fn walk(n: &Node) -> usize {
            match n {
                Node::Leaf(_) => 0,
                Node::Split(s) => 1 + walk(&s.left).max(walk(&s.right)),
            }
        }
        walk(&self.root)
    }

    /// Sum of leaf class counts over the whole tree.
    pub fn leaf_count_sum(&self) -> u64 {
        fn walk(n: &Node) -> u64 {
            match n {
                Node::Leaf(l) => l.class_counts().iter().sum(),
                Node::Split(s) => walk(&s.left) + walk(&s.right),
            }
        }
        walk(&self.root)
    }

    /// Trains on `x` as if it arrived `weight` times in a row.
    pub fn train_weighted(&mut self, x: &LabeledInstance, weight: u64) -> Result<()> {
        check_instance(x, self.feature_count, self.class_count)?;
        if weight == 0 {
            return Ok(());
        }
        self.trained_weight += weight;
        let mut ctx = Ctx {
            cfg: &self.cfg,
            rule: self.rule,
            class_count: self.class_count,
            feature_count: self.feature_count,
            leaf_features: self.leaf_features,
            rng: &mut self.rng,
            counters: &mut self.counters,
        };
        learn(&mut self.root, x.features(), x.label, weight, 0, &mut ctx);
        Ok(())
    }

    fn leaf_for(&self, x: &[f64]) -> &Leaf {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf(l) => return l,
                Node::Split(s) => {
                    node = if x[s.feature] < s.threshold { &s.left } else { &s.right };
                }
            }
        }
    }

    /// Indented text dump: split feature and threshold per internal node,
    /// class counts per leaf.
    pub fn render(&self) -> String {
        fn walk(n: &Node, depth: usize, out: &mut String) {
            let pad = "  ".repeat(depth);
            match n {
                Node::Leaf(l) => {
                    let _ = writeln!(out, "{pad}leaf {:?}", l.class_counts());
                }
                Node::Split(s) => {
                    let _ = writeln!(out, "{pad}f{} < {}", s.feature, s.threshold);
                    walk(&s.left, depth + 1, out);
                    let _ = writeln!(out, "{pad}f{} >= {}", s.feature, s.threshold);
                    walk(&s.right, depth + 1, out);
                }
            }
        }
        let mut out = String::new();
        walk(&self.root, 0, &mut out);
        out
    }
}

fn learn(node: &mut Node, x: &[f64], label: usize, weight: u64, depth: usize, ctx: &mut Ctx<'_>) {
    match node {
        Node::Leaf(leaf) => {
            let before = leaf.stats.total();
            leaf.stats.add(x, label, weight);
            let after = before + weight;
            if crossed_multiple(before, after, ctx.cfg.grace_period) {
                if let Some(split) = attempt_split(leaf, after, depth, ctx) {
                    *node = split;
                }
            }
        }
        Node::Split(split) => {
            if let Some(stats) = split.stats.as_mut() {
                let before = stats.total();
                stats.add(x, label, weight);
                if ctx.rule == SplitRule::Efdt
                    && crossed_multiple(before, before + weight, ctx.cfg.grace_period)
                {
                    if let Some(replacement) = reevaluate(split, ctx) {
                        *node = replacement;
                        ctx.counters.subtree_replacements += 1;
                        // The instance is already in the node statistics;
                        // continue routing it into the new children.
                    }
                }
            }
            let Node::Split(split) = node else { unreachable!() };
            let child = if x[split.feature] < split.threshold { &mut split.left } else { &mut split.right };
            learn(child, x, label, weight, depth + 1, ctx);
        }
    }
}

fn attempt_split(leaf: &mut Leaf, n: u64, depth: usize, ctx: &mut Ctx<'_>) -> Option<Node> {
    ctx.counters.split_attempts += 1;
    if let Some(log) = ctx.counters.attempt_log.as_mut() {
        log.push(n);
    }
    let candidates = leaf.stats.candidates(ctx.cfg.numeric_bins);
    if leaf.stats.is_pure() || ctx.cfg.max_depth.is_some_and(|m| depth >= m) {
        return None;
    }
    let best = candidates.first()?;
    if best.gain <= 0.0 {
        return None;
    }
    let eps = ctx.bound(n);
    let runner_up = match ctx.rule {
        SplitRule::Hoeffding => candidates.get(1).map_or(0.0, |c| c.gain),
        SplitRule::Efdt => 0.0,
    };
    if best.gain - runner_up > eps || eps < ctx.cfg.tie_threshold {
        let keep = (ctx.rule == SplitRule::Efdt).then(|| leaf.stats.clone());
        let best = best.clone();
        Some(ctx.split_from(&best, &leaf.stats.class_counts, keep, leaf.inherited.clone()))
    } else {
        None
    }
}

fn reevaluate(split: &mut Split, ctx: &mut Ctx<'_>) -> Option<Node> {
    let stats = split.stats.as_mut()?;
    let n = stats.total();
    let candidates = stats.candidates(ctx.cfg.numeric_bins);
    let best = candidates.first()?;
    if best.feature == split.feature {
        return None;
    }
    let current = stats
        .histogram_of(split.feature)
        .map_or(0.0, |h| h.gain_at(split.edge, &stats.class_counts));
    let eps = ctx.bound(n);
    if best.gain - current > eps {
        let best = best.clone();
        let stats = split.stats.take();
        let totals = stats.as_ref().map(|s| s.class_counts.clone()).unwrap_or_default();
        let inherited = std::mem::take(&mut split.inherited);
        Some(ctx.split_from(&best, &totals, stats, inherited))
    } else {
        None
    }
}

impl AdaptiveLearner for HoeffdingTree {
    fn class_count(&self) -> usize {
        self.class_count
    }

    fn feature_count(&self) -> usize {
        self.feature_count
    }

    fn predict_proba(&self, x: &Instance) -> ClassDistribution {
        ClassDistribution(to_probs(&self.leaf_for(&x.features).class_counts()))
    }

    fn train_one(&mut self, x: &LabeledInstance) -> Result<()> {
        self.train_weighted(x, 1)
    }
}

//! K-means cluster sampling: keep a proportional share of every cluster so
//! the reduced dataset stays representative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::types::LabeledInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KMeansInit {
    KMeansPlusPlus,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    MinMax,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iters: usize,
    /// Stop once no centroid moves farther than this.
    pub tol: f64,
    pub init: KMeansInit,
    pub seed: u64,
    pub scale: Scaling,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: 8,
            max_iters: 100,
            tol: 1e-4,
            init: KMeansInit::KMeansPlusPlus,
            seed: 0,
            scale: Scaling::MinMax,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// Inertia after each assignment step, in order.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

impl ClusterModel {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.centroids.len()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn init_centroids(points: &[Vec<f64>], cfg: &KMeansConfig, rng: &mut SeededRng) -> Result<Vec<Vec<f64>>> {
    let n = points.len();
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(cfg.k);
    match cfg.init {
        KMeansInit::KMeansPlusPlus => {
            centroids.push(points[rng.below(n)].clone());
            let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
            while centroids.len() < cfg.k {
                let total: f64 = d2.iter().sum();
                if !(total > 0.0) {
                    return Err(Error::DegenerateClustering {
                        distinct: centroids.len(),
                        k: cfg.k,
                    });
                }
                let mut target = rng.uniform() * total;
                let mut chosen = n - 1;
                for (i, &d) in d2.iter().enumerate() {
                    if d > 0.0 && target < d {
                        chosen = i;
                        break;
                    }
                    target -= d;
                }
                // Rounding can leave `chosen` on a zero-distance point.
                if d2[chosen] == 0.0 {
                    chosen = d2.iter().rposition(|&d| d > 0.0).expect("total is positive");
                }
                let c = points[chosen].clone();
                for (slot, p) in d2.iter_mut().zip(points) {
                    *slot = slot.min(sq_dist(p, &c));
                }
                centroids.push(c);
            }
        }
        KMeansInit::Random => {
            let order = rand::seq::index::sample(rng, n, n);
            for i in order {
                if centroids.len() == cfg.k {
                    break;
                }
                if !centroids.iter().any(|c| c == &points[i]) {
                    centroids.push(points[i].clone());
                }
            }
            if centroids.len() < cfg.k {
                return Err(Error::DegenerateClustering {
                    distinct: centroids.len(),
                    k: cfg.k,
                });
            }
        }
    }
    Ok(centroids)
}

/// Lloyd's algorithm from k-means++ (or random) seeding. Empty clusters are
/// re-seeded with the point farthest from its centroid.
pub fn kmeans_fit(points: &[Vec<f64>], cfg: &KMeansConfig) -> Result<ClusterModel> {
    if cfg.k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    if cfg.k > points.len() {
        return Err(Error::param("k", format!("{} exceeds the {} points", cfg.k, points.len())));
    }
    if !(cfg.tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::param("points", "points differ in dimension"));
    }
    let mut rng = SeededRng::new(cfg.seed);
    let mut centroids = init_centroids(points, cfg, &mut rng)?;
    let mut assignments = vec![0usize; points.len()];
    let mut dists = vec![0.0f64; points.len()];
    let mut history = Vec::new();
    let mut iterations = 0;

    loop {
        let mut inertia = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centroids);
            assignments[i] = c;
            dists[i] = d;
            inertia += d;
        }
        history.push(inertia);
        if iterations == cfg.max_iters {
            break;
        }
        iterations += 1;

        let mut sums = vec![vec![0.0; dim]; cfg.k];
        let mut counts = vec![0usize; cfg.k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut shift = 0.0f64;
        for c in 0..cfg.k {
            let new = if counts[c] > 0 {
                sums[c].iter().map(|s| s / counts[c] as f64).collect()
            } else {
                let far = dists
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                    .map(|(i, _)| i)
                    .expect("points are non-empty");
                dists[far] = 0.0;
                points[far].clone()
            };
            shift = shift.max(sq_dist(&new, &centroids[c]).sqrt());
            centroids[c] = new;
        }
        if shift < cfg.tol {
            // Final assignment against the converged centroids.
            let mut inertia = 0.0;
            for (i, p) in points.iter().enumerate() {
                let (c, d) = nearest(p, &centroids);
                assignments[i] = c;
                inertia += d;
            }
            history.push(inertia);
            break;
        }
    }
    Ok(ClusterModel {
        inertia: *history.last().expect("at least one assignment"),
        centroids,
        assignments,
        inertia_history: history,
        iterations,
    })
}

/// Rescales each column to `[0, 1]`; constant columns map to zero.
pub fn minmax_scale(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let Some(first) = points.first() else {
        return Vec::new();
    };
    let dim = first.len();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in points {
        for j in 0..dim {
            lo[j] = lo[j].min(p[j]);
            hi[j] = hi[j].max(p[j]);
        }
    }
    points
        .iter()
        .map(|p| {
            (0..dim)
                .map(|j| {
                    let span = hi[j] - lo[j];
                    if span > 0.0 {
                        (p[j] - lo[j]) / span
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Per-cluster quotas: `floor(fraction * n_i)` plus one for the clusters with
/// the largest remainders, so the total is `round(fraction * n)`.
pub fn allocate_quotas(cluster_sizes: &[usize], fraction: f64) -> Vec<usize> {
    let n: usize = cluster_sizes.iter().sum();
    let target = (fraction * n as f64).round() as usize;
    let exact: Vec<f64> = cluster_sizes.iter().map(|&s| fraction * s as f64).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = quotas.iter().sum();
    let mut order: Vec<usize> = (0..cluster_sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut remaining = target.saturating_sub(assigned);
    for &c in &order {
        if remaining == 0 {
            break;
        }
        if quotas[c] < cluster_sizes[c] {
            quotas[c] += 1;
            remaining -= 1;
        }
    }
    quotas
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    /// Sampled records in original order.
    pub data: Vec<LabeledInstance>,
    /// Original positions of the sampled records.
    pub indices: Vec<usize>,
    pub cluster_sizes: Vec<usize>,
    pub sampled_per_cluster: Vec<usize>,
    /// Cluster count actually used (smaller than requested when the data has
    /// fewer distinct points).
    pub effective_k: usize,
    pub inertia_history: Vec<f64>,
}

pub fn cluster_sample(data: &[LabeledInstance], fraction: f64, cfg: &KMeansConfig) -> Result<SampleOutcome> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::param("fraction", format!("{fraction} outside (0, 1]")));
    }
    if fraction * (data.len() as f64) < 1.0 {
        return Err(Error::param(
            "fraction",
            format!("{fraction} of {} records selects nothing", data.len()),
        ));
    }
    let raw: Vec<Vec<f64>> = data.iter().map(|x| x.features().to_vec()).collect();
    let points = match cfg.scale {
        Scaling::MinMax => minmax_scale(&raw),
        Scaling::None => raw,
    };
    let mut kcfg = cfg.clone();
    kcfg.k = kcfg.k.min(points.len());
    let model = match kmeans_fit(&points, &kcfg) {
        Err(Error::DegenerateClustering { distinct, .. }) => {
            kcfg.k = distinct.max(1);
            kmeans_fit(&points, &kcfg)?
        }
        other => other?,
    };

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); model.centroids.len()];
    for (i, &a) in model.assignments.iter().enumerate() {
        members[a].push(i);
    }
    let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
    let quotas = allocate_quotas(&sizes, fraction);
    let mut rng = SeededRng::new(crate::rng::derive_seed(cfg.seed, "cluster-sample"));
    let mut indices = Vec::new();
    for (m, &q) in members.iter().zip(&quotas) {
        indices.extend(rand::seq::index::sample(&mut rng, m.len(), q).into_iter().map(|j| m[j]));
    }
    indices.sort_unstable();
    Ok(SampleOutcome {
        data: indices.iter().map(|&i| data[i].clone()).collect(),
        indices,
        cluster_sizes: sizes,
        sampled_per_cluster: quotas,
        effective_k: model.centroids.len(),
        inertia_history: model.inertia_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Instance;

    pub(crate) fn blobs(per_blob: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = SeededRng::new(seed);
        let mut out = Vec::new();
        for center in [0.0, 10.0] {
            for _ in 0..per_blob {
                // Uniform in a disc of radius 0.5.
                let r = 0.5 * rng.uniform().sqrt();
                let t = std::f64::consts::TAU * rng.uniform();
                out.push(vec![center + r * t.cos(), center + r * t.sin()]);
            }
        }
        out
    }

    fn assert_monotone(h: &[f64]) {
        for w in h.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{h:?}");
        }
    }

    #[test]
    fn two_blobs_recovered() {
        let pts = blobs(100, 1);
        let cfg = KMeansConfig {
            k: 2,
            seed: 4,
            ..Default::default()
        };
        let m = kmeans_fit(&pts, &cfg).unwrap();
        assert_monotone(&m.inertia_history);
        // Brute force: every point sits at its nearest centroid, and each
        // blob maps to a single cluster.
        for (p, &a) in pts.iter().zip(&m.assignments) {
            let d: Vec<f64> = m.centroids.iter().map(|c| sq_dist(p, c)).collect();
            assert!(d[a] <= d[1 - a]);
        }
        assert!(m.assignments[..100].iter().all(|&a| a == m.assignments[0]));
        assert!(m.assignments[100..].iter().all(|&a| a == m.assignments[100]));
        assert_ne!(m.assignments[0], m.assignments[100]);
        for (blob, center) in [(0usize, 0.0), (100, 10.0)] {
            let c = &m.centroids[m.assignments[blob]];
            assert!(((c[0] - center).powi(2) + (c[1] - center).powi(2)).sqrt() < 0.2, "{c:?}");
        }
    }

    #[test]
    fn identical_points_single_cluster() {
        let pts = vec![vec![3.0, -1.0]; 20];
        let m = kmeans_fit(&pts, &KMeansConfig { k: 1, ..Default::default() }).unwrap();
        assert_eq!(m.centroids[0], vec![3.0, -1.0]);
        assert_eq!(m.inertia, 0.0);
        let err = kmeans_fit(&pts, &KMeansConfig { k: 2, ..Default::default() }).unwrap_err();
        assert!(matches!(err, Error::DegenerateClustering { distinct: 1, k: 2 }));
    }

    #[test]
    fn square_corners_exact_fit() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        for init in [KMeansInit::KMeansPlusPlus, KMeansInit::Random] {
            let m = kmeans_fit(&pts, &KMeansConfig { k: 4, init, ..Default::default() }).unwrap();
            assert_eq!(m.inertia, 0.0);
            let mut a = m.assignments.clone();
            a.sort_unstable();
            assert_eq!(a, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn k_larger_than_points_rejected() {
        let pts = vec![vec![0.0], vec![1.0]];
        assert!(kmeans_fit(&pts, &KMeansConfig { k: 3, ..Default::default() }).is_err());
        assert!(kmeans_fit(&pts, &KMeansConfig { k: 0, ..Default::default() }).is_err());
    }

    fn labeled(pts: &[Vec<f64>], label: impl Fn(usize) -> usize) -> Vec<LabeledInstance> {
        pts.iter()
            .enumerate()
            .map(|(i, p)| LabeledInstance::new(Instance { features: p.clone() }, label(i)))
            .collect()
    }

    #[test]
    fn proportional_sample_from_two_blobs() {
        let data = labeled(&blobs(100, 2), |i| usize::from(i >= 100));
        let cfg = KMeansConfig { k: 2, seed: 1, ..Default::default() };
        let out = cluster_sample(&data, 0.1, &cfg).unwrap();
        assert_eq!(out.data.len(), 20);
        assert_eq!(out.indices.iter().filter(|&&i| i < 100).count(), 10);
        assert!(out.indices.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn full_fraction_is_identity() {
        let data = labeled(&blobs(30, 3), |i| i % 2);
        let out = cluster_sample(&data, 1.0, &KMeansConfig::default()).unwrap();
        assert_eq!(out.data, data);
    }

    #[test]
    fn sample_keeps_class_ratio() {
        let mut total_gap = 0.0;
        for seed in 0..50 {
            let pts = blobs(100, 100 + seed);
            let data = labeled(&pts, |i| {
                let in_a = i < 100;
                let minority = i % 10 == 0;
                usize::from(in_a == minority)
            });
            let cfg = KMeansConfig { k: 2, seed, ..Default::default() };
            let out = cluster_sample(&data, 0.1, &cfg).unwrap();
            let ratio = out.data.iter().filter(|x| x.label == 1).count() as f64 / out.data.len() as f64;
            total_gap += ratio - 0.5;
        }
        assert!((total_gap / 50.0).abs() <= 0.05);
    }

    #[test]
    fn invalid_fraction_rejected() {
        let data = labeled(&blobs(5, 1), |i| i % 2);
        for f in [0.0, -0.1, 1.5, 0.01] {
            assert!(cluster_sample(&data, f, &KMeansConfig::default()).is_err(), "{f}");
        }
    }

    #[test]
    fn quotas_sum_exactly() {
        let q = allocate_quotas(&[7, 7, 7], 0.5);
        assert_eq!(q.iter().sum::<usize>(), 11);
        assert!(q.iter().all(|&v| v == 3 || v == 4));
        assert_eq!(allocate_quotas(&[100, 100], 0.1), vec![10, 10]);
    }

    #[test]
    fn duplicate_heavy_data_collapses_k() {
        let mut pts = vec![vec![0.0]; 50];
        pts.extend(vec![vec![1.0]; 50]);
        let data = labeled(&pts, |i| i % 2);
        let out = cluster_sample(&data, 0.2, &KMeansConfig::default()).unwrap();
        assert_eq!(out.effective_k, 2);
        assert_eq!(out.data.len(), 20);
    }
}

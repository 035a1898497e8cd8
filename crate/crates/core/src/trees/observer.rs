//! Per-node numeric attribute statistics.
//!
//! A fresh node buffers raw `(value, class, weight)` triples until its first
//! split attempt. The buffer then fixes an equal-width histogram over the
//! observed `[min, max]`; later values outside that range are clamped into the
//! outer bins, which keeps every interior-edge count exact.

#[derive(Debug, Clone)]
pub(crate) enum FeatureObserver {
    Buffering(Vec<(f64, usize, u64)>),
    Binned(Histogram),
}

#[derive(Debug, Clone)]
pub(crate) struct Histogram {
    lo: f64,
    width: f64,
    bins: usize,
    classes: usize,
    /// `counts[bin * classes + class]`
    counts: Vec<u64>,
}

impl Histogram {
    fn from_buffer(buffer: &[(f64, usize, u64)], bins: usize, classes: usize) -> Self {
        let lo = buffer.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
        let hi = buffer.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
        let width = if buffer.is_empty() || hi <= lo { 0.0 } else { (hi - lo) / bins as f64 };
        let mut h = Self {
            lo: if buffer.is_empty() { 0.0 } else { lo },
            width,
            bins,
            classes,
            counts: vec![0; bins * classes],
        };
        for &(v, c, w) in buffer {
            h.add(v, c, w);
        }
        h
    }

    fn bin_of(&self, v: f64) -> usize {
        if self.width == 0.0 {
            return 0;
        }
        let b = ((v - self.lo) / self.width).floor();
        if b < 0.0 {
            0
        } else {
            (b as usize).min(self.bins - 1)
        }
    }

    fn add(&mut self, v: f64, class: usize, weight: u64) {
        let b = self.bin_of(v);
        self.counts[b * self.classes + class] += weight;
    }

    pub(crate) fn threshold(&self, edge: usize) -> f64 {
        self.lo + edge as f64 * self.width
    }

    /// Class counts strictly left of interior edge `edge` (1..bins).
    pub(crate) fn left_counts(&self, edge: usize) -> Vec<u64> {
        let mut left = vec![0u64; self.classes];
        for b in 0..edge {
            for (c, slot) in left.iter_mut().enumerate() {
                *slot += self.counts[b * self.classes + c];
            }
        }
        left
    }

    /// Best interior edge by information gain: `(edge, gain)`.
    pub(crate) fn best_edge(&self, totals: &[u64]) -> Option<(usize, f64)> {
        if self.width == 0.0 {
            return None;
        }
        let parent = entropy(totals);
        let n: u64 = totals.iter().sum();
        let mut left = vec![0u64; self.classes];
        let mut right = vec![0u64; self.classes];
        let mut best: Option<(usize, f64)> = None;
        for edge in 1..self.bins {
            for (c, slot) in left.iter_mut().enumerate() {
                *slot += self.counts[(edge - 1) * self.classes + c];
            }
            for c in 0..self.classes {
                right[c] = totals[c] - left[c];
            }
            let gain = split_gain(parent, n, &left, &right);
            if let Some(gain) = gain {
                if best.is_none_or(|(_, g)| gain > g) {
                    best = Some((edge, gain));
                }
            }
        }
        best
    }

    pub(crate) fn gain_at(&self, edge: usize, totals: &[u64]) -> f64 {
        let left = self.left_counts(edge);
        let right: Vec<u64> = totals.iter().zip(&left).map(|(t, l)| t - l).collect();
        let n: u64 = totals.iter().sum();
        split_gain(entropy(totals), n, &left, &right).unwrap_or(0.0)
    }
}

impl FeatureObserver {
    pub(crate) fn new() -> Self {
        FeatureObserver::Buffering(Vec::new())
    }

    pub(crate) fn add(&mut self, v: f64, class: usize, weight: u64) {
        match self {
            FeatureObserver::Buffering(buf) => buf.push((v, class, weight)),
            FeatureObserver::Binned(h) => h.add(v, class, weight),
        }
    }

    /// Converts the buffer into a histogram; no-op once binned.
    pub(crate) fn freeze(&mut self, bins: usize, classes: usize) -> &Histogram {
        if let FeatureObserver::Buffering(buf) = self {
            *self = FeatureObserver::Binned(Histogram::from_buffer(buf, bins, classes));
        }
        match self {
            FeatureObserver::Binned(h) => h,
            FeatureObserver::Buffering(_) => unreachable!(),
        }
    }

    pub(crate) fn histogram(&self) -> Option<&Histogram> {
        match self {
            FeatureObserver::Binned(h) => Some(h),
            FeatureObserver::Buffering(_) => None,
        }
    }
}

/// Shannon entropy in bits.
pub(crate) fn entropy(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Information gain of a binary partition; `None` when a side is empty.
fn split_gain(parent_entropy: f64, n: u64, left: &[u64], right: &[u64]) -> Option<f64> {
    let nl: u64 = left.iter().sum();
    let nr: u64 = right.iter().sum();
    if nl == 0 || nr == 0 {
        return None;
    }
    let n = n as f64;
    Some(parent_entropy - (nl as f64 / n) * entropy(left) - (nr as f64 / n) * entropy(right))
}

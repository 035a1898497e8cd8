//! Stream sources: CSV ingestion and seeded synthetic generators.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, SeededRng};
use crate::types::{Instance, LabeledInstance, StreamSchema};

/// Single-consumer pull interface over labeled instances.
pub trait StreamSource {
    fn schema(&self) -> &StreamSchema;

    /// Next record, or `None` once exhausted.
    fn next_instance(&mut self) -> Option<LabeledInstance>;

    /// Drains the remaining records.
    fn collect_all(&mut self) -> Vec<LabeledInstance> {
        std::iter::from_fn(|| self.next_instance()).collect()
    }
}

/// An in-memory stream.
#[derive(Debug, Clone)]
pub struct VecStream {
    schema: StreamSchema,
    data: std::vec::IntoIter<LabeledInstance>,
}

impl VecStream {
    pub fn new(schema: StreamSchema, data: Vec<LabeledInstance>) -> Self {
        Self {
            schema,
            data: data.into_iter(),
        }
    }
}

impl StreamSource for VecStream {
    fn schema(&self) -> &StreamSchema {
        &self.schema
    }

    fn next_instance(&mut self) -> Option<LabeledInstance> {
        self.data.next()
    }
}

/// A fully ingested CSV file.
#[derive(Debug, Clone)]
pub struct CsvStream {
    pub path: PathBuf,
    inner: VecStream,
}

impl StreamSource for CsvStream {
    fn schema(&self) -> &StreamSchema {
        self.inner.schema()
    }

    fn next_instance(&mut self) -> Option<LabeledInstance> {
        self.inner.next_instance()
    }
}

/// Reads a CSV with a header row. Every column except `label_column` must be
/// numeric. Labels become dense indices: when the label texts are exactly the
/// integers `0..c` they keep their value, otherwise they are numbered in
/// first-seen order.
pub fn open_csv_stream(path: &Path, label_column: &str, limit: Option<usize>) -> Result<CsvStream> {
    let ingest = |reason: String| Error::Ingest {
        path: path.to_path_buf(),
        reason,
    };
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| ingest(e.to_string()))?
        .clone();
    if headers.is_empty() {
        return Err(ingest("empty file".into()));
    }
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        // Some published exports pad header names with spaces.
        .or_else(|| headers.iter().position(|h| h.trim() == label_column.trim()))
        .ok_or_else(|| ingest(format!("label column `{label_column}` not found")))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();
    if feature_names.is_empty() {
        return Err(ingest("no feature columns".into()));
    }

    let mut rows: Vec<(Vec<f64>, String)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        if limit.is_some_and(|l| rows.len() >= l) {
            break;
        }
        // Row 1 is the header.
        let row = i + 2;
        let record = record.map_err(|e| ingest(format!("row {row}: {e}")))?;
        if record.len() != headers.len() {
            return Err(ingest(format!(
                "row {row}: expected {} cells, found {}",
                headers.len(),
                record.len()
            )));
        }
        let mut features = Vec::with_capacity(feature_names.len());
        let mut label = String::new();
        for (j, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if cell.is_empty() {
                return Err(Error::Cell {
                    path: path.to_path_buf(),
                    row,
                    column: headers[j].to_string(),
                    reason: "empty cell".into(),
                });
            }
            if j == label_idx {
                label = cell.to_string();
                continue;
            }
            let value: f64 = cell.parse().map_err(|_| Error::Cell {
                path: path.to_path_buf(),
                row,
                column: headers[j].to_string(),
                reason: format!("non-numeric value `{cell}`"),
            })?;
            if !value.is_finite() {
                return Err(Error::Cell {
                    path: path.to_path_buf(),
                    row,
                    column: headers[j].to_string(),
                    reason: format!("non-finite value `{cell}`"),
                });
            }
            features.push(value);
        }
        rows.push((features, label));
    }
    if rows.is_empty() {
        return Err(ingest("no data rows".into()));
    }

    let class_names = label_order(rows.iter().map(|(_, l)| l.as_str()));
    let index: HashMap<&str, usize> = class_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let data: Vec<LabeledInstance> = rows
        .iter()
        .map(|(f, l)| LabeledInstance::new(Instance { features: f.clone() }, index[l.as_str()]))
        .collect();
    let mut class_names = class_names;
    // A stream that only shows one class is still a binary problem.
    while class_names.len() < 2 {
        class_names.push(format!("__unseen{}", class_names.len()));
    }
    let schema = StreamSchema::new(feature_names, label_column, class_names)?;
    Ok(CsvStream {
        path: path.to_path_buf(),
        inner: VecStream::new(schema, data),
    })
}

fn label_order<'a>(labels: impl Iterator<Item = &'a str> + Clone) -> Vec<String> {
    let mut seen: Vec<String> = Vec::new();
    for l in labels {
        if !seen.iter().any(|s| s == l) {
            seen.push(l.to_string());
        }
    }
    let mut numeric: Vec<Option<usize>> = seen.iter().map(|s| s.parse::<usize>().ok()).collect();
    if numeric.iter().all(Option::is_some) {
        numeric.sort();
        let dense = numeric
            .iter()
            .enumerate()
            .all(|(i, v)| *v == Some(i));
        if dense {
            return (0..seen.len()).map(|i| i.to_string()).collect();
        }
    }
    seen
}

/// Writes instances as CSV with the schema's feature names and label column.
/// Labels are written as their class names.
pub fn write_csv<W: Write>(out: W, schema: &StreamSchema, data: &[LabeledInstance]) -> Result<()> {
    let to_err = |e: csv::Error| Error::Ingest {
        path: PathBuf::from("<output>"),
        reason: e.to_string(),
    };
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = schema.feature_names.iter().map(String::as_str).collect();
    header.push(&schema.label_name);
    w.write_record(&header).map_err(to_err)?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for x in data {
        row.clear();
        // `{}` on f64 prints the shortest representation that round-trips.
        row.extend(x.features().iter().map(|v| format!("{v}")));
        row.push(schema.class_names[x.label].clone());
        w.write_record(&row).map_err(to_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: PathBuf::from("<output>"),
        source,
    })?;
    Ok(())
}

/// Bernoulli draws per `(p, length)` segment, concatenated.
pub fn generate_bernoulli_stream(segments: &[(f64, usize)], seed: u64) -> Result<Vec<u8>> {
    if segments.is_empty() {
        return Err(Error::param("segments", "at least one segment is required"));
    }
    for &(p, len) in segments {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::param("segments", format!("probability {p} outside [0, 1]")));
        }
        if len == 0 {
            return Err(Error::param("segments", "segment lengths must be positive"));
        }
    }
    let mut rng = SeededRng::new(seed);
    let mut out = Vec::with_capacity(segments.iter().map(|s| s.1).sum());
    for &(p, len) in segments {
        out.extend((0..len).map(|_| u8::from(rng.bernoulli(p))));
    }
    Ok(out)
}

/// Bernoulli draws whose probability moves linearly from `p0` to `p1` over
/// `[start, start + width)`, constant on either side.
pub fn generate_bernoulli_ramp(p0: f64, p1: f64, start: usize, width: usize, length: usize, seed: u64) -> Result<Vec<u8>> {
    if !(0.0..=1.0).contains(&p0) || !(0.0..=1.0).contains(&p1) {
        return Err(Error::param("p", "probabilities must lie in [0, 1]"));
    }
    if width == 0 || start + width > length {
        return Err(Error::param("width", format!("ramp [{start}, {}) exceeds length {length}", start + width)));
    }
    let mut rng = SeededRng::new(seed);
    Ok((0..length)
        .map(|t| {
            let frac = (t.saturating_sub(start) as f64 / width as f64).min(1.0);
            u8::from(rng.bernoulli(p0 + (p1 - p0) * frac))
        })
        .collect())
}

/// Label rule `1 if w·x > threshold else 0` over `[0,1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConcept {
    pub weights: Vec<f64>,
    pub threshold: f64,
}

impl LinearConcept {
    /// Weights uniform in `[-1, 1]`; the hyperplane passes through the cube
    /// centre, so both classes are roughly balanced.
    pub fn random(features: usize, rng: &mut SeededRng) -> Self {
        let weights: Vec<f64> = (0..features).map(|_| 2.0 * rng.uniform() - 1.0).collect();
        let threshold = weights.iter().sum::<f64>() / 2.0;
        Self { weights, threshold }
    }

    /// Random concept whose weight vector is orthogonal to `other`'s, so the
    /// two disagree on about half of the cube. In one dimension the only
    /// option is the reversed rule.
    pub fn orthogonal_to(other: &LinearConcept, rng: &mut SeededRng) -> Self {
        let a = &other.weights;
        let norm_a: f64 = a.iter().map(|v| v * v).sum();
        if a.len() < 2 || norm_a == 0.0 {
            let weights: Vec<f64> = a.iter().map(|v| -v).collect();
            let threshold = weights.iter().sum::<f64>() / 2.0;
            return Self { weights, threshold };
        }
        loop {
            let r = Self::random(a.len(), rng).weights;
            let proj = r.iter().zip(a).map(|(x, y)| x * y).sum::<f64>() / norm_a;
            let weights: Vec<f64> = r.iter().zip(a).map(|(x, y)| x - proj * y).collect();
            if weights.iter().map(|v| v * v).sum::<f64>() > 1e-6 * norm_a {
                let threshold = weights.iter().sum::<f64>() / 2.0;
                return Self { weights, threshold };
            }
        }
    }

    pub fn label(&self, x: &[f64]) -> usize {
        let dot: f64 = self.weights.iter().zip(x).map(|(w, v)| w * v).sum();
        usize::from(dot > self.threshold)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftKind {
    Abrupt,
    Gradual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptSwitchConfig {
    pub features: usize,
    pub drift_kind: DriftKind,
    pub drift_position: usize,
    /// Transition length; zero for abrupt drift.
    pub drift_width: usize,
    /// Label-flip probability in `[0, 0.5)`.
    pub noise: f64,
    pub length: usize,
    pub seed: u64,
    /// Explicit concepts; drawn from the seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concepts: Option<(LinearConcept, LinearConcept)>,
}

impl ConceptSwitchConfig {
    pub fn abrupt(features: usize, length: usize, position: usize, noise: f64, seed: u64) -> Self {
        Self {
            features,
            drift_kind: DriftKind::Abrupt,
            drift_position: position,
            drift_width: 0,
            noise,
            length,
            seed,
            concepts: None,
        }
    }

    pub fn gradual(features: usize, length: usize, position: usize, width: usize, noise: f64, seed: u64) -> Self {
        Self {
            drift_kind: DriftKind::Gradual,
            drift_width: width,
            ..Self::abrupt(features, length, position, noise, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.features == 0 {
            return Err(Error::param("features", "must be positive"));
        }
        if self.length == 0 {
            return Err(Error::param("length", "must be positive"));
        }
        if !(0.0..0.5).contains(&self.noise) {
            return Err(Error::param("noise", format!("{} outside [0, 0.5)", self.noise)));
        }
        match self.drift_kind {
            DriftKind::Abrupt if self.drift_width != 0 => {
                return Err(Error::param("width", "abrupt drift has zero width"));
            }
            DriftKind::Gradual if self.drift_width == 0 => {
                return Err(Error::param("width", "gradual drift needs a positive width"));
            }
            _ => {}
        }
        if self.drift_position + self.drift_width > self.length {
            return Err(Error::param(
                "width",
                format!(
                    "position {} + width {} exceeds length {}",
                    self.drift_position, self.drift_width, self.length
                ),
            ));
        }
        if let Some((a, b)) = &self.concepts {
            if a.weights.len() != self.features || b.weights.len() != self.features {
                return Err(Error::param("concepts", "concept dimension differs from features"));
            }
        }
        Ok(())
    }

    /// Probability that instance `t` is drawn from the second concept.
    pub fn mix_probability(&self, t: usize) -> f64 {
        if t < self.drift_position {
            0.0
        } else if t >= self.drift_position + self.drift_width {
            1.0
        } else {
            (t - self.drift_position) as f64 / self.drift_width as f64
        }
    }
}

/// Which concept labeled a record, and whether noise flipped it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Origin {
    pub from_second: bool,
    pub flipped: bool,
}

#[derive(Debug, Clone)]
pub struct ConceptSwitchStream {
    cfg: ConceptSwitchConfig,
    schema: StreamSchema,
    concept_a: LinearConcept,
    concept_b: LinearConcept,
    rng: SeededRng,
    position: usize,
}

pub fn generate_concept_switch(cfg: ConceptSwitchConfig) -> Result<ConceptSwitchStream> {
    cfg.validate()?;
    let (concept_a, concept_b) = match &cfg.concepts {
        Some(pair) => pair.clone(),
        None => {
            let mut crng = SeededRng::new(derive_seed(cfg.seed, "concepts"));
            let a = LinearConcept::random(cfg.features, &mut crng);
            let b = LinearConcept::orthogonal_to(&a, &mut crng);
            (a, b)
        }
    };
    let schema = StreamSchema::synthetic(cfg.features, 2)?;
    let rng = SeededRng::new(derive_seed(cfg.seed, "instances"));
    Ok(ConceptSwitchStream {
        cfg,
        schema,
        concept_a,
        concept_b,
        rng,
        position: 0,
    })
}

impl ConceptSwitchStream {
    pub fn concepts(&self) -> (&LinearConcept, &LinearConcept) {
        (&self.concept_a, &self.concept_b)
    }

    pub fn config(&self) -> &ConceptSwitchConfig {
        &self.cfg
    }

    pub fn next_with_origin(&mut self) -> Option<(LabeledInstance, Origin)> {
        if self.position >= self.cfg.length {
            return None;
        }
        let t = self.position;
        self.position += 1;
        let features: Vec<f64> = (0..self.cfg.features).map(|_| self.rng.uniform()).collect();
        // Both draws happen for every record so the sequence stays aligned
        // regardless of drift kind.
        let from_second = self.rng.uniform() < self.cfg.mix_probability(t);
        let flipped = self.rng.uniform() < self.cfg.noise;
        let concept = if from_second { &self.concept_b } else { &self.concept_a };
        let mut label = concept.label(&features);
        if flipped {
            label = 1 - label;
        }
        Some((
            LabeledInstance::new(Instance { features }, label),
            Origin { from_second, flipped },
        ))
    }
}

impl StreamSource for ConceptSwitchStream {
    fn schema(&self) -> &StreamSchema {
        &self.schema
    }

    fn next_instance(&mut self) -> Option<LabeledInstance> {
        self.next_with_origin().map(|(x, _)| x)
    }
}

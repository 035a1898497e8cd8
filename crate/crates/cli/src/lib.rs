//! Command implementations behind the `driftstream` binary.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use driftstream::detectors::DetectorConfig;
use driftstream::eval::{holdout_split, prequential_run, PrequentialReport, RunMeta, CHECKPOINT_INTERVAL};
use driftstream::pwpae::{write_weight_trace, PwpaeModel};
use driftstream::registry::{build_model, ModelName, ModelParams};
use driftstream::sampling::{cluster_sample, KMeansConfig, KMeansInit, Scaling};
use driftstream::streams::{
    generate_concept_switch, open_csv_stream, write_csv, ConceptSwitchConfig, DriftKind, LinearConcept,
    StreamSource, VecStream,
};
use driftstream::trees::HoeffdingTreeConfig;
use driftstream::{AdaptiveLearner, Error, LabeledInstance, StreamSchema};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid value for --{flag}: {reason}")]
    Flag { flag: &'static str, reason: String },

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("model {model}: {source}")]
    Model {
        model: ModelName,
        #[source]
        source: Error,
    },

    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        let core = match self {
            CliError::Flag { .. } | CliError::Output { .. } => return EXIT_USAGE,
            CliError::Model { source, .. } | CliError::Core(source) => source.root(),
        };
        match core {
            Error::Parameter { .. } | Error::DegenerateClustering { .. } => EXIT_USAGE,
            Error::Invariant(_) => EXIT_INTERNAL,
            _ => EXIT_DATA,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn flag(flag: &'static str, reason: impl Into<String>) -> CliError {
    CliError::Flag {
        flag,
        reason: reason.into(),
    }
}

#[derive(Debug, Parser)]
#[command(name = "driftstream", version, about = "Drift-adaptive stream learning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reduce a CSV dataset by k-means cluster sampling.
    Sample(SampleArgs),
    /// Prequential comparison of several models on one stream.
    Compare(CompareArgs),
    /// Write a synthetic concept-drift stream.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleArg {
    Minmax,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftArg {
    Abrupt,
    Gradual,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub label: String,
    #[arg(long, default_value_t = 0.01)]
    pub fraction: f64,
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ScaleArg::Minmax)]
    pub scale: ScaleArg,
    /// Read at most this many data rows.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Defaults to `<input stem>_sampled.csv` beside the input.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthShape {
    #[arg(long, default_value_t = 10_000)]
    pub length: usize,
    #[arg(long, default_value_t = 5000)]
    pub position: usize,
    /// Transition width; defaults to 0 for abrupt and 1000 for gradual drift.
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub features: usize,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value_t = DriftArg::Abrupt)]
    pub kind: DriftArg,
    #[command(flatten)]
    pub shape: SynthShape,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// CSV input; mutually exclusive with --synth.
    #[arg(long, required_unless_present = "synth", conflicts_with = "synth")]
    pub input: Option<PathBuf>,
    #[arg(long, default_value = "label")]
    pub label: String,
    /// Generate the stream instead of reading a file.
    #[arg(long, value_enum)]
    pub synth: Option<DriftArg>,
    #[command(flatten)]
    pub shape: SynthShape,
    /// Label of the normal class; every other label becomes the positive
    /// (abnormal) class.
    #[arg(long)]
    pub normal: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "ht,efdt,lb,arf-adwin,arf-ddm,srp-adwin,srp-ddm,pwpae")]
    pub models: Vec<String>,
    #[arg(long = "train-fraction", default_value_t = 0.10)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long = "adwin-delta", default_value_t = driftstream::detectors::DEFAULT_DELTA)]
    pub adwin_delta: f64,
    #[arg(long = "ddm-warn", default_value_t = driftstream::detectors::DEFAULT_WARNING_COEFF)]
    pub ddm_warn: f64,
    #[arg(long = "ddm-drift", default_value_t = driftstream::detectors::DEFAULT_DRIFT_COEFF)]
    pub ddm_drift: f64,
    #[arg(long, default_value_t = 10)]
    pub members: usize,
    #[arg(long, default_value_t = 6.0)]
    pub lambda: f64,
    #[arg(long = "subspace-fraction", default_value_t = 0.6)]
    pub subspace_fraction: f64,
    #[arg(long, default_value_t = driftstream::pwpae::DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long = "grace-period", default_value_t = 200)]
    pub grace_period: u64,
    #[arg(long = "split-confidence", default_value_t = 1e-7)]
    pub split_confidence: f64,
    #[arg(long = "tie-threshold", default_value_t = 0.05)]
    pub tie_threshold: f64,
    #[arg(long = "numeric-bins", default_value_t = 10)]
    pub numeric_bins: usize,
    #[arg(long = "max-depth")]
    pub max_depth: Option<usize>,
    /// Also write the PWPAE per-instance weight trace.
    #[arg(long = "weight-trace")]
    pub weight_trace: bool,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Messages go to stdout/stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Sample(a) => cmd_sample(&a).map(|s| println!("{s}")),
        Command::Compare(a) => cmd_compare(&a).map(|s| print!("{s}")),
        Command::Synth(a) => cmd_synth(&a).map(|s| println!("{s}")),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Output {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, bytes).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn csv_bytes(schema: &StreamSchema, data: &[LabeledInstance]) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv(&mut buf, schema, data)?;
    Ok(buf)
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn class_ratios(schema: &StreamSchema, data: &[LabeledInstance]) -> Vec<(String, f64)> {
    let mut counts = vec![0usize; schema.class_count()];
    for x in data {
        counts[x.label] += 1;
    }
    schema
        .class_names
        .iter()
        .zip(counts)
        .filter(|(_, n)| *n > 0)
        .map(|(name, n)| (name.clone(), n as f64 / data.len() as f64))
        .collect()
}

#[derive(Serialize)]
struct SampleMeta<'a> {
    input: &'a Path,
    label: &'a str,
    fraction: f64,
    k: usize,
    effective_k: usize,
    seed: u64,
    scale: ScaleArg,
    init: KMeansInit,
    max_iters: usize,
    tol: f64,
    limit: Option<usize>,
    clustered_on: &'static str,
    input_rows: usize,
    output_rows: usize,
    cluster_sizes: Vec<usize>,
    sampled_per_cluster: Vec<usize>,
    class_ratio_before: Vec<(String, f64)>,
    class_ratio_after: Vec<(String, f64)>,
}

pub fn cmd_sample(a: &SampleArgs) -> CliResult<String> {
    if !(a.fraction > 0.0 && a.fraction <= 1.0) {
        return Err(flag("fraction", format!("{} outside (0, 1]", a.fraction)));
    }
    if a.k == 0 {
        return Err(flag("k", "must be at least 1"));
    }
    if a.limit == Some(0) {
        return Err(flag("limit", "must be at least 1"));
    }
    let mut stream = open_csv_stream(&a.input, &a.label, a.limit)?;
    let schema = stream.schema().clone();
    let data = stream.collect_all();
    if a.fraction * (data.len() as f64) < 1.0 {
        return Err(flag(
            "fraction",
            format!("{} of {} rows selects nothing", a.fraction, data.len()),
        ));
    }
    let cfg = KMeansConfig {
        k: a.k,
        seed: a.seed,
        scale: match a.scale {
            ScaleArg::Minmax => Scaling::MinMax,
            ScaleArg::None => Scaling::None,
        },
        ..Default::default()
    };
    let out = cluster_sample(&data, a.fraction, &cfg)?;
    let output = a.output.clone().unwrap_or_else(|| {
        let stem = a.input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        a.input.with_file_name(format!("{stem}_sampled.csv"))
    });
    write_file(&output, &csv_bytes(&schema, &out.data)?)?;
    let meta = SampleMeta {
        input: &a.input,
        label: &a.label,
        fraction: a.fraction,
        k: a.k,
        effective_k: out.effective_k,
        seed: a.seed,
        scale: a.scale,
        init: cfg.init,
        max_iters: cfg.max_iters,
        tol: cfg.tol,
        limit: a.limit,
        clustered_on: "features",
        input_rows: data.len(),
        output_rows: out.data.len(),
        cluster_sizes: out.cluster_sizes.clone(),
        sampled_per_cluster: out.sampled_per_cluster.clone(),
        class_ratio_before: class_ratios(&schema, &data),
        class_ratio_after: class_ratios(&schema, &out.data),
    };
    write_json(&sidecar(&output), &meta)?;
    Ok(format!(
        "sampled {} of {} rows into {}",
        out.data.len(),
        data.len(),
        output.display()
    ))
}

fn synth_config(kind: DriftArg, shape: &SynthShape, seed: u64) -> CliResult<ConceptSwitchConfig> {
    if shape.features == 0 {
        return Err(flag("features", "must be at least 1"));
    }
    if shape.length == 0 {
        return Err(flag("length", "must be at least 1"));
    }
    if !(0.0..0.5).contains(&shape.noise) {
        return Err(flag("noise", format!("{} outside [0, 0.5)", shape.noise)));
    }
    let cfg = match kind {
        DriftArg::Abrupt => {
            if shape.width.is_some_and(|w| w != 0) {
                return Err(flag("width", "abrupt drift has zero width"));
            }
            ConceptSwitchConfig::abrupt(shape.features, shape.length, shape.position, shape.noise, seed)
        }
        DriftArg::Gradual => {
            let width = shape.width.unwrap_or(1000);
            if width == 0 {
                return Err(flag("width", "gradual drift needs a positive width"));
            }
            ConceptSwitchConfig::gradual(shape.features, shape.length, shape.position, width, shape.noise, seed)
        }
    };
    if cfg.drift_width > cfg.length {
        return Err(flag("width", format!("{} exceeds length {}", cfg.drift_width, cfg.length)));
    }
    if cfg.drift_position + cfg.drift_width > cfg.length {
        return Err(flag(
            "position",
            format!(
                "{} plus width {} exceeds length {}",
                cfg.drift_position, cfg.drift_width, cfg.length
            ),
        ));
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct SynthMeta<'a> {
    config: &'a ConceptSwitchConfig,
    concept_a: &'a LinearConcept,
    concept_b: &'a LinearConcept,
    drift_kind: DriftKind,
    drift_position: usize,
    drift_width: usize,
    seed: u64,
}

pub fn cmd_synth(a: &SynthArgs) -> CliResult<String> {
    let cfg = synth_config(a.kind, &a.shape, a.seed)?;
    let mut stream = generate_concept_switch(cfg.clone())?;
    let (ca, cb) = stream.concepts();
    let (ca, cb) = (ca.clone(), cb.clone());
    let schema = stream.schema().clone();
    let data = stream.collect_all();
    write_file(&a.output, &csv_bytes(&schema, &data)?)?;
    let meta = SynthMeta {
        config: &cfg,
        concept_a: &ca,
        concept_b: &cb,
        drift_kind: cfg.drift_kind,
        drift_position: cfg.drift_position,
        drift_width: cfg.drift_width,
        seed: cfg.seed,
    };
    write_json(&sidecar(&a.output), &meta)?;
    Ok(format!("wrote {} rows to {}", data.len(), a.output.display()))
}

/// Collapses every label except `normal` into one positive class.
fn binarize(schema: &StreamSchema, data: Vec<LabeledInstance>, normal: &str) -> CliResult<(StreamSchema, Vec<LabeledInstance>)> {
    let idx = schema
        .class_names
        .iter()
        .position(|c| c == normal)
        .ok_or_else(|| flag("normal", format!("label `{normal}` does not occur in the data")))?;
    let schema = StreamSchema::new(
        schema.feature_names.clone(),
        schema.label_name.clone(),
        vec![normal.to_string(), "abnormal".to_string()],
    )?;
    let data = data
        .into_iter()
        .map(|x| {
            let y = usize::from(x.label != idx);
            LabeledInstance::new(x.instance, y)
        })
        .collect();
    Ok((schema, data))
}

fn model_params(a: &CompareArgs) -> CliResult<ModelParams> {
    if !(a.train_fraction > 0.0 && a.train_fraction < 1.0) {
        return Err(flag("train-fraction", format!("{} outside (0, 1)", a.train_fraction)));
    }
    if !(a.adwin_delta > 0.0 && a.adwin_delta < 1.0) {
        return Err(flag("adwin-delta", format!("{} outside (0, 1)", a.adwin_delta)));
    }
    if !(a.ddm_warn > 0.0) {
        return Err(flag("ddm-warn", "must be positive"));
    }
    if !(a.ddm_drift > a.ddm_warn) {
        return Err(flag("ddm-drift", "must exceed --ddm-warn"));
    }
    if a.members == 0 {
        return Err(flag("members", "must be at least 1"));
    }
    if !(a.lambda > 0.0 && a.lambda.is_finite()) {
        return Err(flag("lambda", "must be positive"));
    }
    if !(a.subspace_fraction > 0.0 && a.subspace_fraction <= 1.0) {
        return Err(flag("subspace-fraction", format!("{} outside (0, 1]", a.subspace_fraction)));
    }
    if !(a.epsilon > 0.0 && a.epsilon.is_finite()) {
        return Err(flag("epsilon", "must be positive"));
    }
    if a.limit == Some(0) {
        return Err(flag("limit", "must be at least 1"));
    }
    let tree = HoeffdingTreeConfig {
        delta: a.split_confidence,
        grace_period: a.grace_period,
        tie_threshold: a.tie_threshold,
        numeric_bins: a.numeric_bins,
        max_depth: a.max_depth,
    };
    if let Err(Error::Parameter { name, reason }) = tree.validate() {
        let f = match name {
            "delta" => "split-confidence",
            "grace_period" => "grace-period",
            "numeric_bins" => "numeric-bins",
            _ => "tie-threshold",
        };
        return Err(flag(f, reason));
    }
    Ok(ModelParams {
        tree,
        detectors: DetectorConfig {
            adwin_delta: a.adwin_delta,
            ddm_warning: a.ddm_warn,
            ddm_drift: a.ddm_drift,
        },
        members: a.members,
        lambda: a.lambda,
        subspace_fraction: a.subspace_fraction,
        epsilon: a.epsilon,
        seed: a.seed,
    })
}

fn parse_models(names: &[String]) -> CliResult<Vec<ModelName>> {
    let mut out = Vec::new();
    for n in names {
        let m: ModelName = n.trim().parse().map_err(|_| {
            flag(
                "models",
                format!("unknown model `{n}`; valid names: {}", ModelName::valid_names()),
            )
        })?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(flag("models", "no models given"));
    }
    Ok(out)
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum InputSource {
    Csv { path: PathBuf, label: String },
    Synthetic { config: ConceptSwitchConfig },
}

#[derive(Serialize)]
struct RunConfig<'a> {
    input: InputSource,
    normal_label: Option<&'a str>,
    models: Vec<&'static str>,
    train_fraction: f64,
    seed: u64,
    limit: Option<usize>,
    params: &'a ModelParams,
    model_seeds: Vec<(&'static str, u64)>,
    features: usize,
    class_names: &'a [String],
    positive_class: &'a str,
    train_rows: usize,
    test_rows: usize,
    checkpoint_interval: u64,
    avg_test_time: &'static str,
}

fn load_input(a: &CompareArgs) -> CliResult<(InputSource, StreamSchema, Vec<LabeledInstance>)> {
    let (source, schema, mut data) = match (&a.input, a.synth) {
        (Some(path), _) => {
            let mut s = open_csv_stream(path, &a.label, a.limit)?;
            let schema = s.schema().clone();
            let source = InputSource::Csv {
                path: path.clone(),
                label: a.label.clone(),
            };
            (source, schema, s.collect_all())
        }
        (None, Some(kind)) => {
            let cfg = synth_config(kind, &a.shape, a.seed)?;
            let mut s = generate_concept_switch(cfg.clone())?;
            let schema = s.schema().clone();
            (InputSource::Synthetic { config: cfg }, schema, s.collect_all())
        }
        (None, None) => return Err(flag("input", "either --input or --synth is required")),
    };
    if let Some(l) = a.limit {
        data.truncate(l);
    }
    match &a.normal {
        Some(n) => {
            let (schema, data) = binarize(&schema, data, n)?;
            Ok((source, schema, data))
        }
        None => Ok((source, schema, data)),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn curve_csv(r: &PrequentialReport) -> String {
    let mut s = String::from("instance_index,cumulative_accuracy\n");
    for p in &r.curve {
        let _ = writeln!(s, "{},{}", p.instance_index, p.cumulative_accuracy);
    }
    s
}

pub fn cmd_compare(a: &CompareArgs) -> CliResult<String> {
    let models = parse_models(&a.models)?;
    let params = model_params(a)?;
    let (source, schema, data) = load_input(a)?;
    let (warm, test) = holdout_split(&data, a.train_fraction)?;
    let d = schema.feature_count();
    let c = schema.class_count();
    fs::create_dir_all(&a.out).map_err(|source| CliError::Output {
        path: a.out.clone(),
        source,
    })?;

    let config = RunConfig {
        input: source,
        normal_label: a.normal.as_deref(),
        models: models.iter().map(|m| m.as_str()).collect(),
        train_fraction: a.train_fraction,
        seed: a.seed,
        limit: a.limit,
        params: &params,
        model_seeds: models
            .iter()
            .map(|m| (m.as_str(), driftstream::derive_seed(a.seed, m.as_str())))
            .collect(),
        features: d,
        class_names: &schema.class_names,
        positive_class: if c == 2 { &schema.class_names[1] } else { "" },
        train_rows: warm.len(),
        test_rows: test.len(),
        checkpoint_interval: CHECKPOINT_INTERVAL,
        avg_test_time: "milliseconds per predict call, training excluded",
    };
    write_json(&a.out.join("run_config.json"), &config)?;

    let mut results = String::from("model,accuracy,precision,recall,f1,avg_test_time_ms\n");
    let mut table = format!(
        "{:<10} {:>9} {:>9} {:>9} {:>9} {:>12}\n",
        "model", "accuracy", "precision", "recall", "f1", "test_ms"
    );
    for &name in &models {
        let wrap = |source: Error| CliError::Model { model: name, source };
        let meta = RunMeta {
            model_name: name.to_string(),
            seed: a.seed,
            config_fingerprint: String::new(),
        };
        let mut stream = VecStream::new(schema.clone(), test.clone());
        let report = if name == ModelName::Pwpae && a.weight_trace {
            let mut m = PwpaeModel::new(&params, d, c).map_err(wrap)?;
            m.enable_trace();
            let r = prequential_run(&mut m, &warm, &mut stream, meta).map_err(wrap)?;
            let mut buf = Vec::new();
            write_weight_trace(&mut buf, m.names(), m.trace().unwrap_or_default())
                .expect("writing to memory cannot fail");
            write_file(&a.out.join("pwpae_weights.csv"), &buf)?;
            r
        } else {
            let mut m: Box<dyn AdaptiveLearner> = build_model(name, &params, d, c).map_err(wrap)?;
            prequential_run(m.as_mut(), &warm, &mut stream, meta).map_err(wrap)?
        };
        let mt = &report.metrics;
        let _ = writeln!(
            results,
            "{},{},{},{},{},{}",
            name,
            mt.accuracy,
            fmt_opt(mt.precision),
            fmt_opt(mt.recall),
            fmt_opt(mt.f1),
            report.mean_test_time_ms()
        );
        let cell = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:.2}", 100.0 * x));
        let _ = writeln!(
            table,
            "{:<10} {:>9} {:>9} {:>9} {:>9} {:>12.4}",
            name.as_str(),
            format!("{:.2}", 100.0 * mt.accuracy),
            cell(mt.precision),
            cell(mt.recall),
            cell(mt.f1),
            report.mean_test_time_ms()
        );
        write_file(&a.out.join(format!("curve_{name}.csv")), curve_csv(&report).as_bytes())?;
        // Written after every model so a later failure keeps earlier rows.
        write_file(&a.out.join("results.csv"), results.as_bytes())?;
    }
    let _ = std::io::stdout().flush();
    Ok(table)
}

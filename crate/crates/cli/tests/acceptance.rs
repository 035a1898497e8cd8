//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use driftstream::detectors::{Detector, DetectorConfig, DetectorKind};
use driftstream::eval::{compute_metrics, holdout_split, prequential_run, ConfusionCounts, ProbeLearner, RunMeta};
use driftstream::pwpae::{fuse, pwpae_weight, PwpaeModel, BASE_LEARNERS, DEFAULT_EPSILON};
use driftstream::registry::{build_model, ModelName, ModelParams};
use driftstream::sampling::{cluster_sample, kmeans_fit, KMeansConfig, Scaling};
use driftstream::streams::{
    generate_bernoulli_ramp, generate_bernoulli_stream, generate_concept_switch, ConceptSwitchConfig, StreamSource,
    VecStream,
};
use driftstream::{ClassDistribution, Instance, LabeledInstance, SeededRng, StreamSchema};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn accuracy(hits: &[bool]) -> f64 {
    hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64
}

// 1. PWPAE against its base learners on the synthetic suite.
fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    for kind in ["abrupt", "gradual"] {
        let mut fused_acc = Vec::new();
        let mut base_acc = vec![Vec::new(); BASE_LEARNERS.len()];
        for seed in 0..20u64 {
            let cfg = match kind {
                "abrupt" => ConceptSwitchConfig::abrupt(10, 10_000, 5000, 0.05, seed),
                _ => ConceptSwitchConfig::gradual(10, 10_000, 5000, 1000, 0.05, seed),
            };
            let data = generate_concept_switch(cfg).unwrap().collect_all();
            let (warm, test) = holdout_split(&data, 0.10).unwrap();
            let params = ModelParams { seed, ..Default::default() };
            let mut model = PwpaeModel::new(&params, 10, 2).unwrap();
            for x in &warm {
                model.process_one(x).unwrap();
            }
            let mut fused_hits = Vec::with_capacity(test.len());
            let mut base_hits = vec![Vec::with_capacity(test.len()); BASE_LEARNERS.len()];
            for x in &test {
                // The record holds predictions made before training on `x`.
                let r = model.process_one(x).unwrap();
                fused_hits.push(r.class == x.label);
                for (h, &p) in base_hits.iter_mut().zip(&r.learner_predictions) {
                    h.push(p == x.label);
                }
            }
            fused_acc.push(accuracy(&fused_hits));
            for (acc, h) in base_acc.iter_mut().zip(&base_hits) {
                acc.push(accuracy(h));
            }
        }
        let fused = mean(&fused_acc);
        let bases: Vec<f64> = base_acc.iter().map(|a| mean(a)).collect();
        let base_mean = mean(&bases);
        let best = bases.iter().cloned().fold(f64::MIN, f64::max);
        let ok = fused >= base_mean && fused >= best - 0.005;
        pass &= ok;
        let names: Vec<String> = BASE_LEARNERS
            .iter()
            .zip(&bases)
            .map(|(n, a)| format!("{n} {:.2}", 100.0 * a))
            .collect();
        detail.push(format!(
            "{kind}: pwpae {:.2} vs base mean {:.2}, best {:.2} [{}]",
            100.0 * fused,
            100.0 * base_mean,
            100.0 * best,
            names.join(", ")
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 30.0 * 60.0;
    detail.push(format!("runtime {secs:.0}s"));
    outcome(pass, detail.join("; "))
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_driftstream"))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let o = bin().args(args).output().map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr).trim()))
    }
}

fn results_accuracy(dir: &Path) -> Vec<(String, f64)> {
    std::fs::read_to_string(dir.join("results.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split(',');
            (it.next().unwrap().to_string(), it.next().unwrap().parse().unwrap())
        })
        .collect()
}

fn pwpae_rank(dir: &Path) -> usize {
    let mut acc = results_accuracy(dir);
    acc.sort_by(|a, b| b.1.total_cmp(&a.1));
    1 + acc.iter().position(|(m, _)| m == "pwpae").unwrap()
}

/// Sample at 1% then compare all eight models, for three seeds. Returns the
/// PWPAE rank per seed.
fn sample_then_compare(input: &Path, label: &str, normal: Option<&str>, work: &Path) -> Result<Vec<usize>, String> {
    let mut ranks = Vec::new();
    for seed in 0..3u64 {
        let s = seed.to_string();
        let sampled = work.join(format!("sampled_{seed}.csv"));
        let out = work.join(format!("compare_{seed}"));
        run_cli(&[
            "sample",
            "--input",
            input.to_str().unwrap(),
            "--label",
            label,
            "--fraction",
            "0.01",
            "--seed",
            &s,
            "--output",
            sampled.to_str().unwrap(),
        ])?;
        let mut args = vec![
            "compare",
            "--input",
            sampled.to_str().unwrap(),
            "--label",
            label,
            "--seed",
            &s,
            "--out",
            out.to_str().unwrap(),
        ];
        if let Some(n) = normal {
            args.extend(["--normal", n]);
        }
        run_cli(&args)?;
        ranks.push(pwpae_rank(&out));
    }
    Ok(ranks)
}

// 2. Optional dataset path.
fn criterion_2() -> Outcome {
    let work = tempfile::tempdir().unwrap();
    let mut pass = true;
    let mut detail = Vec::new();

    // Pipeline check on a synthetic CSV large enough for a 1% sample.
    let synth = work.path().join("synthetic.csv");
    let pipeline = run_cli(&[
        "synth",
        "--length",
        "100000",
        "--position",
        "50000",
        "--output",
        synth.to_str().unwrap(),
    ])
    .and_then(|_| sample_then_compare(&synth, "label", None, work.path()));
    match pipeline {
        Ok(ranks) => detail.push(format!("synthetic pipeline completed, pwpae ranks {ranks:?}")),
        Err(e) => {
            pass = false;
            detail.push(format!("synthetic pipeline failed: {e}"));
        }
    }

    for (name, default_label, default_normal) in [
        ("IOTID20", "Label", "Normal"),
        ("CICIDS2017", "Label", "BENIGN"),
    ] {
        let Ok(path) = std::env::var(format!("DRIFTSTREAM_{name}")) else {
            detail.push(format!("{name}: NOT RUN (DRIFTSTREAM_{name} unset)"));
            continue;
        };
        let label = std::env::var(format!("DRIFTSTREAM_{name}_LABEL")).unwrap_or(default_label.into());
        let normal = std::env::var(format!("DRIFTSTREAM_{name}_NORMAL")).unwrap_or(default_normal.into());
        let dir = work.path().join(name);
        std::fs::create_dir_all(&dir).unwrap();
        match sample_then_compare(&PathBuf::from(path), &label, Some(&normal), &dir) {
            Ok(ranks) => {
                let ok = ranks.contains(&1);
                pass &= ok;
                detail.push(format!("{name}: pwpae ranks {ranks:?}"));
            }
            Err(e) => {
                pass = false;
                detail.push(format!("{name}: failed: {e}"));
            }
        }
    }
    outcome(pass, detail.join("; "))
}

fn first_detection_after(kind: DetectorKind, errors: &[u8], change: usize) -> usize {
    Detector::build(kind, &DetectorConfig::default())
        .unwrap()
        .detection_indices(errors)
        .into_iter()
        .find(|&i| i >= change)
        .map_or(errors.len() - change, |i| i - change)
}

fn p95(mut v: Vec<usize>) -> usize {
    v.sort_unstable();
    v[(0.95 * v.len() as f64).ceil() as usize - 1]
}

// 3. Detector delay and false alarms.
fn criterion_3() -> Outcome {
    let abrupt = |kind| -> Vec<usize> {
        (0..100)
            .map(|s| {
                let e = generate_bernoulli_stream(&[(0.2, 1000), (0.8, 1000)], s).unwrap();
                first_detection_after(kind, &e, 1000)
            })
            .collect()
    };
    let gradual = |kind| -> f64 {
        let d: Vec<f64> = (0..100)
            .map(|s| {
                let e = generate_bernoulli_ramp(0.2, 0.8, 5000, 1000, 10_000, s).unwrap();
                first_detection_after(kind, &e, 5000) as f64
            })
            .collect();
        mean(&d)
    };
    let alarms: Vec<f64> = (0..100)
        .map(|s| {
            let e = generate_bernoulli_stream(&[(0.2, 10_000)], 1_000 + s).unwrap();
            Detector::build(DetectorKind::Adwin, &DetectorConfig::default())
                .unwrap()
                .detection_indices(&e)
                .len() as f64
        })
        .collect();
    let adwin_p95 = p95(abrupt(DetectorKind::Adwin));
    let ddm_p95 = p95(abrupt(DetectorKind::Ddm));
    let false_alarms = mean(&alarms);
    let (ga, gd) = (gradual(DetectorKind::Adwin), gradual(DetectorKind::Ddm));
    let pass = adwin_p95 <= 300 && ddm_p95 <= 500 && false_alarms <= 1.0 && ga < gd;
    outcome(
        pass,
        format!(
            "ADWIN p95 delay {adwin_p95} (<= 300), false alarms/10k {false_alarms:.2} (<= 1); \
             DDM p95 delay {ddm_p95} (<= 500); gradual mean delay ADWIN {ga:.1} < DDM {gd:.1}"
        ),
    )
}

/// Distance in units of the last place between `w` and the value `q + c`,
/// where `c` is a small correction to `q`.
fn ulps_from(w: f64, q: f64, c: f64) -> f64 {
    let ulp = f64::from_bits(q.to_bits() + 1) - q;
    ((w - q) - c).abs() / ulp
}

/// `1 / (e + eps)` carried to roughly twice f64 precision.
fn reciprocal_oracle(e: f64, eps: f64) -> (f64, f64) {
    // Exact sum as s + err.
    let s = e + eps;
    let bb = s - e;
    let err = (e - (s - bb)) + (eps - bb);
    let q = 1.0 / s;
    // Residual of the division, exact thanks to the fused multiply-add.
    let r = (-q).mul_add(s, 1.0);
    (q, (r - q * err) / s)
}

// 4. Weight rule exactness.
fn criterion_4() -> Outcome {
    let mut worst = 0.0f64;
    for eps in [DEFAULT_EPSILON, 1e-6, 0.05] {
        for i in 0..1000 {
            let e = i as f64 / 999.0;
            let (q, c) = reciprocal_oracle(e, eps);
            worst = worst.max(ulps_from(pwpae_weight(e, eps), q, c));
        }
    }
    let zero_exact = [DEFAULT_EPSILON, 1e-6, 0.05]
        .iter()
        .all(|&eps| pwpae_weight(0.0, eps) == 1.0 / eps);
    let pass = worst <= 1.0 && zero_exact;
    outcome(
        pass,
        format!(
            "max deviation {worst:.3} ulp over 3 x 1000 grid; weight at error 0 equals 1/eps: {zero_exact} (w = {})",
            pwpae_weight(0.0, DEFAULT_EPSILON)
        ),
    )
}

// 5. Fused argmax is invariant to scaling the weights.
fn criterion_5() -> Outcome {
    let mut rng = SeededRng::new(5);
    let mut flips = 0;
    for _ in 0..10_000 {
        let k = 1 + rng.below(6);
        let c = 2 + rng.below(4);
        let weights: Vec<f64> = (0..k).map(|_| 1.0 / (rng.uniform() + DEFAULT_EPSILON)).collect();
        let dists: Vec<ClassDistribution> = (0..k)
            .map(|_| {
                let raw: Vec<f64> = (0..c).map(|_| rng.uniform()).collect();
                let t: f64 = raw.iter().sum();
                ClassDistribution(raw.iter().map(|v| v / t).collect())
            })
            .collect();
        let scale = 10f64.powf(6.0 * rng.uniform() - 3.0);
        let scaled: Vec<f64> = weights.iter().map(|w| w * scale).collect();
        if fuse(&weights, &dists, c).class != fuse(&scaled, &dists, c).class {
            flips += 1;
        }
    }
    outcome(flips == 0, format!("{flips} class changes over 10000 scaled tuples"))
}

fn random_stream(rng: &mut SeededRng, n: usize, d: usize) -> Vec<LabeledInstance> {
    (0..n)
        .map(|_| {
            let f: Vec<f64> = (0..d).map(|_| rng.uniform()).collect();
            let y = usize::from(f[0] + 0.3 * rng.uniform() > 0.6);
            LabeledInstance::new(Instance::new(f).unwrap(), y)
        })
        .collect()
}

/// Independent recount of accuracy, precision, recall and F1.
fn recount(log: &[(usize, usize)]) -> [f64; 4] {
    let n = log.len() as f64;
    let hits = log.iter().filter(|(p, y)| p == y).count() as f64;
    let pred_pos = log.iter().filter(|(p, _)| *p == 1).count() as f64;
    let real_pos = log.iter().filter(|(_, y)| *y == 1).count() as f64;
    let tp = log.iter().filter(|&&(p, y)| p == 1 && y == 1).count() as f64;
    let precision = if pred_pos > 0.0 { tp / pred_pos } else { 0.0 };
    let recall = if real_pos > 0.0 { tp / real_pos } else { 0.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    [hits / n, precision, recall, f1]
}

// 6. Metrics against a brute-force recount of prediction logs.
fn criterion_6() -> Outcome {
    let mut rng = SeededRng::new(6);
    let schema = StreamSchema::synthetic(2, 2).unwrap();
    let mut mismatches = 0;
    for run in 0..1000 {
        let n = 20 + rng.below(200);
        let data = random_stream(&mut rng, n, 2);
        let (warm, test) = holdout_split(&data, 0.1).unwrap();
        let name = [ModelName::Ht, ModelName::Efdt][run % 2];
        let mut model = build_model(name, &ModelParams::default(), 2, 2).unwrap();
        let mut s = VecStream::new(schema.clone(), test);
        let r = prequential_run(model.as_mut(), &warm, &mut s, RunMeta::default()).unwrap();
        let m = compute_metrics(&ConfusionCounts::from_log(&r.log)).unwrap();
        let got = [m.accuracy, m.precision.unwrap(), m.recall.unwrap(), m.f1.unwrap()];
        let reported = [
            r.metrics.accuracy,
            r.metrics.precision.unwrap(),
            r.metrics.recall.unwrap(),
            r.metrics.f1.unwrap(),
        ];
        if got != recount(&r.log) || reported != got {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} mismatching runs out of 1000 (exact comparison)"))
}

// 7. Test-then-train order.
fn criterion_7() -> Outcome {
    let mut rng = SeededRng::new(7);
    let schema = StreamSchema::synthetic(3, 2).unwrap();
    let mut violations = 0;
    let runs = 500;
    for _ in 0..runs {
        let n = 20 + rng.below(500);
        let data = random_stream(&mut rng, n, 3);
        let frac = 0.05 + 0.5 * rng.uniform();
        let (warm, test) = holdout_split(&data, frac).unwrap();
        let mut probe = ProbeLearner::new(3, 2);
        let mut s = VecStream::new(schema.clone(), test);
        prequential_run(&mut probe, &warm, &mut s, RunMeta::default()).unwrap();
        violations += probe.violations();
    }
    outcome(violations == 0, format!("{violations} probe violations over {runs} evaluator runs"))
}

fn blob_data(per_blob: usize, seed: u64) -> Vec<LabeledInstance> {
    let mut rng = SeededRng::new(seed);
    let mut out = Vec::new();
    for (b, center) in [0.0, 10.0].into_iter().enumerate() {
        for _ in 0..per_blob {
            let r = 0.5 * rng.uniform().sqrt();
            let t = std::f64::consts::TAU * rng.uniform();
            let f = vec![center + r * t.cos(), center + r * t.sin()];
            out.push(LabeledInstance::new(Instance::new(f).unwrap(), b));
        }
    }
    out
}

fn non_increasing(h: &[f64]) -> bool {
    h.windows(2).all(|w| w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0))
}

// 8. Sampling contracts.
fn criterion_8() -> Outcome {
    let mut rng = SeededRng::new(8);
    let mut size_errors = 0;
    let mut monotone_errors = 0;
    let mut fits = 0;
    for i in 0..500u64 {
        let n = 10 + rng.below(400);
        let d = 1 + rng.below(5);
        let data: Vec<LabeledInstance> = (0..n)
            .map(|_| {
                let f: Vec<f64> = (0..d).map(|_| (8.0 * rng.uniform()).round()).collect();
                LabeledInstance::new(Instance::new(f).unwrap(), rng.below(2))
            })
            .collect();
        let fraction = (1.0 / n as f64).max(rng.uniform());
        let cfg = KMeansConfig {
            k: 1 + rng.below(12),
            seed: i,
            scale: if i % 2 == 0 { Scaling::MinMax } else { Scaling::None },
            ..Default::default()
        };
        let out = cluster_sample(&data, fraction, &cfg).unwrap();
        fits += 1;
        if out.data.len() != (fraction * n as f64).round() as usize {
            size_errors += 1;
        }
        if !non_increasing(&out.inertia_history) {
            monotone_errors += 1;
        }
    }

    let blobs = blob_data(100, 80);
    let cfg = KMeansConfig { k: 2, seed: 1, ..Default::default() };
    let out = cluster_sample(&blobs, 0.1, &cfg).unwrap();
    let from_a = out.indices.iter().filter(|&&i| i < 100).count();
    let from_b = out.indices.len() - from_a;
    let points: Vec<Vec<f64>> = blobs.iter().map(|x| x.instance.features.clone()).collect();
    let fit = kmeans_fit(&points, &cfg).unwrap();
    fits += 2;
    if !non_increasing(&fit.inertia_history) || !non_increasing(&out.inertia_history) {
        monotone_errors += 1;
    }
    let centroids_ok = [(0usize, 0.0), (100, 10.0)].iter().all(|&(i, c)| {
        let m = &fit.centroids[fit.assignments[i]];
        ((m[0] - c).powi(2) + (m[1] - c).powi(2)).sqrt() < 0.2
    });
    let pass = size_errors == 0 && monotone_errors == 0 && from_a == 10 && from_b == 10 && centroids_ok;
    outcome(
        pass,
        format!(
            "{size_errors}/500 size mismatches; two blobs sampled {from_a}+{from_b} (10+10), centroids within 0.2: \
             {centroids_ok}; {monotone_errors} inertia increases over {fits} fits"
        ),
    )
}

// 9. PWPAE prediction latency.
fn criterion_9() -> Outcome {
    let data = generate_concept_switch(ConceptSwitchConfig::abrupt(80, 3000, 1500, 0.05, 9))
        .unwrap()
        .collect_all();
    let (warm, test) = holdout_split(&data, 0.1).unwrap();
    let mut model = PwpaeModel::new(&ModelParams::default(), 80, 2).unwrap();
    let mut s = VecStream::new(StreamSchema::synthetic(80, 2).unwrap(), test);
    let r = prequential_run(&mut model, &warm, &mut s, RunMeta::default()).unwrap();
    let ms = r.mean_test_time_ms();
    outcome(
        ms < 10.0,
        format!("mean predict latency {ms:.4} ms over {} instances (d=80, c=2, 10 members)", r.evaluated),
    )
}

/// results.csv without its timing column.
fn results_without_timing(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string() + "\n")
        .collect()
}

fn dir_snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            let bytes = if name == "results.csv" {
                results_without_timing(&p).into_bytes()
            } else {
                std::fs::read(&p).unwrap()
            };
            (name, bytes)
        })
        .collect();
    files.sort();
    files
}

// 10. CLI determinism.
fn criterion_10() -> Outcome {
    let work = tempfile::tempdir().unwrap();
    let mut snapshots = Vec::new();
    let mut errors = Vec::new();
    for round in 0..2 {
        let dir = work.path().join(format!("round{round}"));
        std::fs::create_dir_all(&dir).unwrap();
        let stream = dir.join("stream.csv");
        let sampled = dir.join("sampled.csv");
        let out = dir.join("compare");
        let steps: [Vec<&str>; 3] = [
            vec![
                "synth", "--kind", "gradual", "--length", "4000", "--position", "2000", "--width", "500", "--seed", "3",
                "--output", stream.to_str().unwrap(),
            ],
            vec![
                "sample", "--input", stream.to_str().unwrap(), "--label", "label", "--fraction", "0.5", "--seed", "3",
                "--output", sampled.to_str().unwrap(),
            ],
            vec![
                "compare", "--input", sampled.to_str().unwrap(), "--seed", "3", "--members", "4", "--weight-trace",
                "--out", out.to_str().unwrap(),
            ],
        ];
        for s in &steps {
            if let Err(e) = run_cli(s) {
                errors.push(e);
            }
        }
        let mut snap = dir_snapshot(&dir);
        snap.extend(dir_snapshot(&out).into_iter().map(|(n, b)| (format!("compare/{n}"), b)));
        // Paths embedded in sidecars differ between rounds by directory only.
        let dir_text = dir.to_string_lossy().into_owned();
        for (_, bytes) in &mut snap {
            let text = String::from_utf8_lossy(bytes).replace(&dir_text, "<dir>");
            *bytes = text.into_bytes();
        }
        snapshots.push(snap);
    }
    let names: Vec<&str> = snapshots[0].iter().map(|(n, _)| n.as_str()).collect();
    let differing: Vec<&str> = snapshots[0]
        .iter()
        .zip(&snapshots[1])
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.as_str())
        .collect();
    let pass = errors.is_empty() && differing.is_empty() && snapshots[0].len() == snapshots[1].len();
    outcome(
        pass,
        format!(
            "{} files compared ({}), differing: {:?}{}",
            names.len(),
            names.join(", "),
            differing,
            if errors.is_empty() { String::new() } else { format!("; errors: {errors:?}") }
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("synthetic suite: PWPAE vs base learners", criterion_1),
        ("dataset path: sample then compare", criterion_2),
        ("detector delay and false alarms", criterion_3),
        ("weight rule exactness", criterion_4),
        ("fused argmax scale invariance", criterion_5),
        ("metric oracle equivalence", criterion_6),
        ("test-then-train protocol", criterion_7),
        ("sampling contracts", criterion_8),
        ("PWPAE prediction latency", criterion_9),
        ("CLI determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "criterion {:>2} {} {name}: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

use driftstream::detectors::{Detector, DetectorConfig, DetectorKind};
use driftstream::streams::{generate_bernoulli_ramp, generate_bernoulli_stream};

const SEEDS: u64 = 100;

fn detector(kind: DetectorKind) -> Detector {
    Detector::build(kind, &DetectorConfig::default()).unwrap()
}

/// Samples from `change` to the first detection at or after it; a miss
/// counts as the remaining stream length.
fn delay(kind: DetectorKind, errors: &[u8], change: usize) -> usize {
    detector(kind)
        .detection_indices(errors)
        .into_iter()
        .find(|&i| i >= change)
        .map_or(errors.len() - change, |i| i - change)
}

fn p95(mut v: Vec<usize>) -> usize {
    v.sort_unstable();
    // Nearest-rank percentile.
    v[(0.95 * v.len() as f64).ceil() as usize - 1]
}

fn abrupt_delays(kind: DetectorKind) -> Vec<usize> {
    (0..SEEDS)
        .map(|s| {
            let e = generate_bernoulli_stream(&[(0.2, 1000), (0.8, 1000)], s).unwrap();
            delay(kind, &e, 1000)
        })
        .collect()
}

fn gradual_mean_delay(kind: DetectorKind) -> f64 {
    let total: usize = (0..SEEDS)
        .map(|s| {
            let e = generate_bernoulli_ramp(0.2, 0.8, 5000, 1000, 10_000, s).unwrap();
            delay(kind, &e, 5000)
        })
        .sum();
    total as f64 / SEEDS as f64
}

#[test]
fn adwin_abrupt_delay_p95() {
    let d = p95(abrupt_delays(DetectorKind::Adwin));
    assert!(d <= 300, "ADWIN p95 delay {d}");
}

#[test]
fn ddm_abrupt_delay_p95() {
    let d = p95(abrupt_delays(DetectorKind::Ddm));
    assert!(d <= 500, "DDM p95 delay {d}");
}

#[test]
fn adwin_false_alarms_on_stationary_stream() {
    let total: usize = (0..SEEDS)
        .map(|s| {
            let e = generate_bernoulli_stream(&[(0.2, 10_000)], 10_000 + s).unwrap();
            detector(DetectorKind::Adwin).detection_indices(&e).len()
        })
        .sum();
    let mean = total as f64 / SEEDS as f64;
    assert!(mean <= 1.0, "mean false alarms {mean}");
}

#[test]
fn adwin_reacts_faster_than_ddm_to_gradual_drift() {
    let a = gradual_mean_delay(DetectorKind::Adwin);
    let d = gradual_mean_delay(DetectorKind::Ddm);
    eprintln!("gradual mean delay: adwin {a}, ddm {d}");
    assert!(a < d, "adwin {a} ddm {d}");
}

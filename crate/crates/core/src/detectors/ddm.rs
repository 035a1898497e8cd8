use crate::error::{Error, Result};
use crate::types::DriftSignal;

pub const DEFAULT_WARNING_COEFF: f64 = 2.0;
pub const DEFAULT_DRIFT_COEFF: f64 = 3.0;
pub const DEFAULT_MIN_INSTANCES: u64 = 30;

/// Drift detection method over a 0/1 error stream.
///
/// Tracks the running error probability `p` and its deviation
/// `s = sqrt(p(1-p)/n)`. The pair `(p_min, s_min)` is recorded jointly at the
/// smallest `p + s` seen with `s > 0`; a stream with no errors yet has no
/// baseline and stays stable.
#[derive(Debug, Clone)]
pub struct DdmDetector {
    warning_coeff: f64,
    drift_coeff: f64,
    min_instances: u64,
    n: u64,
    errors: u64,
    p: f64,
    s: f64,
    minimum: Option<(f64, f64)>,
    last: DriftSignal,
}

impl Default for DdmDetector {
    fn default() -> Self {
        Self::new(DEFAULT_WARNING_COEFF, DEFAULT_DRIFT_COEFF).expect("defaults are valid")
    }
}

impl DdmDetector {
    pub fn new(warning_coeff: f64, drift_coeff: f64) -> Result<Self> {
        if !(warning_coeff > 0.0) {
            return Err(Error::param("ddm-warn", format!("{warning_coeff} must be positive")));
        }
        if !(drift_coeff > warning_coeff) {
            return Err(Error::param(
                "ddm-drift",
                format!("{drift_coeff} must exceed the warning coefficient {warning_coeff}"),
            ));
        }
        Ok(Self {
            warning_coeff,
            drift_coeff,
            min_instances: DEFAULT_MIN_INSTANCES,
            n: 0,
            errors: 0,
            p: 0.0,
            s: 0.0,
            minimum: None,
            last: DriftSignal::Stable,
        })
    }

    pub fn with_min_instances(mut self, min_instances: u64) -> Self {
        self.min_instances = min_instances;
        self
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn error_probability(&self) -> f64 {
        self.p
    }

    pub fn deviation(&self) -> f64 {
        self.s
    }

    /// Recorded `(p_min, s_min)`, if any.
    pub fn minimum(&self) -> Option<(f64, f64)> {
        self.minimum
    }

    pub fn last_signal(&self) -> DriftSignal {
        self.last
    }

    pub fn update(&mut self, error: u8) -> Result<DriftSignal> {
        if error > 1 {
            return Err(Error::param("error", format!("{error} is not 0 or 1")));
        }
        self.n += 1;
        self.errors += u64::from(error);
        let n = self.n as f64;
        self.p = self.errors as f64 / n;
        self.s = (self.p * (1.0 - self.p) / n).sqrt();

        if self.n < self.min_instances {
            self.last = DriftSignal::Stable;
            return Ok(self.last);
        }
        let level = self.p + self.s;
        if self.s > 0.0 && self.minimum.is_none_or(|(pm, sm)| level < pm + sm) {
            self.minimum = Some((self.p, self.s));
        }
        let signal = match self.minimum {
            Some((pm, sm)) if level > pm + self.drift_coeff * sm => DriftSignal::Drift,
            Some((pm, sm)) if level > pm + self.warning_coeff * sm => DriftSignal::Warning,
            _ => DriftSignal::Stable,
        };
        if signal == DriftSignal::Drift {
            self.reset();
        }
        self.last = signal;
        Ok(signal)
    }

    pub fn reset(&mut self) {
        self.n = 0;
        self.errors = 0;
        self.p = 0.0;
        self.s = 0.0;
        self.minimum = None;
        self.last = DriftSignal::Stable;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent evaluation of the detector recurrence on a 0/1 sequence:
    /// returns (first warning index, first drift index).
    fn recurrence_oracle(errors: &[u8]) -> (Option<usize>, Option<usize>) {
        let mut k = 0.0f64;
        let mut best = f64::INFINITY;
        let mut pm = 0.0;
        let mut sm = 0.0;
        let mut warn = None;
        for (i, &e) in errors.iter().enumerate() {
            let n = (i + 1) as f64;
            k += e as f64;
            let p = k / n;
            let s = (p * (1.0 - p) / n).sqrt();
            if n < 30.0 {
                continue;
            }
            if s > 0.0 && p + s < best {
                best = p + s;
                pm = p;
                sm = s;
            }
            if best.is_finite() {
                if p + s > pm + 3.0 * sm {
                    return (warn, Some(i));
                }
                if p + s > pm + 2.0 * sm && warn.is_none() {
                    warn = Some(i);
                }
            }
        }
        (warn, None)
    }

    fn first_signals(errors: &[u8]) -> (Option<usize>, Option<usize>) {
        let mut d = DdmDetector::default();
        let mut warn = None;
        for (i, &e) in errors.iter().enumerate() {
            match d.update(e).unwrap() {
                DriftSignal::Drift => return (warn, Some(i)),
                DriftSignal::Warning if warn.is_none() => warn = Some(i),
                _ => {}
            }
        }
        (warn, None)
    }

    #[test]
    fn all_zero_stream_is_stable() {
        let mut d = DdmDetector::default();
        for _ in 0..20_000 {
            assert_eq!(d.update(0).unwrap(), DriftSignal::Stable);
        }
    }

    #[test]
    fn zeros_then_ones_drifts_where_recurrence_says() {
        let mut errors = vec![0u8; 1000];
        errors.extend(std::iter::repeat_n(1u8, 200));
        let expected = recurrence_oracle(&errors);
        assert_eq!(expected, (Some(1001), Some(1002)));
        assert_eq!(first_signals(&errors), expected);
    }

    #[test]
    fn warning_precedes_drift_at_half_error_rate() {
        let mut errors = vec![0u8; 1000];
        errors.extend(crate::streams::generate_bernoulli_stream(&[(0.5, 2000)], 4).unwrap());
        let (warn, drift) = first_signals(&errors);
        assert_eq!((warn, drift), recurrence_oracle(&errors));
        assert!(warn.unwrap() < drift.unwrap());
    }

    #[test]
    fn silent_before_min_instances() {
        let mut d = DdmDetector::default();
        let pattern = [0u8, 0, 0, 0, 1, 1, 1, 1, 1, 1];
        for i in 0..29 {
            assert_eq!(d.update(pattern[i % pattern.len()]).unwrap(), DriftSignal::Stable);
        }
    }

    #[test]
    fn reset_clears_warning_and_matches_fresh() {
        let mut errors = vec![0u8; 100];
        errors.extend([1, 0, 0, 0, 0, 0, 1, 1]);
        let mut d = DdmDetector::default();
        for &e in &errors {
            d.update(e).unwrap();
        }
        d.reset();
        assert_eq!(d.last_signal(), DriftSignal::Stable);
        let mut fresh = DdmDetector::default();
        let tail = crate::streams::generate_bernoulli_stream(&[(0.2, 100)], 8).unwrap();
        for &e in &tail {
            assert_eq!(d.update(e).unwrap(), fresh.update(e).unwrap());
        }
        assert_eq!(d.n(), fresh.n());
        assert_eq!(d.error_probability(), fresh.error_probability());
        assert_eq!(d.minimum(), fresh.minimum());
    }

    #[test]
    fn rejects_bad_input() {
        let mut d = DdmDetector::default();
        assert!(d.update(2).is_err());
        assert!(DdmDetector::new(3.0, 2.0).is_err());
        assert!(DdmDetector::new(0.0, 2.0).is_err());
    }
}

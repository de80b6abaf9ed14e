//! Post-impact force traces and the collision metrics derived from them.
//!
//! A trace starts at the instant the measuring device crossed its onset
//! threshold (20 N by default), so `t = 0` is the onset and nothing before it
//! is available. Samples are uniformly spaced.

mod io;
mod metrics;

pub use io::{read_trace, read_trace_str, write_metrics_csv, write_trace, write_trace_string};
pub use metrics::{
    analyze, classify, clamping_force, estimate_robot_mass, impulse_to_peak, impulse_until,
    oscillation_swings, peak, phase1_duration, smooth, total_impulse, window_maxima,
    AnalysisConfig, CollisionMetrics, CollisionType, StopEvent, WindowMaxima,
};

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("sample rate must be positive and finite, got {0}")]
    InvalidSampleRate(f64),
    #[error("sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("first sample {first} N is below the onset threshold {threshold} N")]
    BelowOnset { first: f64, threshold: f64 },
    #[error("trace is empty")]
    Empty,
    #[error("trace has {have} samples, {needed} needed")]
    TooShort { needed: usize, have: usize },
    #[error("initial velocity must be positive, got {0}")]
    NonPositiveVelocity(f64),
    #[error("{0}")]
    Format(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = TraceError> = std::result::Result<T, E>;

/// Uniformly sampled force signal starting at onset.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceTrace {
    sample_rate: f64,
    samples: Vec<f64>,
    onset_threshold: f64,
    duration_cap: f64,
}

impl ForceTrace {
    pub const DEFAULT_ONSET_THRESHOLD: f64 = 20.0;
    pub const DEFAULT_DURATION_CAP: f64 = 5.0;

    pub fn new(sample_rate: f64, samples: Vec<f64>) -> Result<Self> {
        Self::with_settings(
            sample_rate,
            samples,
            Self::DEFAULT_ONSET_THRESHOLD,
            Self::DEFAULT_DURATION_CAP,
        )
    }

    /// Samples past `duration_cap` seconds are discarded.
    pub fn with_settings(
        sample_rate: f64,
        mut samples: Vec<f64>,
        onset_threshold: f64,
        duration_cap: f64,
    ) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(TraceError::InvalidSampleRate(sample_rate));
        }
        if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
            return Err(TraceError::NonFinite { index });
        }
        if !(onset_threshold >= 0.0 && onset_threshold.is_finite()) {
            return Err(TraceError::Format(format!(
                "onset threshold must be >= 0, got {onset_threshold}"
            )));
        }
        if !(duration_cap > 0.0) {
            return Err(TraceError::Format(format!(
                "duration cap must be positive, got {duration_cap}"
            )));
        }
        if let Some(&first) = samples.first() {
            if first < onset_threshold {
                return Err(TraceError::BelowOnset {
                    first,
                    threshold: onset_threshold,
                });
            }
        }
        if duration_cap.is_finite() {
            let max_len = (duration_cap * sample_rate).round() as usize;
            samples.truncate(max_len);
        }
        Ok(Self {
            sample_rate,
            samples,
            onset_threshold,
            duration_cap,
        })
    }

    /// A trace in which the onset threshold was never reached.
    pub fn empty(sample_rate: f64) -> Result<Self> {
        Self::new(sample_rate, Vec::new())
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn onset_threshold(&self) -> f64 {
        self.onset_threshold
    }

    pub fn duration_cap(&self) -> f64 {
        self.duration_cap
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    /// Time of sample `i` after onset, s.
    pub fn time_of(&self, i: usize) -> f64 {
        i as f64 / self.sample_rate
    }

    /// Time of the last sample, s.
    pub fn duration(&self) -> f64 {
        self.samples.len().saturating_sub(1) as f64 / self.sample_rate
    }

    /// Number of samples covering `seconds`.
    pub(crate) fn samples_in(&self, seconds: f64) -> usize {
        (seconds * self.sample_rate).round() as usize
    }

    /// Multiplies every sample by `factor`, keeping the other settings.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::with_settings(
            self.sample_rate,
            self.samples.iter().map(|s| s * factor).collect(),
            self.onset_threshold,
            self.duration_cap,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(matches!(
            ForceTrace::new(0.0, vec![30.0]),
            Err(TraceError::InvalidSampleRate(_))
        ));
        assert!(matches!(
            ForceTrace::new(1000.0, vec![30.0, f64::NAN]),
            Err(TraceError::NonFinite { index: 1 })
        ));
        assert!(matches!(
            ForceTrace::new(1000.0, vec![10.0, 30.0]),
            Err(TraceError::BelowOnset { .. })
        ));
        assert!(ForceTrace::with_settings(1000.0, vec![0.0, 10.0], 0.0, 5.0).is_ok());
        assert!(ForceTrace::empty(1000.0).unwrap().is_empty());
    }

    #[test]
    fn truncates_at_duration_cap() {
        let t = ForceTrace::new(1000.0, vec![25.0; 6000]).unwrap();
        assert_eq!(t.len(), 5000);
        assert!((t.duration() - 4.999).abs() < 1e-12);
    }
}

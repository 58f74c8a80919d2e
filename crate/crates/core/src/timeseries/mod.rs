//! Uniformly sampled EMG channels and the conditioning chain applied to them:
//! low-pass filtering, running-average downsampling, rectification,
//! partitioning into trial or fixed-length windows, and peak detection.

mod downsample;
mod filter;
pub mod io;
mod peaks;
mod segment;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use downsample::running_avg_downsample;
pub use filter::{lowpass_iir, FilterDesign, FilterKind, FilterSpec};
pub use peaks::{detect_peaks, PeakSet};
pub use segment::{segment, Segment, WindowSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("sampling rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("cutoff {cutoff_hz} Hz is not inside (0, {nyquist_hz}) Hz")]
    CutoffAboveNyquist { cutoff_hz: f64, nyquist_hz: f64 },
    #[error("filter order must be at least 1")]
    InvalidOrder,
    #[error("trace has {len} samples, at least {needed} required")]
    TraceTooShort { len: usize, needed: usize },
    #[error("target rate {target_hz} Hz exceeds input rate {rate_hz} Hz")]
    RateIncrease { rate_hz: f64, target_hz: f64 },
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("interval {index} [{start_s}, {end_s}) lies outside the trace extent [{t0}, {t_end})")]
    IntervalOutOfRange {
        index: usize,
        start_s: f64,
        end_s: f64,
        t0: f64,
        t_end: f64,
    },
    #[error("interval {index} overlaps or precedes the previous interval")]
    OverlappingIntervals { index: usize },
    #[error("interval {index} contains no samples")]
    EmptyInterval { index: usize },
    #[error("segment contains no samples")]
    EmptySegment,
}

/// Recording site of a channel.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Muscle {
    /// Triceps brachii.
    Tb,
    /// Flexor carpi radialis.
    Fcr,
    Other(String),
}

impl fmt::Display for Muscle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Muscle::Tb => f.write_str("TB"),
            Muscle::Fcr => f.write_str("FCR"),
            Muscle::Other(name) => f.write_str(name),
        }
    }
}

impl FromStr for Muscle {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_uppercase().as_str() {
            "TB" => Muscle::Tb,
            "FCR" => Muscle::Fcr,
            _ => Muscle::Other(s.trim().to_string()),
        })
    }
}

/// A single-channel voltage series sampled at a fixed rate.
///
/// Sample `i` is taken at `t0 + i / rate`. `transient` counts the leading
/// samples produced while a filter was still settling; they are kept so that
/// indices stay aligned with trial windows.
#[derive(Debug, Clone, PartialEq)]
pub struct EmgTrace {
    pub samples: Vec<f64>,
    pub rate: f64,
    pub muscle: Muscle,
    pub t0: f64,
    pub transient: usize,
}

impl EmgTrace {
    pub fn new(samples: Vec<f64>, rate: f64, muscle: Muscle, t0: f64) -> Result<Self, SignalError> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(SignalError::InvalidRate(rate));
        }
        Ok(Self {
            samples,
            rate,
            muscle,
            t0,
            transient: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Covered time span, `len / rate` seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.rate
    }

    pub fn time_at(&self, index: usize) -> f64 {
        self.t0 + index as f64 / self.rate
    }

    pub fn with_muscle(mut self, muscle: Muscle) -> Self {
        self.muscle = muscle;
        self
    }

    /// Copy of this trace's metadata carrying new samples.
    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            samples,
            rate: self.rate,
            muscle: self.muscle.clone(),
            t0: self.t0,
            transient: self.transient,
        }
    }
}

/// Full-wave rectification: `|x|` sample by sample.
pub fn rectify(trace: &EmgTrace) -> EmgTrace {
    trace.with_samples(trace.samples.iter().map(|v| v.abs()).collect())
}

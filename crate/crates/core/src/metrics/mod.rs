//! Closed-form performance measures: switching degree, specific density,
//! mapped physiological output (MPO), raw peak (RP), unmatched muscle power
//! (UMP) with its power classes, and spikiness.

mod histogram;
pub mod io;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use histogram::{default_class_edges, ump_histogram, UmpHistogram};

/// Display scaling for UMP reported in the historical `V·m*(0.3048)` unit.
pub const LEGACY_UNIT_SCALE: f64 = 0.3048;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("duration must be positive, got {0}")]
    ZeroDuration(f64),
    #[error("volume must be positive, got {0}")]
    ZeroVolume(f64),
    #[error("required distance must be positive, got {0}")]
    NonpositiveRequiredDistance(f64),
    #[error("amplitude must be non-negative, got {0}")]
    NegativeAmplitude(f64),
    #[error("UMP is undefined for a perfect trial (MPO = 0)")]
    UndefinedForPerfectTrial,
    #[error("window mean is zero or negative; spikiness undefined")]
    ZeroMeanWindow,
    #[error("window is empty")]
    EmptyWindow,
    #[error("class edges must be finite and strictly ascending")]
    UnsortedEdges,
    #[error("at least two class edges are required")]
    TooFewEdges,
    #[error("value {0} is not a finite number")]
    NonFinite(f64),
}

/// One reach: required and achieved virtual distances and, when known, its
/// time window `[t_start_s, t_end_s)` in recording time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub block_id: String,
    pub trial_index: u32,
    pub d_req: f64,
    pub d_moved: f64,
    pub window: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub d_begin: f64,
    pub d_end: f64,
    pub duration_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterweightSpec {
    /// Grams.
    pub weight_w: f64,
    /// Cubic centimetres.
    pub volume: f64,
}

impl CounterweightSpec {
    pub fn specific_density(&self) -> Result<f64, MetricsError> {
        specific_density(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PowerClass {
    Matched,
    Underpowered,
    Overpowered,
    Undefined,
}

impl PowerClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            PowerClass::Matched => "MATCHED",
            PowerClass::Underpowered => "UNDERPOWERED",
            PowerClass::Overpowered => "OVERPOWERED",
            PowerClass::Undefined => "UNDEFINED",
        }
    }
}

impl fmt::Display for PowerClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PowerClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "MATCHED" => Ok(PowerClass::Matched),
            "UNDERPOWERED" => Ok(PowerClass::Underpowered),
            "OVERPOWERED" => Ok(PowerClass::Overpowered),
            "UNDEFINED" => Ok(PowerClass::Undefined),
            other => Err(format!("unknown power class `{other}`")),
        }
    }
}

/// UMP of one trial. `value` is `None` exactly when the class is
/// [`PowerClass::Undefined`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ump {
    pub value: Option<f64>,
    pub class: PowerClass,
}

impl Ump {
    pub fn defined(&self) -> Result<f64, MetricsError> {
        self.value.ok_or(MetricsError::UndefinedForPerfectTrial)
    }
}

/// Per-trial (or per-window) measures. Fields that do not apply to a design
/// are `None`; fixed-window sessions carry no MPO or UMP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialMetrics {
    pub rp: f64,
    pub mpo: Option<f64>,
    pub ump: Option<f64>,
    pub power_class: Option<PowerClass>,
    pub spikiness_z: Option<f64>,
}

/// `(d_end - d_begin) / t`, signed.
pub fn switching_degree(ev: &SwitchEvent) -> Result<f64, MetricsError> {
    if !(ev.duration_t > 0.0) {
        return Err(MetricsError::ZeroDuration(ev.duration_t));
    }
    Ok((ev.d_end - ev.d_begin) / ev.duration_t)
}

pub fn specific_density(c: &CounterweightSpec) -> Result<f64, MetricsError> {
    if !(c.volume > 0.0) {
        return Err(MetricsError::ZeroVolume(c.volume));
    }
    Ok(c.weight_w / c.volume)
}

/// `|d_req - d_moved| / d_req`; zero for a perfect reach.
pub fn mpo(tr: &TrialRecord) -> Result<f64, MetricsError> {
    mpo_from(tr.d_req, tr.d_moved)
}

pub(crate) fn mpo_from(d_req: f64, d_moved: f64) -> Result<f64, MetricsError> {
    if !(d_req > 0.0) {
        return Err(MetricsError::NonpositiveRequiredDistance(d_req));
    }
    Ok((d_req - d_moved).abs() / d_req)
}

/// Peak rectified amplitude per second of trial.
pub fn raw_peak(sg_max: f64, tr_duration: f64) -> Result<f64, MetricsError> {
    if !(tr_duration > 0.0) {
        return Err(MetricsError::ZeroDuration(tr_duration));
    }
    if !(sg_max >= 0.0) {
        return Err(MetricsError::NegativeAmplitude(sg_max));
    }
    Ok(sg_max / tr_duration)
}

/// Band of a defined UMP value: 0 and 1 are matched, `(0, 1)` under-,
/// above 1 over-powered.
pub fn classify_ump(value: f64) -> PowerClass {
    if value == 0.0 || value == 1.0 {
        PowerClass::Matched
    } else if value < 1.0 {
        PowerClass::Underpowered
    } else {
        PowerClass::Overpowered
    }
}

/// `rp / mpo`. A perfect trial (`mpo == 0`) yields an undefined result
/// rather than an error so it can be counted and excluded downstream.
pub fn ump(rp: f64, mpo: f64) -> Result<Ump, MetricsError> {
    if !(rp >= 0.0) {
        return Err(MetricsError::NegativeAmplitude(rp));
    }
    if !mpo.is_finite() {
        return Err(MetricsError::NonFinite(mpo));
    }
    if mpo <= 0.0 {
        return Ok(Ump {
            value: None,
            class: PowerClass::Undefined,
        });
    }
    let value = rp / mpo;
    Ok(Ump {
        value: Some(value),
        class: classify_ump(value),
    })
}

/// `(max - min) / mean` over a rectified window.
pub fn spikiness(window: &[f64]) -> Result<f64, MetricsError> {
    if window.is_empty() {
        return Err(MetricsError::EmptyWindow);
    }
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for &v in window {
        lo = lo.min(v);
        hi = hi.max(v);
        sum += v;
    }
    let mean = sum / window.len() as f64;
    if !(mean > 0.0) {
        return Err(MetricsError::ZeroMeanWindow);
    }
    Ok((hi - lo) / mean)
}

//! Deterministic synthetic traces and sessions, with a brute-force oracle
//! for the metrics the pipeline should produce from them.

mod oracle;
mod session;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::IngestError;
use crate::timeseries::{EmgTrace, Muscle};

pub use oracle::{filter_impulse_response, oracle_condition, oracle_metrics, window_measures, OracleRow, OracleWindows};
pub use session::{gen_session, random_plan, PlanTrial, SessionPlan, SynthOptions, SynthSession};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthesis spec: {0}")]
    InvalidSpec(String),
    #[error("plan does not fit the design: {0}")]
    PlanMismatch(String),
    #[error(transparent)]
    Io(#[from] IngestError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Component {
    Sine { freq_hz: f64, amp: f64, phase: f64 },
    /// Isosceles triangle of the given full base width, peaking at `apex`
    /// at `t_center`.
    Burst { t_center: f64, width: f64, apex: f64 },
    Constant { level: f64 },
    /// Additive zero-mean Gaussian noise.
    Noise { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    /// ChaCha stream, so independent channels can share one seed.
    #[serde(default)]
    pub stream: u64,
    pub components: Vec<Component>,
    pub rate: f64,
    pub duration: f64,
}

/// Standard-normal deviates by the Box-Muller transform over a ChaCha8
/// stream: each pair of `u64` draws `(a, b)` gives
/// `u1 = ((a >> 11) + 1) / 2^53` in `(0, 1]`, `u2 = (b >> 11) / 2^53`, and
/// yields `sqrt(-2 ln u1) cos(2 pi u2)` then `sqrt(-2 ln u1) sin(2 pi u2)`.
pub struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        let u1 = ((self.rng.random::<u64>() >> 11) + 1) as f64 * SCALE;
        let u2 = (self.rng.random::<u64>() >> 11) as f64 * SCALE;
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }
}

fn check_spec(spec: &SynthSpec) -> Result<usize, SynthError> {
    if !(spec.rate.is_finite() && spec.rate > 0.0) {
        return Err(SynthError::InvalidSpec(format!("rate must be positive, got {}", spec.rate)));
    }
    if !(spec.duration.is_finite() && spec.duration > 0.0) {
        return Err(SynthError::InvalidSpec(format!("duration must be positive, got {}", spec.duration)));
    }
    let n = (spec.duration * spec.rate).round() as usize;
    if n < 2 {
        return Err(SynthError::InvalidSpec("fewer than two samples".into()));
    }
    for c in &spec.components {
        let ok = match *c {
            Component::Sine { freq_hz, amp, phase } => freq_hz.is_finite() && freq_hz >= 0.0 && amp.is_finite() && phase.is_finite(),
            Component::Burst { t_center, width, apex } => t_center.is_finite() && width > 0.0 && width.is_finite() && apex.is_finite(),
            Component::Constant { level } => level.is_finite(),
            Component::Noise { sigma } => sigma.is_finite() && sigma >= 0.0,
        };
        if !ok {
            return Err(SynthError::InvalidSpec(format!("bad component {c:?}")));
        }
    }
    Ok(n)
}

/// Sum of the components on the grid `t_i = i / rate`,
/// `i < round(duration * rate)`. Noise components draw from one stream in
/// component order.
pub fn gen_trace(spec: &SynthSpec) -> Result<EmgTrace, SynthError> {
    let n = check_spec(spec)?;
    let mut x = vec![0.0; n];
    let mut noise = GaussianStream::new(spec.seed, spec.stream);
    for c in &spec.components {
        match *c {
            Component::Sine { freq_hz, amp, phase } => {
                for (i, v) in x.iter_mut().enumerate() {
                    *v += amp * (2.0 * PI * freq_hz * i as f64 / spec.rate + phase).sin();
                }
            }
            Component::Burst { t_center, width, apex } => {
                let half = width / 2.0;
                let lo = (((t_center - half) * spec.rate).floor().max(0.0) as usize).min(n);
                let hi = (((t_center + half) * spec.rate).ceil().max(0.0) as usize + 1).min(n);
                for (i, v) in x.iter_mut().enumerate().take(hi).skip(lo) {
                    let d = (i as f64 / spec.rate - t_center).abs();
                    if d < half {
                        *v += apex * (1.0 - d / half);
                    }
                }
            }
            Component::Constant { level } => x.iter_mut().for_each(|v| *v += level),
            Component::Noise { sigma } => x.iter_mut().for_each(|v| *v += sigma * noise.next_normal()),
        }
    }
    EmgTrace::new(x, spec.rate, Muscle::Tb, 0.0).map_err(|e| SynthError::InvalidSpec(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(components: Vec<Component>) -> SynthSpec {
        SynthSpec {
            seed: 42,
            stream: 0,
            components,
            rate: 100.0,
            duration: 10.0,
        }
    }

    #[test]
    fn constant_trace() {
        let t = gen_trace(&spec(vec![Component::Constant { level: 0.5 }])).unwrap();
        assert_eq!(t.len(), 1000);
        assert!(t.samples.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn dense_sine_reaches_amplitude() {
        let mut s = spec(vec![Component::Sine { freq_hz: 5.0, amp: 1.0, phase: 0.0 }]);
        s.rate = 10_000.0;
        let t = gen_trace(&s).unwrap();
        let max = t.samples.iter().copied().fold(f64::MIN, f64::max);
        assert!((max - 1.0).abs() < 1e-4 && max <= 1.0);
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let s = spec(vec![Component::Noise { sigma: 1.0 }]);
        let a = gen_trace(&s).unwrap();
        assert_eq!(a, gen_trace(&s).unwrap());
        let mut other = s.clone();
        other.seed = 43;
        assert_ne!(a.samples, gen_trace(&other).unwrap().samples);
        let mut stream = s.clone();
        stream.stream = 1;
        assert_ne!(a.samples, gen_trace(&stream).unwrap().samples);
        let n = a.len() as f64;
        let mean = a.samples.iter().sum::<f64>() / n;
        let var = a.samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.1 && (var - 1.0).abs() < 0.15, "{mean} {var}");
    }

    #[test]
    fn burst_is_a_triangle() {
        let t = gen_trace(&spec(vec![Component::Burst { t_center: 2.0, width: 1.0, apex: 2.0 }])).unwrap();
        assert_eq!(t.samples[200], 2.0);
        assert!((t.samples[225] - 1.0).abs() < 1e-12);
        assert_eq!(t.samples[150], 0.0);
        assert_eq!(t.samples[250], 0.0);
        assert!((t.samples[175] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_specs() {
        let mut s = spec(vec![]);
        s.rate = 0.0;
        assert!(matches!(gen_trace(&s), Err(SynthError::InvalidSpec(_))));
        assert!(gen_trace(&spec(vec![Component::Noise { sigma: -1.0 }])).is_err());
    }
}

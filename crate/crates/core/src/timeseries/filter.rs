use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{EmgTrace, SignalError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum FilterKind {
    #[default]
    Lowpass,
}

/// How the analog Butterworth prototype is mapped to a digital filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum FilterDesign {
    /// Sampled analog impulse response, realised as parallel second-order
    /// sections and rescaled to unit DC gain. Tracks the analog magnitude
    /// closely well below Nyquist.
    #[default]
    ImpulseInvariant,
    /// Bilinear transform prewarped at the cutoff: exact -3 dB point,
    /// compressed stopband.
    Bilinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub cutoff_hz: f64,
    pub order: usize,
    pub kind: FilterKind,
    pub design: FilterDesign,
}

impl FilterSpec {
    pub fn lowpass(cutoff_hz: f64, order: usize) -> Self {
        Self {
            cutoff_hz,
            order,
            kind: FilterKind::Lowpass,
            design: FilterDesign::default(),
        }
    }

    pub fn with_design(mut self, design: FilterDesign) -> Self {
        self.design = design;
        self
    }

    fn check(&self, rate: f64) -> Result<(), SignalError> {
        if self.order == 0 {
            return Err(SignalError::InvalidOrder);
        }
        let nyquist_hz = rate / 2.0;
        if !(self.cutoff_hz > 0.0 && self.cutoff_hz < nyquist_hz) {
            return Err(SignalError::CutoffAboveNyquist {
                cutoff_hz: self.cutoff_hz,
                nyquist_hz,
            });
        }
        Ok(())
    }

    /// Digital filter realising this spec at `rate`.
    pub fn design_for(&self, rate: f64) -> Result<DigitalFilter, SignalError> {
        self.check(rate)?;
        Ok(match self.design {
            FilterDesign::ImpulseInvariant => impulse_invariant(self.cutoff_hz, self.order, rate),
            FilterDesign::Bilinear => bilinear(self.cutoff_hz, self.order, rate),
        })
    }
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self::lowpass(40.0, 2)
    }
}

/// `b0 + b1 z^-1 + b2 z^-2` over `1 + a1 z^-1 + a2 z^-2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Section {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + self.b[1] * z_inv + self.b[2] * z2) / (1.0 + self.a[0] * z_inv + self.a[1] * z2)
    }

    // Transposed direct form II, zero initial state.
    fn run(&self, input: &[f64], out: &mut [f64], accumulate: bool) {
        let (mut s1, mut s2) = (0.0, 0.0);
        for (x, y) in input.iter().zip(out.iter_mut()) {
            let v = self.b[0] * x + s1;
            s1 = self.b[1] * x - self.a[0] * v + s2;
            s2 = self.b[2] * x - self.a[1] * v;
            if accumulate {
                *y += v;
            } else {
                *y = v;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    /// Section outputs are summed.
    Parallel,
    /// Each section feeds the next.
    Cascade,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DigitalFilter {
    pub sections: Vec<Section>,
    pub topology: Topology,
}

impl DigitalFilter {
    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; input.len()];
        match self.topology {
            Topology::Parallel => {
                for s in &self.sections {
                    s.run(input, &mut out, true);
                }
            }
            Topology::Cascade => {
                let mut buf = input.to_vec();
                for s in &self.sections {
                    s.run(&buf, &mut out, false);
                    buf.copy_from_slice(&out);
                }
            }
        }
        out
    }

    /// Complex gain at `freq_hz` for a filter running at `rate`.
    pub fn frequency_response(&self, freq_hz: f64, rate: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq_hz / rate);
        match self.topology {
            Topology::Parallel => self.sections.iter().map(|s| s.response(z_inv)).sum(),
            Topology::Cascade => self.sections.iter().map(|s| s.response(z_inv)).product(),
        }
    }
}

/// Left-half-plane poles of the order-`n` Butterworth prototype scaled to
/// `omega`, keeping one of each conjugate pair (upper half plane) followed by
/// the real pole when `n` is odd.
fn prototype_poles(n: usize, omega: f64) -> (Vec<Complex64>, Vec<Complex64>) {
    let all: Vec<Complex64> = (0..n)
        .map(|k| {
            let theta = PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
            Complex64::from_polar(omega, theta)
        })
        .collect();
    let upper: Vec<Complex64> = all.iter().copied().filter(|p| p.im > 1e-12 * omega).collect();
    (all, upper)
}

fn impulse_invariant(cutoff_hz: f64, order: usize, rate: f64) -> DigitalFilter {
    let t = 1.0 / rate;
    let wc = 2.0 * PI * cutoff_hz;
    let (poles, upper) = prototype_poles(order, wc);
    let residue = |p: Complex64| -> Complex64 {
        let denom: Complex64 = poles
            .iter()
            .filter(|q| (**q - p).norm() > 1e-9 * wc)
            .map(|q| p - q)
            .product();
        Complex64::new(wc.powi(order as i32), 0.0) / denom
    };

    let mut sections = Vec::with_capacity(order.div_ceil(2));
    for &p in &upper {
        let r = residue(p);
        let a = (p * t).exp();
        sections.push(Section {
            b: [2.0 * t * r.re, -2.0 * t * (r * a.conj()).re, 0.0],
            a: [-2.0 * a.re, a.norm_sqr()],
        });
    }
    if order % 2 == 1 {
        let p = Complex64::new(-wc, 0.0);
        let r = residue(p);
        sections.push(Section {
            b: [t * r.re, 0.0, 0.0],
            a: [-(p.re * t).exp(), 0.0],
        });
    }

    let dc: f64 = sections.iter().map(Section::dc_gain).sum();
    for s in &mut sections {
        for b in &mut s.b {
            *b /= dc;
        }
    }
    DigitalFilter {
        sections,
        topology: Topology::Parallel,
    }
}

fn bilinear(cutoff_hz: f64, order: usize, rate: f64) -> DigitalFilter {
    let half_t = 0.5 / rate;
    let warped = 2.0 * rate * (PI * cutoff_hz / rate).tan();
    let (_, upper) = prototype_poles(order, warped);
    let to_z = |p: Complex64| (1.0 + p * half_t) / (1.0 - p * half_t);

    let mut sections = Vec::with_capacity(order.div_ceil(2));
    for &p in &upper {
        let z = to_z(p);
        let a = [-2.0 * z.re, z.norm_sqr()];
        let g = (1.0 + a[0] + a[1]) / 4.0;
        sections.push(Section {
            b: [g, 2.0 * g, g],
            a,
        });
    }
    if order % 2 == 1 {
        let z = to_z(Complex64::new(-warped, 0.0)).re;
        let g = (1.0 - z) / 2.0;
        sections.push(Section {
            b: [g, g, 0.0],
            a: [-z, 0.0],
        });
    }
    DigitalFilter {
        sections,
        topology: Topology::Cascade,
    }
}

/// Single forward pass of a Butterworth low-pass. The first `4 * order`
/// output samples are marked as transient.
pub fn lowpass_iir(trace: &EmgTrace, spec: &FilterSpec) -> Result<EmgTrace, SignalError> {
    let filter = spec.design_for(trace.rate)?;
    let needed = 4 * spec.order;
    if trace.len() < needed || trace.is_empty() {
        return Err(SignalError::TraceTooShort {
            len: trace.len(),
            needed: needed.max(1),
        });
    }
    let mut out = trace.with_samples(filter.apply(&trace.samples));
    out.transient = trace.transient.max(needed);
    Ok(out)
}

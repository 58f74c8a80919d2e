//! Reference computation written against the definitions only. Nothing here
//! calls into the filtering, averaging, windowing or peak code it checks.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::experiment::PipelineConfig;
use crate::metrics::{PowerClass, TrialMetrics, TrialRecord};
use crate::timeseries::{FilterDesign, Muscle};

/// Relative size below which impulse-response tails are dropped.
const TAIL_CUTOFF: f64 = 1e-20;

/// Butterworth low-pass poles `wc * exp(i pi (2k + n + 1) / 2n)`.
fn butterworth_poles(order: usize, wc: f64) -> Vec<Complex64> {
    (0..order)
        .map(|k| Complex64::from_polar(wc, PI * (2 * k + order + 1) as f64 / (2 * order) as f64))
        .collect()
}

/// Impulse response of the digital low-pass from its partial-fraction
/// expansion, truncated once the pole envelope has decayed.
///
/// Impulse invariance: `h[n] = g T sum_k r_k exp(s_k n T)` with analog
/// residues `r_k = wc^N / prod_{j != k} (s_k - s_j)` and `g` fixing the sum
/// of `h` to one.
///
/// Bilinear: with `w = 1/z` and digital poles `z_k`,
/// `H(w) = G (1 + w)^N / prod (1 - z_k w) = c0 + sum_k c_k / (1 - z_k w)`,
/// so `h[0] = c0 + sum c_k` and `h[n] = sum c_k z_k^n`.
pub fn filter_impulse_response(cutoff_hz: f64, order: usize, rate: f64, design: FilterDesign) -> Vec<f64> {
    let t = 1.0 / rate;
    let (terms, direct): (Vec<(Complex64, Complex64)>, f64) = match design {
        FilterDesign::ImpulseInvariant => {
            let wc = 2.0 * PI * cutoff_hz;
            let s = butterworth_poles(order, wc);
            let terms: Vec<(Complex64, Complex64)> = s
                .iter()
                .enumerate()
                .map(|(k, &sk)| {
                    let mut denom = Complex64::new(1.0, 0.0);
                    for (j, &sj) in s.iter().enumerate() {
                        if j != k {
                            denom *= sk - sj;
                        }
                    }
                    (Complex64::new(wc.powi(order as i32), 0.0) / denom * t, (sk * t).exp())
                })
                .collect();
            let dc: f64 = terms.iter().map(|&(c, z)| c / (1.0 - z)).sum::<Complex64>().re;
            (terms.into_iter().map(|(c, z)| (c / dc, z)).collect(), 0.0)
        }
        FilterDesign::Bilinear => {
            let warped = 2.0 * rate * (PI * cutoff_hz / rate).tan();
            let z: Vec<Complex64> = butterworth_poles(order, warped)
                .into_iter()
                .map(|p| (2.0 * rate + p) / (2.0 * rate - p))
                .collect();
            let g = z.iter().map(|&zk| 1.0 - zk).product::<Complex64>() / 2f64.powi(order as i32);
            let c0 = g / z.iter().map(|&zk| -zk).product::<Complex64>();
            let terms = z
                .iter()
                .enumerate()
                .map(|(k, &zk)| {
                    let mut denom = Complex64::new(1.0, 0.0);
                    for (j, &zj) in z.iter().enumerate() {
                        if j != k {
                            denom *= 1.0 - zj / zk;
                        }
                    }
                    (g * (1.0 + 1.0 / zk).powi(order as i32) / denom, zk)
                })
                .collect();
            (terms, c0.re)
        }
    };

    let scale: f64 = terms.iter().map(|(c, _)| c.norm()).sum();
    let slowest = terms.iter().map(|(_, z)| z.norm()).fold(0.0, f64::max);
    let mut h = Vec::new();
    let mut envelope = scale;
    let mut n = 0i32;
    while envelope > TAIL_CUTOFF * scale || n < 2 {
        let v: Complex64 = terms.iter().map(|&(c, z)| c * z.powi(n)).sum();
        h.push(v.re + if n == 0 { direct } else { 0.0 });
        envelope *= slowest;
        n += 1;
    }
    h
}

/// Low-pass by direct convolution, then the mean of `avg_window` input
/// samples starting at `floor(k * rate / target)` for every `k` whose window
/// fits. Returns the signed conditioned samples.
pub fn oracle_condition(raw: &[f64], rate: f64, cfg: &PipelineConfig) -> Vec<f64> {
    let h = filter_impulse_response(cfg.filter.cutoff_hz, cfg.filter.order, rate, cfg.filter.design);
    let filtered: Vec<f64> = (0..raw.len())
        .map(|n| (0..h.len().min(n + 1)).map(|m| h[m] * raw[n - m]).sum())
        .collect();
    let w = cfg.avg_window;
    let mut out = Vec::new();
    for k in 0.. {
        let start = (k as f64 * rate / cfg.target_rate).floor() as usize;
        if start + w > filtered.len() {
            break;
        }
        let mut sum = 0.0;
        for v in &filtered[start..start + w] {
            sum += v;
        }
        out.push(sum / w as f64);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleWindows {
    /// Trial intervals in seconds; ends past the conditioned signal are cut.
    Intervals(Vec<(f64, f64)>),
    /// Consecutive windows of this length; a partial tail is dropped.
    Fixed(f64),
    /// This many equal parts of the conditioned signal.
    EqualSplit(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub trial: u32,
    pub muscle: Muscle,
    pub metrics: TrialMetrics,
}

fn index_ranges(len: usize, target: f64, t0: f64, windows: &OracleWindows) -> Vec<(usize, usize)> {
    let end_t = t0 + len as f64 / target;
    let to_index = |t: f64| {
        // first grid point at or after t, forgiving rounding on the grid
        let x = (t - t0) * target;
        let r = x.round();
        if (x - r).abs() < 1e-9 {
            r as usize
        } else {
            x.ceil() as usize
        }
    };
    match windows {
        OracleWindows::Intervals(iv) => iv.iter().map(|&(s, e)| (to_index(s), to_index(e.min(end_t)).min(len))).collect(),
        OracleWindows::Fixed(d) => {
            let per = d * target;
            let mut out = Vec::new();
            let mut k = 0usize;
            while (k + 1) as f64 * per <= len as f64 + 1e-9 * per {
                out.push(((k as f64 * per).round() as usize, (((k + 1) as f64 * per).round() as usize).min(len)));
                k += 1;
            }
            out
        }
        OracleWindows::EqualSplit(parts) => (0..*parts).map(|k| (k * len / parts, (k + 1) * len / parts)).collect(),
    }
}

/// Closed-form measures of one rectified window sampled at `rate`.
pub fn window_measures(rect: &[f64], rate: f64, mpo: Option<f64>, with_spikiness: bool) -> TrialMetrics {
    let max = rect.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = rect.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = rect.iter().sum::<f64>() / rect.len() as f64;
    let rp = max / (rect.len() as f64 / rate);
    let (ump, power_class) = match mpo {
        None => (None, None),
        Some(0.0) => (None, Some(PowerClass::Undefined)),
        Some(m) => {
            let u = rp / m;
            let class = if u == 0.0 || u == 1.0 {
                PowerClass::Matched
            } else if u < 1.0 {
                PowerClass::Underpowered
            } else {
                PowerClass::Overpowered
            };
            (Some(u), Some(class))
        }
    };
    TrialMetrics {
        rp,
        mpo,
        ump,
        power_class,
        spikiness_z: (with_spikiness && mean > 0.0).then(|| (max - min) / mean),
    }
}

/// Expected per-row measures for one block, TB rows before FCR rows within
/// each trial. `records` are matched to windows in trial order.
pub fn oracle_metrics(
    tb_raw: &[f64],
    fcr_raw: &[f64],
    rate: f64,
    t0: f64,
    windows: &OracleWindows,
    records: Option<&[TrialRecord]>,
    cfg: &PipelineConfig,
) -> Vec<OracleRow> {
    let channels = [(Muscle::Tb, oracle_condition(tb_raw, rate, cfg)), (Muscle::Fcr, oracle_condition(fcr_raw, rate, cfg))];
    let target = cfg.target_rate;
    let ranges = index_ranges(channels[0].1.len(), target, t0, windows);
    let with_spikiness = records.is_none() || cfg.trial_spikiness;
    let mut out = Vec::new();
    for (k, &(s, e)) in ranges.iter().enumerate() {
        let record = records.map(|r| &r[k]);
        let mpo = record.map(|r| (r.d_req - r.d_moved).abs() / r.d_req);
        for (muscle, cond) in &channels {
            let rect: Vec<f64> = cond[s..e].iter().map(|v| v.abs()).collect();
            out.push(OracleRow {
                trial: record.map_or(k as u32 + 1, |r| r.trial_index),
                muscle: muscle.clone(),
                metrics: window_measures(&rect, target, mpo, with_spikiness),
            });
        }
    }
    out
}

use super::{EmgTrace, SignalError};

/// Start index of output window `k` on the input grid: `floor(k * rate / target)`.
fn window_start(k: usize, rate: f64, target_rate: f64) -> usize {
    (k as f64 * rate / target_rate).floor() as usize
}

/// Running mean of `window_len` samples, evaluated once per output sample at
/// `target_rate`.
///
/// Output sample `k` is the mean of input samples
/// `[s_k, s_k + window_len)` with `s_k = floor(k * rate / target_rate)`;
/// windows overlap whenever `rate / target_rate < window_len`. Only windows
/// that fit entirely inside the input are emitted.
pub fn running_avg_downsample(
    trace: &EmgTrace,
    window_len: usize,
    target_rate: f64,
) -> Result<EmgTrace, SignalError> {
    if window_len == 0 {
        return Err(SignalError::InvalidWindow("window length must be at least 1".into()));
    }
    if !(target_rate.is_finite() && target_rate > 0.0) {
        return Err(SignalError::InvalidRate(target_rate));
    }
    if target_rate > trace.rate {
        return Err(SignalError::RateIncrease {
            rate_hz: trace.rate,
            target_hz: target_rate,
        });
    }
    if trace.len() < window_len {
        return Err(SignalError::TraceTooShort {
            len: trace.len(),
            needed: window_len,
        });
    }

    let last_start = trace.len() - window_len;
    let w = window_len as f64;
    let mut out = Vec::with_capacity((last_start as f64 * target_rate / trace.rate) as usize + 1);
    let mut transient = 0;
    let mut k = 0;
    loop {
        let start = window_start(k, trace.rate, target_rate);
        if start > last_start {
            break;
        }
        if start < trace.transient {
            transient += 1;
        }
        let sum: f64 = trace.samples[start..start + window_len].iter().sum();
        out.push(sum / w);
        k += 1;
    }

    Ok(EmgTrace {
        samples: out,
        rate: target_rate,
        muscle: trace.muscle.clone(),
        t0: trace.t0,
        transient,
    })
}

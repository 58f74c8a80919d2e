use serde::{Deserialize, Serialize};

use super::{EmgTrace, SignalError};

// Slack for boundaries that land on the sample grid up to rounding.
const GRID_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WindowSpec {
    /// Contiguous windows of this many seconds from the start of the trace;
    /// a trailing partial window is dropped.
    FixedDuration(f64),
    /// Half-open `[start_s, end_s)` intervals in trace time, ascending and
    /// non-overlapping.
    TrialIntervals(Vec<(f64, f64)>),
}

/// A contiguous index range `[start, end)` of a parent trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment<'a> {
    pub trace: &'a EmgTrace,
    pub start: usize,
    pub end: usize,
}

impl<'a> Segment<'a> {
    pub fn samples(&self) -> &'a [f64] {
        &self.trace.samples[self.start..self.end]
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    /// Duration `(end - start) / rate` in seconds.
    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.trace.rate
    }
}

/// First sample index whose timestamp is at or after `t`.
fn index_at_or_after(trace: &EmgTrace, t: f64) -> usize {
    let x = (t - trace.t0) * trace.rate;
    (x - GRID_EPS).ceil().max(0.0) as usize
}

pub fn segment<'a>(trace: &'a EmgTrace, spec: &WindowSpec) -> Result<Vec<Segment<'a>>, SignalError> {
    match spec {
        WindowSpec::FixedDuration(d) => fixed(trace, *d),
        WindowSpec::TrialIntervals(intervals) => by_intervals(trace, intervals),
    }
}

fn fixed(trace: &EmgTrace, seconds: f64) -> Result<Vec<Segment<'_>>, SignalError> {
    if !(seconds.is_finite() && seconds > 0.0) {
        return Err(SignalError::InvalidWindow(format!("duration must be positive, got {seconds}")));
    }
    let per = seconds * trace.rate;
    if per < 1.0 - GRID_EPS {
        return Err(SignalError::InvalidWindow(format!(
            "{seconds} s is shorter than one sample at {} Hz",
            trace.rate
        )));
    }
    let count = (trace.duration() / seconds + GRID_EPS).floor() as usize;
    let bound = |k: usize| ((k as f64 * per).round() as usize).min(trace.len());
    Ok((0..count)
        .map(|k| Segment {
            trace,
            start: bound(k),
            end: bound(k + 1),
        })
        .collect())
}

fn by_intervals<'a>(trace: &'a EmgTrace, intervals: &[(f64, f64)]) -> Result<Vec<Segment<'a>>, SignalError> {
    let t_end = trace.t0 + trace.duration();
    let tol = GRID_EPS / trace.rate;
    let mut out = Vec::with_capacity(intervals.len());
    let mut prev_end = f64::NEG_INFINITY;
    for (index, &(start_s, end_s)) in intervals.iter().enumerate() {
        let in_range = start_s.is_finite()
            && end_s.is_finite()
            && start_s >= trace.t0 - tol
            && end_s <= t_end + tol
            && end_s > start_s;
        if !in_range {
            return Err(SignalError::IntervalOutOfRange {
                index,
                start_s,
                end_s,
                t0: trace.t0,
                t_end,
            });
        }
        if start_s < prev_end - tol {
            return Err(SignalError::OverlappingIntervals { index });
        }
        prev_end = end_s;
        let start = index_at_or_after(trace, start_s).min(trace.len());
        let end = index_at_or_after(trace, end_s).min(trace.len());
        if end <= start {
            return Err(SignalError::EmptyInterval { index });
        }
        out.push(Segment { trace, start, end });
    }
    Ok(out)
}

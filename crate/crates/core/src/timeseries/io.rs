//! Single-channel EMG files: header `t_seconds,volts`, one row per sample.

use std::path::Path;

use super::{EmgTrace, Muscle};
use crate::table::{write_atomic, CsvTable, IngestError};

pub const EMG_HEADER: [&str; 2] = ["t_seconds", "volts"];

/// Allowed relative deviation of any sample interval from the first one.
pub const UNIFORMITY_TOLERANCE: f64 = 1e-6;

/// Reads a channel, inferring the rate from the first two timestamps.
///
/// A rate within one ppm of an integer is snapped to it so decimal
/// timestamps of common rates reproduce the nominal value exactly.
pub fn read_emg_csv(path: &Path, muscle: Muscle) -> Result<EmgTrace, IngestError> {
    let table = CsvTable::read(path)?;
    table.expect_header(&EMG_HEADER, &[])?;
    if table.rows.len() < 2 {
        return Err(IngestError::malformed(path, table.rows.len() + 1, "need at least two samples to infer the rate"));
    }
    let mut times = Vec::with_capacity(table.rows.len());
    let mut samples = Vec::with_capacity(table.rows.len());
    for i in 0..table.rows.len() {
        times.push(table.f64_at(i, 0)?);
        samples.push(table.f64_at(i, 1)?);
    }

    let first = times[1] - times[0];
    if first <= 0.0 {
        return Err(IngestError::malformed(path, 3, "timestamps must be strictly increasing"));
    }
    let mut rate = 1.0 / first;
    if (rate - rate.round()).abs() <= UNIFORMITY_TOLERANCE * rate {
        rate = rate.round();
    }
    let expected = 1.0 / rate;
    for i in 1..times.len() {
        let interval = times[i] - times[i - 1];
        if interval <= 0.0 {
            return Err(IngestError::malformed(path, i + 2, "timestamps must be strictly increasing"));
        }
        if (interval - expected).abs() > UNIFORMITY_TOLERANCE * expected {
            return Err(IngestError::NonuniformSampling {
                path: path.to_path_buf(),
                row: i + 2,
                interval_s: interval,
                expected_s: expected,
            });
        }
    }

    EmgTrace::new(samples, rate, muscle, times[0]).map_err(|e| IngestError::malformed(path, 2, e.to_string()))
}

/// Writes samples at full round-trip precision.
pub fn write_emg_csv(path: &Path, trace: &EmgTrace) -> Result<(), IngestError> {
    let mut out = String::with_capacity(trace.len() * 28 + 20);
    out.push_str("t_seconds,volts\n");
    for (i, v) in trace.samples.iter().enumerate() {
        out.push_str(&format!("{},{}\n", trace.time_at(i), v));
    }
    write_atomic(path, &out)
}

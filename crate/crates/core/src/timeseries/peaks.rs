use super::{Segment, SignalError};

#[derive(Debug, Clone, PartialEq)]
pub struct PeakSet {
    /// Offsets of each peak within the segment.
    pub indices: Vec<usize>,
    pub amplitudes: Vec<f64>,
    /// Largest sample anywhere in the segment, boundaries included.
    pub max_amplitude: f64,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Strict local maxima of at least `min_height`.
///
/// A flat run counts as one peak, reported at its first sample, when both
/// neighbouring samples are lower. The first and last samples are never
/// peaks since they lack a neighbour.
pub fn detect_peaks(seg: &Segment<'_>, min_height: f64) -> Result<PeakSet, SignalError> {
    let x = seg.samples();
    if x.is_empty() {
        return Err(SignalError::EmptySegment);
    }
    let max_amplitude = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut indices = Vec::new();
    let mut amplitudes = Vec::new();
    let mut i = 1;
    while i + 1 < x.len() {
        if x[i] > x[i - 1] {
            let mut j = i;
            while j + 1 < x.len() && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < x.len() && x[j + 1] < x[i] && x[i] >= min_height {
                indices.push(i);
                amplitudes.push(x[i]);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }

    Ok(PeakSet {
        indices,
        amplitudes,
        max_amplitude,
    })
}

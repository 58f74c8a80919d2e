use super::MetricsError;

/// Half-open UMP classes `[edges[k], edges[k+1])` plus open-ended classes
/// below the first and at or above the last edge.
#[derive(Debug, Clone, PartialEq)]
pub struct UmpHistogram {
    pub edges: Vec<f64>,
    pub underflow: usize,
    pub counts: Vec<usize>,
    pub overflow: usize,
}

impl UmpHistogram {
    pub fn total(&self) -> usize {
        self.underflow + self.overflow + self.counts.iter().sum::<usize>()
    }

    fn share(&self, n: usize) -> f64 {
        match self.total() {
            0 => 0.0,
            t => n as f64 / t as f64,
        }
    }

    pub fn proportions(&self) -> Vec<f64> {
        self.counts.iter().map(|&n| self.share(n)).collect()
    }

    pub fn underflow_proportion(&self) -> f64 {
        self.share(self.underflow)
    }

    pub fn overflow_proportion(&self) -> f64 {
        self.share(self.overflow)
    }

    /// `(lower, upper, count)` for every class in ascending order, with
    /// infinite bounds on the open-ended classes.
    pub fn classes(&self) -> Vec<(f64, f64, usize)> {
        let mut out = Vec::with_capacity(self.counts.len() + 2);
        out.push((f64::NEG_INFINITY, self.edges[0], self.underflow));
        for (k, &n) in self.counts.iter().enumerate() {
            out.push((self.edges[k], self.edges[k + 1], n));
        }
        out.push((*self.edges.last().expect("edges"), f64::INFINITY, self.overflow));
        out
    }
}

/// 0.5-wide classes from 0 to 15.
pub fn default_class_edges() -> Vec<f64> {
    (0..=30).map(|k| k as f64 * 0.5).collect()
}

pub fn ump_histogram(values: &[f64], class_edges: &[f64]) -> Result<UmpHistogram, MetricsError> {
    if class_edges.len() < 2 {
        return Err(MetricsError::TooFewEdges);
    }
    if class_edges.iter().any(|e| !e.is_finite()) || class_edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MetricsError::UnsortedEdges);
    }
    let mut hist = UmpHistogram {
        edges: class_edges.to_vec(),
        underflow: 0,
        counts: vec![0; class_edges.len() - 1],
        overflow: 0,
    };
    for &v in values {
        if v.is_nan() {
            return Err(MetricsError::NonFinite(v));
        }
        match class_edges.partition_point(|&e| e <= v) {
            0 => hist.underflow += 1,
            k if k == class_edges.len() => hist.overflow += 1,
            k => hist.counts[k - 1] += 1,
        }
    }
    Ok(hist)
}

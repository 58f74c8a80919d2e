//! Paired t-tests with Bonferroni adjustment, significance bands and
//! Pearson correlation strength bands.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use thiserror::Error;

pub const SIGNIFICANT_BELOW: f64 = 0.05;
pub const NEAR_BELOW: f64 = 0.10;
pub const WEAK_BELOW: f64 = 0.30;
pub const MODERATE_BELOW: f64 = 0.65;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("samples differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} pairs, got {got}")]
    TooFewPairs { needed: usize, got: usize },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("paired differences have zero variance but nonzero mean")]
    ZeroVarianceDifferences,
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("p-value {0} outside [0, 1]")]
    InvalidP(f64),
    #[error("family size must be at least 1")]
    InvalidFamilySize,
    #[error("non-finite input value")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Significance {
    Significant,
    Near,
    NotSignificant,
}

impl Significance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Significance::Significant => "SIGNIFICANT",
            Significance::Near => "NEAR",
            Significance::NotSignificant => "NOT_SIGNIFICANT",
        }
    }
}

impl fmt::Display for Significance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Significance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "SIGNIFICANT" => Ok(Significance::Significant),
            "NEAR" => Ok(Significance::Near),
            "NOT_SIGNIFICANT" => Ok(Significance::NotSignificant),
            other => Err(format!("unknown significance class `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub t_stat: f64,
    pub df: usize,
    pub p_value: f64,
    pub p_adjusted: f64,
    pub significance: Significance,
}

impl TestResult {
    /// Re-derives the adjusted p-value and class for a family of `m` tests.
    pub fn with_family(mut self, m: usize) -> Result<Self, StatsError> {
        self.p_adjusted = bonferroni_adjust(&[self.p_value], m)?[0];
        self.significance = classify_p(self.p_adjusted);
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Band {
    Weak,
    Moderate,
    Strong,
}

impl Band {
    pub fn as_str(&self) -> &'static str {
        match self {
            Band::Weak => "WEAK",
            Band::Moderate => "MODERATE",
            Band::Strong => "STRONG",
        }
    }

    pub fn of(r: f64) -> Band {
        let a = r.abs();
        if a < WEAK_BELOW {
            Band::Weak
        } else if a < MODERATE_BELOW {
            Band::Moderate
        } else {
            Band::Strong
        }
    }
}

impl FromStr for Band {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "WEAK" => Ok(Band::Weak),
            "MODERATE" => Ok(Band::Moderate),
            "STRONG" => Ok(Band::Strong),
            other => Err(format!("unknown correlation band `{other}`")),
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationResult {
    pub r: f64,
    pub band: Band,
    pub sign: Sign,
}

impl CorrelationResult {
    fn from_r(r: f64) -> Self {
        let sign = if r > 0.0 {
            Sign::Positive
        } else if r < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        };
        Self { r, band: Band::of(r), sign }
    }
}

/// Two-tailed tail probability `P(|T| >= |t|)` of Student's t with `df`
/// degrees of freedom, via the regularized incomplete beta function.
pub fn t_two_tailed_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// Two-tailed paired t-test on `a - b`, unadjusted (family of one).
///
/// Identical samples give `t = 0, p = 1`; constant nonzero differences have
/// no defined statistic and are rejected.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(StatsError::TooFewPairs { needed: 2, got: n });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let df = n - 1;

    let (t_stat, p_value) = if d.iter().all(|&v| v == 0.0) {
        (0.0, 1.0)
    } else if var <= (f64::EPSILON * mean).powi(2) {
        return Err(StatsError::ZeroVarianceDifferences);
    } else {
        let t = mean / (var / nf).sqrt();
        (t, t_two_tailed_p(t, df as f64))
    };
    Ok(TestResult {
        t_stat,
        df,
        p_value,
        p_adjusted: p_value,
        significance: classify_p(p_value),
    })
}

/// `min(1, m * p)` for every p.
pub fn bonferroni_adjust(p_values: &[f64], m: usize) -> Result<Vec<f64>, StatsError> {
    if m == 0 {
        return Err(StatsError::InvalidFamilySize);
    }
    p_values
        .iter()
        .map(|&p| {
            if (0.0..=1.0).contains(&p) {
                Ok((p * m as f64).min(1.0))
            } else {
                Err(StatsError::InvalidP(p))
            }
        })
        .collect()
}

/// Significant below 0.05, near-significant in `[0.05, 0.10)`.
pub fn classify_p(p_adjusted: f64) -> Significance {
    if p_adjusted < SIGNIFICANT_BELOW {
        Significance::Significant
    } else if p_adjusted < NEAR_BELOW {
        Significance::Near
    } else {
        Significance::NotSignificant
    }
}

pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<CorrelationResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooFewPoints { needed: 3, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let tiny = |s: f64, m: f64| s <= (f64::EPSILON * m).powi(2) * n;
    if sxx == 0.0 || syy == 0.0 || tiny(sxx, mx) || tiny(syy, my) {
        return Err(StatsError::ZeroVariance);
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    Ok(CorrelationResult::from_r(r))
}

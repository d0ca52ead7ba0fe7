//! Reported quantile summaries and the positivity-shift protocols.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Which quantiles a study reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Minimum, median, maximum.
    S1,
    /// First quartile, median, third quartile.
    S2,
    /// All five.
    S3,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::S1, Scenario::S2, Scenario::S3];

    /// Smallest sample size for which the summary is meaningful.
    pub fn min_n(self) -> u64 {
        match self {
            Scenario::S3 => 5,
            _ => 3,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::S1 => "s1",
            Scenario::S2 => "s2",
            Scenario::S3 => "s3",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" => Ok(Scenario::S1),
            "s2" => Ok(Scenario::S2),
            "s3" => Ok(Scenario::S3),
            other => Err(Error::Domain(format!("unknown scenario {other:?}"))),
        }
    }
}

/// A study's reported quantiles.
///
/// Fields that the scenario does not use may be present; they are ignored by
/// every estimator. Use [`QuantileSummary::validate`] before estimating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileSummary {
    pub scenario: Scenario,
    pub q_min: Option<f64>,
    pub q1: Option<f64>,
    pub q2: f64,
    pub q3: Option<f64>,
    pub q_max: Option<f64>,
    pub n: u64,
}

impl QuantileSummary {
    pub fn s1(q_min: f64, q2: f64, q_max: f64, n: u64) -> Self {
        QuantileSummary {
            scenario: Scenario::S1,
            q_min: Some(q_min),
            q1: None,
            q2,
            q3: None,
            q_max: Some(q_max),
            n,
        }
    }

    pub fn s2(q1: f64, q2: f64, q3: f64, n: u64) -> Self {
        QuantileSummary {
            scenario: Scenario::S2,
            q_min: None,
            q1: Some(q1),
            q2,
            q3: Some(q3),
            q_max: None,
            n,
        }
    }

    pub fn s3(q_min: f64, q1: f64, q2: f64, q3: f64, q_max: f64, n: u64) -> Self {
        QuantileSummary {
            scenario: Scenario::S3,
            q_min: Some(q_min),
            q1: Some(q1),
            q2,
            q3: Some(q3),
            q_max: Some(q_max),
            n,
        }
    }

    /// Restrict a five-number summary (or any summary carrying the needed
    /// fields) to `scenario`, dropping fields the scenario does not report.
    pub fn restrict(&self, scenario: Scenario) -> Self {
        let keep_ext = scenario != Scenario::S2;
        let keep_quart = scenario != Scenario::S1;
        QuantileSummary {
            scenario,
            q_min: self.q_min.filter(|_| keep_ext),
            q1: self.q1.filter(|_| keep_quart),
            q2: self.q2,
            q3: self.q3.filter(|_| keep_quart),
            q_max: self.q_max.filter(|_| keep_ext),
            n: self.n,
        }
    }

    /// Reported values in ascending probability order, as used by the scenario.
    pub fn values(&self) -> Vec<f64> {
        self.labelled().into_iter().map(|(_, v)| v).collect()
    }

    /// Scenario fields as (name, value) pairs. Missing fields are skipped.
    pub fn labelled(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::with_capacity(5);
        let mut push = |name, v: Option<f64>| {
            if let Some(v) = v {
                out.push((name, v));
            }
        };
        match self.scenario {
            Scenario::S1 => {
                push("q_min", self.q_min);
                push("q2", Some(self.q2));
                push("q_max", self.q_max);
            }
            Scenario::S2 => {
                push("q1", self.q1);
                push("q2", Some(self.q2));
                push("q3", self.q3);
            }
            Scenario::S3 => {
                push("q_min", self.q_min);
                push("q1", self.q1);
                push("q2", Some(self.q2));
                push("q3", self.q3);
                push("q_max", self.q_max);
            }
        }
        out
    }

    /// The lowest quantile the scenario reports (`q_min` in S1/S3, `q1` in S2).
    pub fn lowest(&self) -> f64 {
        match self.scenario {
            Scenario::S2 => self.q1.unwrap_or(self.q2),
            _ => self.q_min.unwrap_or(self.q2),
        }
    }

    pub fn validate(&self) -> std::result::Result<(), Vec<Violation>> {
        let violations = validate(self);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(violations)
        }
    }

    /// [`validate`](Self::validate) mapped into the crate error type.
    pub fn check(&self) -> Result<()> {
        self.validate().map_err(Error::Validation)
    }

    fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        QuantileSummary {
            scenario: self.scenario,
            q_min: self.q_min.map(&f),
            q1: self.q1.map(&f),
            q2: f(self.q2),
            q3: self.q3.map(&f),
            q_max: self.q_max.map(&f),
            n: self.n,
        }
    }

    /// Add `c` to every present quantile.
    pub fn offset(&self, c: f64) -> Self {
        self.map_values(|v| v + c)
    }

    /// Multiply every present quantile by `k`.
    pub fn scale(&self, k: f64) -> Self {
        self.map_values(|v| v * k)
    }

    /// Apply `f` to every present quantile.
    pub fn transform(&self, f: impl Fn(f64) -> f64) -> Self {
        self.map_values(f)
    }
}

/// One broken invariant of a [`QuantileSummary`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    /// A field required by the scenario is absent.
    Missing(&'static str),
    /// A present value is NaN or infinite.
    NotFinite(&'static str),
    /// Two adjacent quantiles are out of order.
    Ordering {
        lower: &'static str,
        upper: &'static str,
    },
    /// The sample size is below the scenario minimum.
    SampleSize { n: u64, min: u64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Missing(name) => write!(f, "{name} is required by the scenario"),
            Violation::NotFinite(name) => write!(f, "{name} is not finite"),
            Violation::Ordering { lower, upper } => write!(f, "{lower} exceeds {upper}"),
            Violation::SampleSize { n, min } => write!(f, "n = {n} is below {min}"),
        }
    }
}

/// Every invariant `summary` violates; empty when valid.
pub fn validate(summary: &QuantileSummary) -> Vec<Violation> {
    let mut out = Vec::new();
    let s = summary;
    let required: &[(&'static str, Option<f64>)] = match s.scenario {
        Scenario::S1 => &[("q_min", s.q_min), ("q_max", s.q_max)],
        Scenario::S2 => &[("q1", s.q1), ("q3", s.q3)],
        Scenario::S3 => &[
            ("q_min", s.q_min),
            ("q1", s.q1),
            ("q3", s.q3),
            ("q_max", s.q_max),
        ],
    };
    for (name, v) in required {
        if v.is_none() {
            out.push(Violation::Missing(name));
        }
    }
    let present = s.labelled();
    for (name, v) in &present {
        if !v.is_finite() {
            out.push(Violation::NotFinite(name));
        }
    }
    for pair in present.windows(2) {
        let ((lo_name, lo), (hi_name, hi)) = (pair[0], pair[1]);
        if lo > hi {
            out.push(Violation::Ordering {
                lower: lo_name,
                upper: hi_name,
            });
        }
    }
    let min = s.scenario.min_n();
    if s.n < min {
        out.push(Violation::SampleSize { n: s.n, min });
    }
    out
}

/// Record of the additive shift applied before estimation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ShiftRecord {
    pub applied: bool,
    pub c: f64,
}

impl ShiftRecord {
    pub const NONE: ShiftRecord = ShiftRecord {
        applied: false,
        c: 0.0,
    };

    /// Undo the shift on an estimated mean. Standard deviations are shift-free.
    pub fn unshift_mean(&self, mean: f64) -> f64 {
        mean - self.c
    }
}

/// Add `c` to every quantile when the lowest reported quantile is not
/// positive; otherwise return the summary unchanged.
pub fn shift_positive(summary: &QuantileSummary, c: f64) -> (QuantileSummary, ShiftRecord) {
    if summary.lowest() <= 0.0 {
        (summary.offset(c), ShiftRecord { applied: true, c })
    } else {
        (*summary, ShiftRecord::NONE)
    }
}

/// Shift so that the lowest reported quantile equals 0.5. Summaries whose
/// lowest quantile is already at least 0.5 are returned unchanged.
pub fn shift_to_half(summary: &QuantileSummary) -> (QuantileSummary, ShiftRecord) {
    let low = summary.lowest();
    if low < 0.5 {
        let c = 0.5 - low;
        let mut shifted = summary.offset(c);
        // Pin the lowest value exactly; `low + (0.5 - low)` can round.
        match shifted.scenario {
            Scenario::S2 => shifted.q1 = Some(0.5),
            _ => shifted.q_min = Some(0.5),
        }
        (shifted, ShiftRecord { applied: true, c })
    } else {
        (*summary, ShiftRecord::NONE)
    }
}

/// How an estimator preprocesses a summary before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "c", rename_all = "snake_case")]
pub enum ShiftPolicy {
    /// Use the summary as given.
    None,
    /// [`shift_positive`] with this constant.
    WhenNonPositive(f64),
    /// Add the constant to every summary unconditionally.
    Always(f64),
    /// [`shift_to_half`].
    ToHalf,
}

impl Default for ShiftPolicy {
    fn default() -> Self {
        ShiftPolicy::WhenNonPositive(0.5)
    }
}

impl ShiftPolicy {
    pub fn apply(&self, summary: &QuantileSummary) -> (QuantileSummary, ShiftRecord) {
        match *self {
            ShiftPolicy::None => (*summary, ShiftRecord::NONE),
            ShiftPolicy::WhenNonPositive(c) => shift_positive(summary, c),
            ShiftPolicy::Always(c) => (summary.offset(c), ShiftRecord { applied: true, c }),
            ShiftPolicy::ToHalf => shift_to_half(summary),
        }
    }
}

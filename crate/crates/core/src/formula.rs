//! Closed-form estimators derived under normality: the weighted sample-mean
//! estimators of Luo et al. and the order-statistic standard-deviation
//! estimators of Wan et al.

use crate::dists::normal_quantile;
use crate::error::Result;
use crate::summaries::{QuantileSummary, Scenario};

/// Weights applied to (mid-range, mid-quartile-range, median).
///
/// Always sums to one.
pub fn luo_weights(scenario: Scenario, n: u64) -> [f64; 3] {
    let n = n as f64;
    match scenario {
        Scenario::S1 => {
            let w = 4.0 / (4.0 + n.powf(0.75));
            [w, 0.0, 1.0 - w]
        }
        Scenario::S2 => {
            let w = 0.7 + 0.39 / n;
            [0.0, w, 0.3 - 0.39 / n]
        }
        Scenario::S3 => {
            let w1 = 2.2 / (2.2 + n.powf(0.75));
            let w2 = 0.7 - 0.72 / n.powf(0.55);
            [w1, w2, 0.3 + 0.72 / n.powf(0.55) - w1]
        }
    }
}

/// Estimated sample mean.
///
/// ```
/// use qmest::{formula::luo_mean, QuantileSummary};
/// let m = luo_mean(&QuantileSummary::s2(2.0, 5.0, 10.0, 100)).unwrap();
/// assert!((m - 5.7039).abs() < 1e-12);
/// ```
pub fn luo_mean(summary: &QuantileSummary) -> Result<f64> {
    summary.check()?;
    let [w_range, w_iqr, w_med] = luo_weights(summary.scenario, summary.n);
    let mid = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) => (a + b) / 2.0,
        _ => 0.0,
    };
    Ok(w_range * mid(summary.q_min, summary.q_max)
        + w_iqr * mid(summary.q1, summary.q3)
        + w_med * summary.q2)
}

/// Denominator of the range-based term: `Φ⁻¹((n − 0.375)/(n + 0.25))`.
pub fn range_divisor(n: u64) -> f64 {
    let n = n as f64;
    normal_quantile((n - 0.375) / (n + 0.25)).expect("probability inside (0, 1) for n >= 1")
}

/// Denominator of the quartile-based term: `Φ⁻¹((0.75n − 0.125)/(n + 0.25))`.
pub fn iqr_divisor(n: u64) -> f64 {
    let n = n as f64;
    normal_quantile((0.75 * n - 0.125) / (n + 0.25)).expect("probability inside (0, 1) for n >= 1")
}

/// Estimated sample standard deviation.
pub fn wan_sd(summary: &QuantileSummary) -> Result<f64> {
    summary.check()?;
    let n = summary.n;
    let range = || summary.q_max.unwrap() - summary.q_min.unwrap();
    let iqr = || summary.q3.unwrap() - summary.q1.unwrap();
    Ok(match summary.scenario {
        Scenario::S1 => range() / (2.0 * range_divisor(n)),
        Scenario::S2 => iqr() / (2.0 * iqr_divisor(n)),
        Scenario::S3 => range() / (4.0 * range_divisor(n)) + iqr() / (4.0 * iqr_divisor(n)),
    })
}

/// Both closed-form estimates at once.
pub fn luo_wan(summary: &QuantileSummary) -> Result<(f64, f64)> {
    Ok((luo_mean(summary)?, wan_sd(summary)?))
}

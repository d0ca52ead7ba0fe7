//! Box-Cox estimation. The power transform is chosen to make the reported
//! quantiles symmetric. The closed-form normal estimators then run on the
//! transformed scale, and the implied truncated normal is mapped back.

use crate::dists::normal_cdf;
use crate::error::{Error, Result};
use crate::formula;
use crate::optim::brent_minimize;
use crate::quad::integrate;
use crate::summaries::{QuantileSummary, Scenario, ShiftPolicy, ShiftRecord};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Search interval for the power parameter.
pub const LAMBDA_RANGE: (f64, f64) = (-5.0, 5.0);
pub const LAMBDA_TOL: f64 = 1e-8;
pub const DEFAULT_MC_DRAWS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcResult {
    pub mean: f64,
    pub sd: f64,
    pub lambda: f64,
    /// Mean of the transformed data (closed-form estimate).
    pub mu: f64,
    /// SD of the transformed data (closed-form estimate).
    pub sigma: f64,
    pub mc_draws: usize,
    /// Share of draws that fell outside the truncation support.
    pub truncated_fraction: f64,
    pub warning: Option<String>,
    pub shift: ShiftRecord,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcOptions {
    pub mc_draws: usize,
    pub seed: u64,
    pub shift: ShiftPolicy,
}

impl Default for BcOptions {
    fn default() -> Self {
        BcOptions {
            mc_draws: DEFAULT_MC_DRAWS,
            seed: crate::DEFAULT_SEED,
            shift: ShiftPolicy::default(),
        }
    }
}

/// Box-Cox transform of `x > 0`.
///
/// ```
/// use qmest::bc::{box_cox, inv_box_cox};
/// assert_eq!(box_cox(4.0, 0.5).unwrap(), 2.0);
/// assert_eq!(inv_box_cox(2.0, 0.5).unwrap(), 4.0);
/// ```
pub fn box_cox(x: f64, lambda: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("Box-Cox needs x > 0, got {x}")));
    }
    Ok(box_cox_unchecked(x, lambda))
}

fn box_cox_unchecked(x: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        x.ln()
    } else {
        (lambda * x.ln()).exp_m1() / lambda
    }
}

/// Inverse Box-Cox transform.
pub fn inv_box_cox(y: f64, lambda: f64) -> Result<f64> {
    if lambda != 0.0 && !(lambda * y + 1.0 > 0.0) {
        return Err(Error::Domain(format!(
            "inverse Box-Cox needs λy + 1 > 0 (λ = {lambda}, y = {y})"
        )));
    }
    Ok(inv_box_cox_unchecked(y, lambda))
}

fn inv_box_cox_unchecked(y: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        y.exp()
    } else {
        ((lambda * y).ln_1p() / lambda).exp()
    }
}

fn ratio_term(lo: f64, mid: f64, hi: f64, lambda: f64) -> f64 {
    let (a, m, b) = (
        box_cox_unchecked(lo, lambda),
        box_cox_unchecked(mid, lambda),
        box_cox_unchecked(hi, lambda),
    );
    ((b - m) / (m - a) - 1.0).powi(2)
}

/// The symmetry objective minimized by [`find_lambda`].
pub fn symmetry_objective(summary: &QuantileSummary, lambda: f64) -> f64 {
    let s = summary;
    let ext = || ratio_term(s.q_min.unwrap(), s.q2, s.q_max.unwrap(), lambda);
    let quart = || ratio_term(s.q1.unwrap(), s.q2, s.q3.unwrap(), lambda);
    match s.scenario {
        Scenario::S1 => ext(),
        Scenario::S2 => quart(),
        Scenario::S3 => quart() + ext(),
    }
}

/// Power parameter making the transformed quantiles as symmetric about the
/// median as possible; negative minimizers are clamped to zero.
pub fn find_lambda(summary: &QuantileSummary) -> Result<f64> {
    summary.check()?;
    let vals = summary.values();
    if vals.iter().any(|&v| v <= 0.0) {
        return Err(Error::Domain(
            "Box-Cox needs strictly positive quantiles".into(),
        ));
    }
    let strict = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) => a < summary.q2 && summary.q2 < b,
        _ => true,
    };
    let ok = match summary.scenario {
        Scenario::S1 => strict(summary.q_min, summary.q_max),
        Scenario::S2 => strict(summary.q1, summary.q3),
        Scenario::S3 => strict(summary.q_min, summary.q_max) && strict(summary.q1, summary.q3),
    };
    if !ok {
        return Err(Error::Degenerate(
            "Box-Cox needs the quantiles strictly ordered around the median".into(),
        ));
    }
    let (lambda, _) = brent_minimize(
        |l| symmetry_objective(summary, l),
        LAMBDA_RANGE.0,
        LAMBDA_RANGE.1,
        LAMBDA_TOL,
    );
    Ok(lambda.max(0.0))
}

/// Estimate with the default options.
pub fn bc_estimate(summary: &QuantileSummary) -> Result<BcResult> {
    bc_estimate_with(summary, &BcOptions::default())
}

pub fn bc_estimate_with(summary: &QuantileSummary, opts: &BcOptions) -> Result<BcResult> {
    summary.check()?;
    let (shifted, shift) = opts.shift.apply(summary);
    let lambda = find_lambda(&shifted)?;
    let transformed = shifted.transform(|x| box_cox_unchecked(x, lambda));
    let (mu, sigma) = formula::luo_wan(&transformed)?;

    let (mean, sd, truncated_fraction, draws) = if lambda == 0.0 {
        let (m, s) = log_normal_moments(mu, sigma);
        (m, s, 0.0, 0)
    } else {
        let (m, s, frac) = truncated_moments_mc(lambda, mu, sigma, opts.mc_draws, opts.seed)?;
        (m, s, frac, opts.mc_draws)
    };
    let warning = (truncated_fraction > 0.5).then(|| {
        format!(
            "{:.1}% of draws fell outside the truncation support",
            100.0 * truncated_fraction
        )
    });
    Ok(BcResult {
        mean: shift.unshift_mean(mean),
        sd,
        lambda,
        mu,
        sigma,
        mc_draws: draws,
        truncated_fraction,
        warning,
        shift,
    })
}

/// Mean and SD of a log-normal with log-scale parameters `mu`, `sigma`.
pub fn log_normal_moments(mu: f64, sigma: f64) -> (f64, f64) {
    let s2 = sigma * sigma;
    let m = (mu + 0.5 * s2).exp();
    (m, m * s2.exp_m1().sqrt())
}

/// Monte Carlo mean and SD of the inverse-transformed normal truncated to
/// `[−1/λ, 2μ + 1/λ]`. Also returns the share of draws discarded.
pub fn truncated_moments_mc(
    lambda: f64,
    mu: f64,
    sigma: f64,
    draws: usize,
    seed: u64,
) -> Result<(f64, f64, f64)> {
    if !(lambda > 0.0) {
        return Err(Error::Domain("truncated moments need λ > 0".into()));
    }
    let normal = Normal::new(mu, sigma).map_err(|e| Error::Domain(e.to_string()))?;
    let lo = -1.0 / lambda;
    let hi = 2.0 * mu + 1.0 / lambda;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept = Vec::with_capacity(draws);
    for _ in 0..draws {
        let r = normal.sample(&mut rng);
        if (lo..=hi).contains(&r) {
            kept.push(inv_box_cox_unchecked(r, lambda));
        }
    }
    if kept.len() < 2 {
        return Err(Error::EstimationFailed(
            "every Monte Carlo draw fell outside the truncation support".into(),
        ));
    }
    let (m, s) = mean_sd(&kept);
    Ok((m, s, 1.0 - kept.len() as f64 / draws as f64))
}

pub(crate) fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Mean and SD of the inverse-transformed truncated normal by adaptive
/// quadrature over the truncation support, normalized by the truncated mass.
pub fn truncated_moments_integral(lambda: f64, mu: f64, sigma: f64) -> Result<(f64, f64)> {
    if !(lambda > 0.0) || !(sigma > 0.0) {
        return Err(Error::Domain(
            "truncated moments need λ > 0 and σ > 0".into(),
        ));
    }
    // Support in standard units; the density is negligible beyond 40.
    let c = ((mu + 1.0 / lambda) / sigma).min(40.0);
    if !(c > 0.0) {
        return Err(Error::Domain("empty truncation support".into()));
    }
    let mass = 2.0 * normal_cdf(c) - 1.0;
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
    let g = |z: f64| {
        let y = mu + sigma * z;
        if lambda * y + 1.0 <= 0.0 {
            0.0
        } else {
            inv_box_cox_unchecked(y, lambda)
        }
    };
    let first = integrate(|z| phi(z) * g(z), -c, c, 0.0, 1e-11);
    let mean = first.value / mass;
    let second = integrate(|z| phi(z) * (g(z) - mean).powi(2), -c, c, 0.0, 1e-11);
    Ok((mean, (second.value / mass).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{luo_mean, wan_sd};

    #[test]
    fn transform_examples() {
        for l in [-1.0, 0.0, 0.5, 2.0] {
            assert_eq!(box_cox(1.0, l).unwrap(), 0.0);
            assert_eq!(inv_box_cox(0.0, l).unwrap(), 1.0);
        }
        assert_eq!(box_cox(std::f64::consts::E, 0.0).unwrap(), 1.0);
        assert!(box_cox(0.0, 1.0).is_err());
        assert!(box_cox(-2.0, 0.0).is_err());
        assert!(inv_box_cox(-3.0, 0.5).is_err());
    }

    #[test]
    fn round_trip_grid() {
        for x in [0.1, 1.0, 10.0, 100.0] {
            for l in [0.0, 0.33, 1.0, 2.0] {
                let back = inv_box_cox(box_cox(x, l).unwrap(), l).unwrap();
                assert!((back / x - 1.0).abs() < 1e-10, "x={x} λ={l}");
            }
        }
    }

    #[test]
    fn lambda_examples() {
        let l = find_lambda(&QuantileSummary::s2(2.0, 5.0, 8.0, 100)).unwrap();
        assert!((l - 1.0).abs() < 1e-6);

        let z = 0.6744897501960817;
        let s = QuantileSummary::s2((5.0_f64 - z).exp(), 5f64.exp(), (5.0_f64 + z).exp(), 100);
        assert_eq!(find_lambda(&s).unwrap(), 0.0);

        assert_eq!(
            find_lambda(&QuantileSummary::s2(1.0, 1.05, 10.0, 100)).unwrap(),
            0.0
        );
    }

    #[test]
    fn clamp_case_really_has_a_negative_argmin() {
        // Grid scan oracle over [-5, 5].
        let s = QuantileSummary::s2(1.0, 1.05, 10.0, 100);
        let best = (0..=10_000)
            .map(|i| -5.0 + i as f64 * 1e-3)
            .min_by(|a, b| symmetry_objective(&s, *a).total_cmp(&symmetry_objective(&s, *b)))
            .unwrap();
        assert!(best < 0.0);
    }

    #[test]
    fn lambda_needs_strict_positive_quantiles() {
        assert!(matches!(
            find_lambda(&QuantileSummary::s2(2.0, 2.0, 8.0, 100)),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            find_lambda(&QuantileSummary::s1(0.0, 2.0, 8.0, 100)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn symmetric_summary_reduces_to_closed_form() {
        let s = QuantileSummary::s2(2.0, 5.0, 8.0, 100);
        let r = bc_estimate(&s).unwrap();
        assert!((r.lambda - 1.0).abs() < 1e-6);
        let kept = r.mc_draws as f64 * (1.0 - r.truncated_fraction);
        let se = r.sd / kept.sqrt();
        assert!((r.mean - luo_mean(&s).unwrap()).abs() < 3.0 * se, "{r:?}");
        let (exact, _) = truncated_moments_integral(r.lambda, r.mu, r.sigma).unwrap();
        assert!((exact - luo_mean(&s).unwrap()).abs() < 1e-6);
        assert!(r.sd <= wan_sd(&s).unwrap());
        assert!(r.warning.is_none());
    }

    #[test]
    fn log_normal_branch() {
        let z = 0.6744897501960817;
        let s = QuantileSummary::s2((5.0_f64 - z).exp(), 5f64.exp(), (5.0_f64 + z).exp(), 10_000);
        let r = bc_estimate(&s).unwrap();
        assert_eq!(r.lambda, 0.0);
        let (m, sd) = log_normal_moments(r.mu, r.sigma);
        assert_eq!((r.mean, r.sd), (m, sd));
        assert!((r.mean / 5.5f64.exp() - 1.0).abs() < 0.02);
        assert!((r.sd / (5.5f64.exp() * (1f64.exp() - 1.0).sqrt()) - 1.0).abs() < 0.05);
    }

    #[test]
    fn quadrature_affine_case() {
        let (m, s) = truncated_moments_integral(1.0, 10.0, 1.0).unwrap();
        assert!((m - 11.0).abs() < 1e-9);
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn quadrature_matches_monte_carlo() {
        for (l, mu, sigma) in [(0.5, 4.0, 0.8), (2.0, 5.0, 0.5), (0.2, 1.0, 2.0)] {
            let (qm, qs) = truncated_moments_integral(l, mu, sigma).unwrap();
            let (mm, ms, _) = truncated_moments_mc(l, mu, sigma, 400_000, 17).unwrap();
            let se = ms / 400_000f64.sqrt();
            assert!((qm - mm).abs() < 3.0 * se, "λ={l}: {qm} vs {mm}");
            assert!((qs / ms - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let s = QuantileSummary::s1(1.0, 5.0, 30.0, 50);
        let opts = BcOptions {
            seed: 7,
            ..BcOptions::default()
        };
        assert_eq!(
            bc_estimate_with(&s, &opts).unwrap(),
            bc_estimate_with(&s, &opts).unwrap()
        );
    }
}

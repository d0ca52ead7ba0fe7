//! Random-effects meta-analysis of study means.
//!
//! Between-study variance is estimated by restricted maximum likelihood.
//! The pooled mean uses inverse-variance weights with a Wald interval, and
//! heterogeneity is reported as Cochran's Q and I².

use crate::dists::normal_quantile;
use crate::error::{Error, Result};
use crate::estimate::{estimate, EstimateOptions, EstimateResult, Method};
use crate::sim::{derive_seed, fnv1a};
use crate::summaries::{QuantileSummary, Scenario};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyEffect {
    pub study_id: String,
    pub mean: f64,
    pub sd: f64,
    pub n: u64,
}

impl StudyEffect {
    /// Within-study variance of the mean, `sd² / n`.
    pub fn variance(&self) -> f64 {
        self.sd * self.sd / self.n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaResult {
    pub k: usize,
    pub pooled_mean: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub tau2: f64,
    pub q_stat: f64,
    pub i2: f64,
}

const MAX_FISHER_STEPS: usize = 1000;

fn check_effects(effects: &[StudyEffect]) -> Result<()> {
    if effects.len() < 2 {
        return Err(Error::Contract(format!(
            "pooling needs at least 2 studies, got {}",
            effects.len()
        )));
    }
    for e in effects {
        let v = e.variance();
        if !(v > 0.0 && v.is_finite()) || !e.mean.is_finite() {
            return Err(Error::Domain(format!(
                "study {:?}: need a finite mean and sd > 0 (mean = {}, sd = {}, n = {})",
                e.study_id, e.mean, e.sd, e.n
            )));
        }
    }
    Ok(())
}

/// Canonical order so that every sum below is independent of input order.
fn canonical(effects: &[StudyEffect]) -> Vec<(f64, f64)> {
    let mut yv: Vec<(f64, f64)> = effects.iter().map(|e| (e.mean, e.variance())).collect();
    yv.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    yv
}

fn weighted_mean(yv: &[(f64, f64)], tau2: f64) -> (f64, f64) {
    let (mut sw, mut swy) = (0.0, 0.0);
    for &(y, v) in yv {
        let w = 1.0 / (v + tau2);
        sw += w;
        swy += w * y;
    }
    (swy / sw, sw)
}

/// DerSimonian–Laird moment estimate, floored at zero.
fn tau2_moments(yv: &[(f64, f64)]) -> f64 {
    let (mu, sw) = weighted_mean(yv, 0.0);
    let sw2: f64 = yv.iter().map(|&(_, v)| 1.0 / (v * v)).sum();
    let q: f64 = yv.iter().map(|&(y, v)| (y - mu).powi(2) / v).sum();
    let k = yv.len() as f64;
    ((q - (k - 1.0)) / (sw - sw2 / sw)).max(0.0)
}

fn reml_canonical(yv: &[(f64, f64)]) -> Result<f64> {
    let mut tau2 = tau2_moments(yv);
    for _ in 0..MAX_FISHER_STEPS {
        let (mu, sw) = weighted_mean(yv, tau2);
        let (mut sw2, mut sw3, mut sw2r2) = (0.0, 0.0, 0.0);
        for &(y, v) in yv {
            let w = 1.0 / (v + tau2);
            sw2 += w * w;
            sw3 += w * w * w;
            sw2r2 += w * w * (y - mu).powi(2);
        }
        let score = 0.5 * (sw2r2 - sw + sw2 / sw);
        let info = 0.5 * (sw2 - 2.0 * sw3 / sw + (sw2 / sw).powi(2));
        if !(info > 0.0) {
            return Err(Error::EstimationFailed(
                "REML information is not positive".into(),
            ));
        }
        let next = (tau2 + score / info).max(0.0);
        let delta = (next - tau2).abs();
        tau2 = next;
        if delta <= 1e-10 * tau2.max(1.0) {
            return Ok(tau2);
        }
    }
    Err(Error::EstimationFailed(format!(
        "REML did not converge in {MAX_FISHER_STEPS} Fisher scoring steps"
    )))
}

/// Restricted maximum likelihood estimate of the between-study variance.
pub fn reml_tau2(effects: &[StudyEffect]) -> Result<f64> {
    check_effects(effects)?;
    reml_canonical(&canonical(effects))
}

/// Random-effects pooled mean with a 95% Wald interval.
pub fn pool(effects: &[StudyEffect]) -> Result<MetaResult> {
    check_effects(effects)?;
    let yv = canonical(effects);
    let tau2 = reml_canonical(&yv)?;
    let (pooled_mean, sw) = weighted_mean(&yv, tau2);
    let se = sw.recip().sqrt();
    let z = normal_quantile(0.975)?;

    let (fixed_mean, sw_fixed) = weighted_mean(&yv, 0.0);
    let sw2_fixed: f64 = yv.iter().map(|&(_, v)| 1.0 / (v * v)).sum();
    let q_stat = yv.iter().map(|&(y, v)| (y - fixed_mean).powi(2) / v).sum();
    let k = yv.len() as f64;
    let typical_v = (k - 1.0) * sw_fixed / (sw_fixed * sw_fixed - sw2_fixed);
    let i2 = if tau2 == 0.0 {
        0.0
    } else {
        100.0 * tau2 / (tau2 + typical_v)
    };
    Ok(MetaResult {
        k: yv.len(),
        pooled_mean,
        se,
        ci_low: pooled_mean - z * se,
        ci_high: pooled_mean + z * se,
        tau2,
        q_stat,
        i2,
    })
}

/// Bowley's quartile skewness `(q3 + q1 − 2·q2) / (q3 − q1)`.
///
/// ```
/// use qmest::{meta::bowley, QuantileSummary};
/// assert_eq!(bowley(&QuantileSummary::s2(0.0, 1.0, 4.0, 10)).unwrap(), 0.5);
/// ```
pub fn bowley(summary: &QuantileSummary) -> Result<f64> {
    let (Some(q1), Some(q3)) = (summary.q1, summary.q3) else {
        return Err(Error::Contract(
            "Bowley's coefficient needs both quartiles".into(),
        ));
    };
    if !(q3 > q1) {
        return Err(Error::Domain(format!(
            "Bowley's coefficient is undefined when q3 = q1 = {q1}"
        )));
    }
    Ok((q3 + q1 - 2.0 * summary.q2) / (q3 - q1))
}

/// A study's derived estimate alongside its pooled effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedStudy {
    pub study_id: String,
    pub n: u64,
    pub estimate: EstimateResult,
}

/// Pooled result plus the per-study estimates that fed it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolReport {
    pub method: Method,
    pub scenario: Scenario,
    #[serde(flatten)]
    pub result: MetaResult,
    pub studies: Vec<DerivedStudy>,
    /// Studies left out because their estimator failed (lenient mode only).
    pub excluded: Vec<ExcludedStudy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedStudy {
    pub study_id: String,
    pub error: String,
}

/// Estimate every study's mean and SD with `method`, then pool the means.
/// Any study whose estimator fails aborts the whole run with an error naming
/// that study.
///
/// Each study gets its own seed derived from `opts.seed` and its id, so the
/// outcome does not depend on study order.
pub fn derive_and_pool(
    studies: &[(String, QuantileSummary)],
    method: Method,
    scenario: Scenario,
    opts: &EstimateOptions,
) -> Result<PoolReport> {
    derive_and_pool_with(studies, method, scenario, opts, true)
}

/// Like [`derive_and_pool`]; with `strict = false` failing studies are
/// listed in [`PoolReport::excluded`] and the rest are pooled.
pub fn derive_and_pool_with(
    studies: &[(String, QuantileSummary)],
    method: Method,
    scenario: Scenario,
    opts: &EstimateOptions,
    strict: bool,
) -> Result<PoolReport> {
    if studies.len() < 2 {
        return Err(Error::Contract(format!(
            "pooling needs at least 2 studies, got {}",
            studies.len()
        )));
    }
    let outcomes: Vec<Result<DerivedStudy>> = studies
        .par_iter()
        .map(|(id, s)| {
            let restricted = s.restrict(scenario);
            let study_opts = EstimateOptions {
                seed: derive_seed(opts.seed, fnv1a(id.as_bytes())),
                ..opts.clone()
            };
            let estimate = estimate(&restricted, method, &study_opts)?;
            if !(estimate.sd > 0.0) {
                return Err(Error::EstimationFailed(format!(
                    "estimated sd is {}, the study cannot be weighted",
                    estimate.sd
                )));
            }
            Ok(DerivedStudy {
                study_id: id.clone(),
                n: s.n,
                estimate,
            })
        })
        .collect();
    let mut derived = Vec::with_capacity(studies.len());
    let mut excluded = Vec::new();
    for ((id, _), outcome) in studies.iter().zip(outcomes) {
        match outcome {
            Ok(d) => derived.push(d),
            Err(e) if strict => return Err(Error::EstimationFailed(format!("study {id:?}: {e}"))),
            Err(e) => excluded.push(ExcludedStudy {
                study_id: id.clone(),
                error: e.to_string(),
            }),
        }
    }
    let effects: Vec<StudyEffect> = derived
        .iter()
        .map(|d| StudyEffect {
            study_id: d.study_id.clone(),
            mean: d.estimate.mean,
            sd: d.estimate.sd,
            n: d.n,
        })
        .collect();
    let result = pool(&effects)?;
    Ok(PoolReport {
        method,
        scenario,
        result,
        studies: derived,
        excluded,
    })
}

//! Quantile estimation. Every candidate family is fitted by least squares on
//! the reported quantiles, and the moments of the best fit are reported.

use crate::dists::{self, Family, FamilyParams};
use crate::error::{Error, Result};
use crate::formula;
use crate::optim::{minimize_box, nelder_mead_box, BoxOptions, Stop};
use crate::summaries::{QuantileSummary, Scenario, ShiftPolicy, ShiftRecord};
use serde::{Deserialize, Serialize};

/// One candidate's fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QeFit {
    pub params: FamilyParams,
    /// Sum of squared quantile deviations at the fitted parameters.
    pub objective: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QeResult {
    pub mean: f64,
    pub sd: f64,
    pub selected: FamilyParams,
    pub fits: Vec<QeFit>,
    pub shift: ShiftRecord,
}

#[derive(Debug, Clone)]
pub struct QeOptions {
    pub shift: ShiftPolicy,
    pub candidates: Vec<Family>,
    pub optimizer: BoxOptions,
}

impl Default for QeOptions {
    fn default() -> Self {
        QeOptions {
            shift: ShiftPolicy::default(),
            candidates: Family::CANDIDATES.to_vec(),
            optimizer: BoxOptions::default(),
        }
    }
}

/// Probabilities at which the scenario's quantiles are matched, paired with
/// the reported values.
pub fn matching_points(summary: &QuantileSummary) -> Vec<(f64, f64)> {
    let n = summary.n as f64;
    let probs: &[f64] = match summary.scenario {
        Scenario::S1 => &[1.0 / n, 0.5, 1.0 - 1.0 / n],
        Scenario::S2 => &[0.25, 0.5, 0.75],
        Scenario::S3 => &[1.0 / n, 0.25, 0.5, 0.75, 1.0 - 1.0 / n],
    };
    probs.iter().copied().zip(summary.values()).collect()
}

/// Sum of squared differences between the family's quantiles and the
/// reported ones.
///
/// ```
/// use qmest::{dists::FamilyParams, qe::qe_objective, QuantileSummary};
/// let s = QuantileSummary::s2(-0.6744897501960817, 0.0, 0.6744897501960817, 100);
/// let off = qe_objective(&s, &FamilyParams::normal(1.0, 1.0).unwrap()).unwrap();
/// assert!((off - 3.0).abs() < 1e-12);
/// ```
pub fn qe_objective(summary: &QuantileSummary, params: &FamilyParams) -> Result<f64> {
    summary.check()?;
    objective_unchecked(&matching_points(summary), params)
}

fn objective_unchecked(points: &[(f64, f64)], params: &FamilyParams) -> Result<f64> {
    let mut total = 0.0;
    for &(p, q) in points {
        let d = dists::quantile(params, p)? - q;
        total += d * d;
    }
    Ok(total)
}

/// Parameter box for a candidate. `None` when the box is undefined, which
/// happens for the log-normal when the bounding quantiles are not positive.
pub fn parameter_box(summary: &QuantileSummary, family: Family) -> Option<([f64; 2], [f64; 2])> {
    let (lo, hi) = match summary.scenario {
        Scenario::S1 => (summary.q_min?, summary.q_max?),
        _ => (summary.q1?, summary.q3?),
    };
    match family {
        Family::Normal => Some(([lo, 1e-3], [hi, 50.0])),
        Family::LogNormal if lo > 0.0 => Some(([lo.ln(), 1e-3], [hi.ln(), 50.0])),
        Family::LogNormal => None,
        Family::Gamma | Family::Weibull => Some(([1e-3, 1e-3], [100.0, 100.0])),
        Family::Beta => Some(([1e-3, 1e-3], [40.0, 40.0])),
        Family::Exponential => None,
    }
}

fn excluded(family: Family) -> QeFit {
    QeFit {
        params: FamilyParams {
            family,
            theta1: f64::NAN,
            theta2: f64::NAN,
        },
        objective: f64::INFINITY,
        converged: false,
    }
}

/// Fit one candidate by box-constrained quasi-Newton minimization, started
/// from the method-of-moments parameters of the closed-form estimates.
pub fn qe_fit(summary: &QuantileSummary, family: Family) -> Result<QeFit> {
    qe_fit_with(summary, family, &BoxOptions::default())
}

pub fn qe_fit_with(summary: &QuantileSummary, family: Family, opts: &BoxOptions) -> Result<QeFit> {
    summary.check()?;
    let Some((lower, upper)) = parameter_box(summary, family) else {
        return Ok(excluded(family));
    };
    let (mean, sd) = formula::luo_wan(summary)?;
    let start = match dists::mom_fit(family, mean, sd) {
        Ok(p) => [p.theta1, p.theta2],
        // No moment solution: start from the middle of the box instead.
        Err(Error::FitInfeasible { .. }) => box_centre(&lower, &upper),
        Err(e) => return Err(e),
    };
    let points = matching_points(summary);
    let objective = |theta: &[f64]| {
        FamilyParams::new(family, theta[0], theta[1])
            .and_then(|p| objective_unchecked(&points, &p))
            .unwrap_or(f64::INFINITY)
    };
    // Shape and scale parameters are searched on the log scale, where the
    // curved valleys of the gamma and beta objectives are nearly straight.
    // Location parameters stay on their own scale.
    let logged = [!matches!(family, Family::Normal | Family::LogNormal), true];
    let to_theta = |u: &[f64]| -> [f64; 2] {
        std::array::from_fn(|i| if logged[i] { u[i].exp() } else { u[i] })
    };
    let to_search = |t: &[f64; 2]| -> [f64; 2] {
        std::array::from_fn(|i| if logged[i] { t[i].ln() } else { t[i] })
    };
    let search_objective = |u: &[f64]| objective(&to_theta(u));
    let start: [f64; 2] = std::array::from_fn(|i| start[i].clamp(lower[i], upper[i]));
    let (u0, u_lo, u_hi) = (to_search(&start), to_search(&lower), to_search(&upper));
    let mut out = minimize_box(search_objective, &u0, &u_lo, &u_hi, opts);
    if out.stop == Stop::LineSearchFailed {
        let fallback = nelder_mead_box(search_objective, &out.x, &u_lo, &u_hi, opts);
        if fallback.value <= out.value {
            out = fallback;
        }
    }
    let theta = to_theta(&out.x);
    let params = FamilyParams {
        family,
        theta1: theta[0].clamp(lower[0], upper[0]),
        theta2: theta[1].clamp(lower[1], upper[1]),
    };
    Ok(QeFit {
        params,
        objective: out.value,
        converged: out.converged && out.value.is_finite(),
    })
}

fn box_centre(lower: &[f64; 2], upper: &[f64; 2]) -> [f64; 2] {
    let mid = |lo: f64, hi: f64| {
        if lo > 0.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        }
    };
    [mid(lower[0], upper[0]), mid(lower[1], upper[1])]
}

/// Estimate mean and SD with the default options.
pub fn qe_estimate(summary: &QuantileSummary) -> Result<QeResult> {
    qe_estimate_with(summary, &QeOptions::default())
}

pub fn qe_estimate_with(summary: &QuantileSummary, opts: &QeOptions) -> Result<QeResult> {
    summary.check()?;
    let (shifted, shift) = opts.shift.apply(summary);
    let mut fits = Vec::with_capacity(opts.candidates.len());
    for &family in &opts.candidates {
        fits.push(qe_fit_with(&shifted, family, &opts.optimizer)?);
    }
    let best = fits
        .iter()
        .filter(|f| f.converged)
        .filter_map(|f| dists::moments(&f.params).ok().map(|m| (f, m)))
        .filter(|(_, (_, sd))| *sd > 0.0)
        .min_by(|a, b| a.0.objective.total_cmp(&b.0.objective));
    let Some((fit, (mean, sd))) = best else {
        return Err(Error::EstimationFailed(
            "no candidate distribution converged".into(),
        ));
    };
    Ok(QeResult {
        mean: shift.unshift_mean(mean),
        sd,
        selected: fit.params,
        fits,
        shift,
    })
}

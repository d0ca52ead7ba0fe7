//! Approximate Bayesian computation by rejection.
//!
//! Parameters are drawn from uniform priors on each candidate's parameter
//! box and turned into pseudo studies of the same size. The draws whose
//! summaries land closest to the reported ones are kept.

use crate::dists::{self, Family, FamilyParams};
use crate::error::{Error, Result};
use crate::qe::parameter_box;
use crate::sim::{derive_seed, summarize_in_place, QuantileRule};
use crate::summaries::{QuantileSummary, Scenario, ShiftPolicy, ShiftRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DEFAULT_N_ITER: usize = 50_000;
pub const DEFAULT_ACCEPT_FRACTION: f64 = 0.001;

/// Default candidate families. Exponential takes the place gamma has among
/// the quantile-matching candidates.
pub const CANDIDATES: [Family; 5] = [
    Family::Normal,
    Family::LogNormal,
    Family::Exponential,
    Family::Beta,
    Family::Weibull,
];

/// Uniform prior box of `family`. The exponential rate shares the bounds of
/// the gamma rate, and its unused second coordinate is pinned to zero.
pub fn prior_box(summary: &QuantileSummary, family: Family) -> Option<([f64; 2], [f64; 2])> {
    match family {
        Family::Exponential => {
            let (lo, hi) = parameter_box(summary, Family::Gamma)?;
            Some(([lo[1], 0.0], [hi[1], 0.0]))
        }
        _ => parameter_box(summary, family),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbcConfig {
    /// Prior draws per candidate family.
    pub n_iter: usize,
    /// Share of all pooled draws that is accepted.
    pub accept_fraction: f64,
    pub seed: u64,
    pub candidates: Vec<Family>,
    pub shift: ShiftPolicy,
    /// Quantile definition used for the pseudo summaries.
    pub rule: QuantileRule,
}

impl Default for AbcConfig {
    fn default() -> Self {
        AbcConfig {
            n_iter: DEFAULT_N_ITER,
            accept_fraction: DEFAULT_ACCEPT_FRACTION,
            seed: crate::DEFAULT_SEED,
            candidates: CANDIDATES.to_vec(),
            shift: ShiftPolicy::default(),
            rule: QuantileRule::default(),
        }
    }
}

impl AbcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iter == 0 {
            return Err(Error::Contract("n_iter must be positive".into()));
        }
        if !(self.accept_fraction > 0.0 && self.accept_fraction < 1.0) {
            return Err(Error::Contract(format!(
                "accept_fraction must lie in (0, 1), got {}",
                self.accept_fraction
            )));
        }
        if self.candidates.is_empty() {
            return Err(Error::Contract("no candidate families".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyCount {
    pub family: Family,
    pub accepted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbcResult {
    pub mean: f64,
    pub sd: f64,
    pub selected: Family,
    /// Posterior mean of the selected family's parameters.
    pub params: FamilyParams,
    /// Share of accepted draws that belong to the selected family.
    pub posterior_prob: f64,
    /// Accepted draws per candidate, in candidate order.
    pub accepted_counts: Vec<FamilyCount>,
    pub shift: ShiftRecord,
}

fn scale_of(observed: &QuantileSummary) -> f64 {
    match observed.scenario {
        Scenario::S2 => observed.q3.unwrap() - observed.q1.unwrap(),
        _ => observed.q_max.unwrap() - observed.q_min.unwrap(),
    }
}

/// Euclidean distance between two summaries' quantile vectors, with every
/// coordinate divided by the observed spread (`q_max − q_min`, or `q3 − q1`
/// when only quartiles are reported).
///
/// ```
/// use qmest::{abc::abc_distance, QuantileSummary};
/// let obs = QuantileSummary::s2(2.0, 5.0, 10.0, 40);
/// let pseudo = QuantileSummary::s2(2.0, 5.4, 10.0, 40);
/// assert!((abc_distance(&obs, &pseudo).unwrap() - 0.05).abs() < 1e-12);
/// ```
pub fn abc_distance(observed: &QuantileSummary, pseudo: &QuantileSummary) -> Result<f64> {
    if observed.scenario != pseudo.scenario || observed.n != pseudo.n {
        return Err(Error::Contract(format!(
            "cannot compare a {} summary of n={} with a {} summary of n={}",
            observed.scenario, observed.n, pseudo.scenario, pseudo.n
        )));
    }
    observed.check()?;
    let (a, b) = (observed.values(), pseudo.values());
    if a.len() != b.len() {
        return Err(Error::Contract("pseudo summary is missing fields".into()));
    }
    let scale = scale_of(observed);
    if !(scale > 0.0) {
        return Err(Error::Degenerate(
            "observed spread is zero, distances are undefined".into(),
        ));
    }
    Ok(scaled_distance(&a, &b, scale))
}

fn scaled_distance(a: &[f64], b: &[f64], scale: f64) -> f64 {
    let ss: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| ((x - y) / scale).powi(2))
        .sum();
    let d = ss.sqrt();
    if d.is_nan() {
        f64::INFINITY
    } else {
        d
    }
}

struct Draws {
    family: Family,
    theta: Vec<[f64; 2]>,
    distance: Vec<f64>,
}

fn simulate_family(
    family: Family,
    lower: [f64; 2],
    upper: [f64; 2],
    observed: &[f64],
    summary: &QuantileSummary,
    scale: f64,
    config: &AbcConfig,
) -> Draws {
    let stream = derive_seed(config.seed, family as u64);
    let n = summary.n as usize;
    let (theta, distance) = (0..config.n_iter)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n),
            |buf, i| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(stream, i as u64));
                let t = [
                    lower[0] + (upper[0] - lower[0]) * rng.random::<f64>(),
                    lower[1] + (upper[1] - lower[1]) * rng.random::<f64>(),
                ];
                let d = FamilyParams::new(family, t[0], t[1])
                    .and_then(|p| dists::sample_with(&p, n, &mut rng))
                    .map(|data| {
                        buf.clear();
                        buf.extend(data);
                        let pseudo = summarize_in_place(buf, summary.scenario, config.rule);
                        scaled_distance(observed, &pseudo.values(), scale)
                    })
                    .unwrap_or(f64::INFINITY);
                (t, d)
            },
        )
        .unzip();
    Draws {
        family,
        theta,
        distance,
    }
}

/// Estimate with the default configuration.
pub fn abc_estimate(summary: &QuantileSummary) -> Result<AbcResult> {
    abc_estimate_with(summary, &AbcConfig::default())
}

pub fn abc_estimate_with(summary: &QuantileSummary, config: &AbcConfig) -> Result<AbcResult> {
    config.validate()?;
    summary.check()?;
    let (shifted, shift) = config.shift.apply(summary);
    let scale = scale_of(&shifted);
    if !(scale > 0.0) {
        return Err(Error::Degenerate(
            "observed spread is zero, distances are undefined".into(),
        ));
    }
    let observed = shifted.values();

    let runs: Vec<Draws> = config
        .candidates
        .iter()
        .filter_map(|&f| prior_box(&shifted, f).map(|(lo, hi)| (f, lo, hi)))
        .map(|(f, lo, hi)| simulate_family(f, lo, hi, &observed, &shifted, scale, config))
        .collect();
    if runs.is_empty() {
        return Err(Error::Contract(
            "no candidate family has a usable prior box".into(),
        ));
    }

    // Pool every draw and keep the closest ones. Ties are broken by candidate
    // order and then draw index so the result never depends on scheduling.
    let mut index: Vec<(usize, usize)> = runs
        .iter()
        .enumerate()
        .flat_map(|(r, d)| (0..d.distance.len()).map(move |i| (r, i)))
        .collect();
    let total = index.len();
    let keep = ((config.accept_fraction * total as f64).round() as usize).clamp(1, total);
    let key = |&(r, i): &(usize, usize)| (runs[r].distance[i], r, i);
    let cmp = |a: &(usize, usize), b: &(usize, usize)| {
        let (da, ra, ia) = key(a);
        let (db, rb, ib) = key(b);
        da.total_cmp(&db).then(ra.cmp(&rb)).then(ia.cmp(&ib))
    };
    if keep < total {
        index.select_nth_unstable_by(keep - 1, cmp);
    }
    let accepted = &index[..keep];

    let mut counts = vec![0usize; runs.len()];
    let mut sums = vec![[0.0f64; 2]; runs.len()];
    for &(r, i) in accepted {
        counts[r] += 1;
        sums[r][0] += runs[r].theta[i][0];
        sums[r][1] += runs[r].theta[i][1];
    }
    // First maximum wins, so ties go to the earlier candidate.
    let best = (0..runs.len())
        .rev()
        .max_by_key(|&r| counts[r])
        .expect("at least one family ran");
    if counts[best] == 0 {
        return Err(Error::Contract("no draws were accepted".into()));
    }
    if accepted
        .iter()
        .all(|&(r, i)| runs[r].distance[i].is_infinite())
    {
        return Err(Error::EstimationFailed(
            "no simulated summary came within finite distance".into(),
        ));
    }
    let c = counts[best] as f64;
    let params = FamilyParams::new(runs[best].family, sums[best][0] / c, sums[best][1] / c)?;
    let (mean, sd) = dists::moments(&params).map_err(|e| {
        Error::EstimationFailed(format!(
            "posterior mean {params} has no finite moments: {e}"
        ))
    })?;

    let accepted_counts = config
        .candidates
        .iter()
        .map(|&family| FamilyCount {
            family,
            accepted: runs
                .iter()
                .zip(&counts)
                .find(|(d, _)| d.family == family)
                .map_or(0, |(_, &k)| k),
        })
        .collect();
    Ok(AbcResult {
        mean: shift.unshift_mean(mean),
        sd,
        selected: params.family,
        params,
        posterior_prob: c / keep as f64,
        accepted_counts,
        shift,
    })
}

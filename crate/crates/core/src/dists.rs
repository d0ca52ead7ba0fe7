//! Parametric families used as QE candidates and as simulation targets.
//!
//! Every family is described by a [`FamilyParams`] value holding at most two
//! parameters. The conventions are:
//!
//! | family        | `theta1`        | `theta2`        |
//! |---------------|-----------------|-----------------|
//! | `normal`      | mean μ          | sd σ            |
//! | `log_normal`  | log-scale μ     | log-scale σ     |
//! | `gamma`       | shape α         | rate β          |
//! | `beta`        | α               | β               |
//! | `weibull`     | shape k         | scale λ         |
//! | `exponential` | rate λ          | unused (0)      |

use crate::error::{Error, Result};
use libm::erfc;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Normal,
    LogNormal,
    Gamma,
    Beta,
    Weibull,
    Exponential,
}

impl Family {
    /// The five candidate families fitted by the quantile-matching and ABC
    /// estimators, in the order they are tried.
    pub const CANDIDATES: [Family; 5] = [
        Family::Normal,
        Family::LogNormal,
        Family::Gamma,
        Family::Beta,
        Family::Weibull,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Normal => "normal",
            Family::LogNormal => "log_normal",
            Family::Gamma => "gamma",
            Family::Beta => "beta",
            Family::Weibull => "weibull",
            Family::Exponential => "exponential",
        }
    }

    pub fn n_params(self) -> usize {
        match self {
            Family::Exponential => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "normal" => Ok(Family::Normal),
            "log_normal" | "lognormal" => Ok(Family::LogNormal),
            "gamma" => Ok(Family::Gamma),
            "beta" => Ok(Family::Beta),
            "weibull" => Ok(Family::Weibull),
            "exponential" | "exp" => Ok(Family::Exponential),
            other => Err(Error::Domain(format!("unknown family {other:?}"))),
        }
    }
}

/// A family together with its parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub family: Family,
    pub theta1: f64,
    pub theta2: f64,
}

impl FamilyParams {
    pub fn new(family: Family, theta1: f64, theta2: f64) -> Result<Self> {
        let p = FamilyParams {
            family,
            theta1,
            theta2: if family == Family::Exponential {
                0.0
            } else {
                theta2
            },
        };
        p.validate()?;
        Ok(p)
    }

    pub fn normal(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(Family::Normal, mu, sigma)
    }

    pub fn log_normal(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(Family::LogNormal, mu, sigma)
    }

    /// Gamma with shape `alpha` and rate `beta`.
    pub fn gamma(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(Family::Gamma, alpha, beta)
    }

    pub fn beta(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(Family::Beta, alpha, beta)
    }

    /// Weibull with the given shape and scale.
    pub fn weibull(shape: f64, scale: f64) -> Result<Self> {
        Self::new(Family::Weibull, shape, scale)
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(Family::Exponential, rate, 0.0)
    }

    /// Parameter vector as a slice of length [`Family::n_params`].
    pub fn theta(&self) -> Vec<f64> {
        match self.family {
            Family::Exponential => vec![self.theta1],
            _ => vec![self.theta1, self.theta2],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = (self.theta1, self.theta2);
        let ok = match self.family {
            Family::Normal | Family::LogNormal => a.is_finite() && b.is_finite() && b > 0.0,
            Family::Gamma | Family::Beta | Family::Weibull => {
                a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0
            }
            Family::Exponential => a.is_finite() && a > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid parameters for {self}")))
        }
    }
}

impl fmt::Display for FamilyParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Exponential => write!(f, "exponential({})", self.theta1),
            fam => write!(f, "{fam}({}, {})", self.theta1, self.theta2),
        }
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Inverse of the standard normal CDF.
///
/// A rational approximation (relative error about 1e-9) followed by one
/// Newton step on the CDF.
///
/// ```
/// let z = qmest::dists::normal_quantile(0.975).unwrap();
/// assert!((z - 1.959963984540054).abs() < 1e-12);
/// ```
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "normal quantile needs p in (0, 1), got {p}"
        )));
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        let t = (-2.0 * q.ln()).sqrt();
        (((((C[0] * t + C[1]) * t + C[2]) * t + C[3]) * t + C[4]) * t + C[5])
            / ((((D[0] * t + D[1]) * t + D[2]) * t + D[3]) * t + 1.0)
    };
    let mut x = if p < P_LOW {
        tail(p)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail(1.0 - p)
    };

    // Newton refinement; the residual is formed in whichever tail is accurate.
    let resid = if x < 0.0 {
        normal_cdf(x) - p
    } else {
        (1.0 - p) - 0.5 * erfc(x * FRAC_1_SQRT_2)
    };
    let dens = normal_pdf(x);
    if dens > 0.0 {
        x -= resid / dens;
    }
    Ok(x)
}

/// Quantile function of `params` at probability `p`.
pub fn quantile(params: &FamilyParams, p: f64) -> Result<f64> {
    params.validate()?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "quantile needs p in (0, 1), got {p}"
        )));
    }
    let (a, b) = (params.theta1, params.theta2);
    Ok(match params.family {
        Family::Normal => a + b * normal_quantile(p)?,
        Family::LogNormal => (a + b * normal_quantile(p)?).exp(),
        Family::Gamma => gamma_quantile(a, p) / b,
        Family::Beta => beta_quantile(a, b, p),
        Family::Weibull => b * (-(-p).ln_1p()).powf(1.0 / a),
        Family::Exponential => -(-p).ln_1p() / a,
    })
}

/// Solve `f(t) = 0` for an increasing `f` given as `(value, derivative)`.
///
/// Newton steps are kept inside a bracket that is grown from `start` and
/// shrunk on every evaluation; a step that leaves it becomes a bisection.
fn solve_increasing(f: impl Fn(f64) -> (f64, f64), start: f64, lim: f64) -> f64 {
    let (mut lo, mut hi) = (start, start);
    let (f0, _) = f(start);
    if f0 == 0.0 {
        return start;
    }
    let mut step = 1.0;
    if f0 < 0.0 {
        loop {
            hi = (hi + step).min(lim);
            if f(hi).0 >= 0.0 || hi >= lim {
                break;
            }
            lo = hi;
            step *= 2.0;
        }
    } else {
        loop {
            lo = (lo - step).max(-lim);
            if f(lo).0 <= 0.0 || lo <= -lim {
                break;
            }
            hi = lo;
            step *= 2.0;
        }
    }

    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (v, dv) = f(t);
        if v == 0.0 {
            return t;
        }
        if v < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let newton = t - v / dv;
        let next = if dv > 0.0 && newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - t).abs() <= 4.0 * f64::EPSILON * t.abs().max(1.0) || hi - lo <= f64::EPSILON {
            return next;
        }
        t = next;
    }
    t
}

/// Quantile of a unit-rate gamma with the given shape, solved on `ln x`.
fn gamma_quantile(shape: f64, p: f64) -> f64 {
    let lg = ln_gamma(shape);
    let upper = p > 0.5;
    let f = |t: f64| {
        let x = t.exp();
        let dens = (shape * t - x - lg).exp();
        if upper {
            ((1.0 - p) - gamma_ur(shape, x), dens)
        } else {
            (gamma_lr(shape, x) - p, dens)
        }
    };
    // Wilson-Hilferty starting point.
    let z = normal_quantile(p).unwrap_or(0.0);
    let c = 1.0 / (9.0 * shape);
    let wh = shape * (1.0 - c + z * c.sqrt()).powi(3);
    let start = if wh > 0.0 {
        wh.ln()
    } else {
        ((p * (lg + shape.ln()).exp()).ln()) / shape
    };
    let t = solve_increasing(f, start.clamp(-700.0, 700.0), 745.0);
    t.exp()
}

/// Quantile of Beta(a, b), solved on the logit scale.
fn beta_quantile(a: f64, b: f64, p: f64) -> f64 {
    let lb = ln_beta(a, b);
    let upper = p > 0.5;
    let softplus = |u: f64| {
        if u > 0.0 {
            u + (-u).exp().ln_1p()
        } else {
            u.exp().ln_1p()
        }
    };
    let f = |u: f64| {
        let ln_x = -softplus(-u);
        let ln_1mx = -softplus(u);
        let dens = (a * ln_x + b * ln_1mx - lb).exp();
        if upper {
            ((1.0 - p) - beta_reg(b, a, ln_1mx.exp()), dens)
        } else {
            (beta_reg(a, b, ln_x.exp()) - p, dens)
        }
    };
    let m = a / (a + b);
    let u = solve_increasing(f, (m / (1.0 - m)).ln().clamp(-30.0, 30.0), 745.0);
    1.0 / (1.0 + (-u).exp())
}

/// Closed-form mean and standard deviation of `params`.
pub fn moments(params: &FamilyParams) -> Result<(f64, f64)> {
    params.validate()?;
    let (a, b) = (params.theta1, params.theta2);
    let (mean, sd) = match params.family {
        Family::Normal => (a, b),
        Family::LogNormal => {
            let s2 = b * b;
            let m = (a + 0.5 * s2).exp();
            (m, m * s2.exp_m1().sqrt())
        }
        Family::Gamma => (a / b, a.sqrt() / b),
        Family::Beta => {
            let s = a + b;
            (a / s, (a * b / (s * s * (s + 1.0))).sqrt())
        }
        Family::Weibull => {
            let g1 = ln_gamma(1.0 + 1.0 / a);
            let g2 = ln_gamma(1.0 + 2.0 / a);
            let m = b * g1.exp();
            (m, m * (g2 - 2.0 * g1).exp_m1().sqrt())
        }
        Family::Exponential => (1.0 / a, 1.0 / a),
    };
    if mean.is_finite() && sd.is_finite() {
        Ok((mean, sd))
    } else {
        Err(Error::Domain(format!("{params} has non-finite moments")))
    }
}

/// Method-of-moments parameters of `family` matching `mean` and `sd`.
pub fn mom_fit(family: Family, mean: f64, sd: f64) -> Result<FamilyParams> {
    let infeasible = |reason: &str| Error::FitInfeasible {
        family: family.to_string(),
        reason: reason.to_string(),
    };
    if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
        return Err(infeasible("sd must be positive and finite"));
    }
    let needs_positive_mean = |m: f64| {
        if m > 0.0 {
            Ok(())
        } else {
            Err(infeasible("mean must be positive"))
        }
    };
    match family {
        Family::Normal => FamilyParams::normal(mean, sd),
        Family::LogNormal => {
            needs_positive_mean(mean)?;
            let s2 = (sd / mean).powi(2).ln_1p();
            FamilyParams::log_normal(mean.ln() - 0.5 * s2, s2.sqrt())
        }
        Family::Gamma => {
            needs_positive_mean(mean)?;
            FamilyParams::gamma((mean / sd).powi(2), mean / (sd * sd))
        }
        Family::Beta => {
            if !(mean > 0.0 && mean < 1.0) {
                return Err(infeasible("mean must lie in (0, 1)"));
            }
            if sd * sd >= mean * (1.0 - mean) {
                return Err(infeasible("variance must be below mean(1 - mean)"));
            }
            let common = mean * (1.0 - mean) / (sd * sd) - 1.0;
            FamilyParams::beta(mean * common, (1.0 - mean) * common)
        }
        Family::Weibull => {
            needs_positive_mean(mean)?;
            let shape = weibull_shape_for_cv(sd / mean)
                .ok_or_else(|| infeasible("coefficient of variation outside shape range"))?;
            FamilyParams::weibull(shape, mean / ln_gamma(1.0 + 1.0 / shape).exp())
        }
        Family::Exponential => {
            needs_positive_mean(mean)?;
            FamilyParams::exponential(1.0 / mean)
        }
    }
}

const WEIBULL_SHAPE_RANGE: (f64, f64) = (1e-3, 100.0);

/// Shape whose coefficient of variation equals `cv`, by bisection on
/// `ln(1 + cv²)`, which is decreasing in the shape.
fn weibull_shape_for_cv(cv: f64) -> Option<f64> {
    let target = (cv * cv).ln_1p();
    let h = |k: f64| ln_gamma(1.0 + 2.0 / k) - 2.0 * ln_gamma(1.0 + 1.0 / k) - target;
    let (mut lo, mut hi) = (WEIBULL_SHAPE_RANGE.0.ln(), WEIBULL_SHAPE_RANGE.1.ln());
    if h(lo.exp()) < 0.0 || h(hi.exp()) > 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid.exp()) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Some((0.5 * (lo + hi)).exp())
}

/// Draw `n` values from `params`, deterministically for a given `seed`.
pub fn sample(params: &FamilyParams, n: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(params, n, &mut rng)
}

/// Like [`sample`] but drawing from a caller-owned generator.
pub fn sample_with<R: rand::Rng + ?Sized>(
    params: &FamilyParams,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Domain("sample size must be at least 1".into()));
    }
    params.validate()?;
    let (a, b) = (params.theta1, params.theta2);
    let bad = |e: &dyn fmt::Display| Error::Domain(format!("{params}: {e}"));
    let out = match params.family {
        Family::Normal => {
            let d = rand_distr::Normal::new(a, b).map_err(|e| bad(&e))?;
            d.sample_iter(rng).take(n).collect()
        }
        Family::LogNormal => {
            let d = rand_distr::LogNormal::new(a, b).map_err(|e| bad(&e))?;
            d.sample_iter(rng).take(n).collect()
        }
        Family::Gamma => {
            let d = rand_distr::Gamma::new(a, 1.0 / b).map_err(|e| bad(&e))?;
            d.sample_iter(rng).take(n).collect()
        }
        Family::Beta => {
            let d = rand_distr::Beta::new(a, b).map_err(|e| bad(&e))?;
            d.sample_iter(rng).take(n).collect()
        }
        Family::Weibull => {
            let d = rand_distr::Weibull::new(b, a).map_err(|e| bad(&e))?;
            d.sample_iter(rng).take(n).collect()
        }
        Family::Exponential => {
            let d = rand_distr::Exp::new(a).map_err(|e| bad(&e))?;
            d.sample_iter(rng).take(n).collect()
        }
    };
    Ok(out)
}

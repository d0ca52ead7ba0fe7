//! One entry point over every estimator, returning a common result record.

use crate::abc::{self, AbcConfig};
use crate::bc::{self, BcOptions};
use crate::dists::FamilyParams;
use crate::error::{Error, Result};
use crate::formula;
use crate::qe::{self, QeOptions};
use crate::summaries::{QuantileSummary, Scenario, ShiftPolicy, ShiftRecord};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    LuoWan,
    Qe,
    Bc,
    Abc,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::LuoWan, Method::Qe, Method::Bc, Method::Abc];

    pub fn name(self) -> &'static str {
        match self {
            Method::LuoWan => "luo_wan",
            Method::Qe => "qe",
            Method::Bc => "bc",
            Method::Abc => "abc",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "luo_wan" | "luowan" | "formula" => Ok(Method::LuoWan),
            "qe" => Ok(Method::Qe),
            "bc" => Ok(Method::Bc),
            "abc" => Ok(Method::Abc),
            other => Err(Error::Domain(format!("unknown method {other:?}"))),
        }
    }
}

/// Settings shared by every estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOptions {
    pub shift: ShiftPolicy,
    /// Seed for the Monte Carlo steps of BC and ABC.
    pub seed: u64,
    pub mc_draws: usize,
    pub abc_n_iter: usize,
    pub abc_accept_fraction: f64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            shift: ShiftPolicy::default(),
            seed: crate::DEFAULT_SEED,
            mc_draws: bc::DEFAULT_MC_DRAWS,
            abc_n_iter: abc::DEFAULT_N_ITER,
            abc_accept_fraction: abc::DEFAULT_ACCEPT_FRACTION,
        }
    }
}

/// Estimated mean and SD with whatever diagnostics the method produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub method: Method,
    pub scenario: Scenario,
    pub mean: f64,
    pub sd: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selected: Option<FamilyParams>,
    /// Least-squares objective of the selected QE fit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// ABC posterior probability of the selected family.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance_rate: Option<f64>,
    pub shift: ShiftRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl EstimateResult {
    fn bare(method: Method, scenario: Scenario, mean: f64, sd: f64, shift: ShiftRecord) -> Self {
        EstimateResult {
            method,
            scenario,
            mean,
            sd,
            selected: None,
            objective: None,
            lambda: None,
            acceptance_rate: None,
            shift,
            warning: None,
        }
    }
}

/// Run `method` on `summary`.
///
/// ```
/// use qmest::estimate::{estimate, EstimateOptions, Method};
/// use qmest::QuantileSummary;
/// let s = QuantileSummary::s2(2.0, 5.0, 10.0, 100);
/// let r = estimate(&s, Method::LuoWan, &EstimateOptions::default()).unwrap();
/// assert!((r.mean - 5.7039).abs() < 1e-12);
/// ```
pub fn estimate(
    summary: &QuantileSummary,
    method: Method,
    opts: &EstimateOptions,
) -> Result<EstimateResult> {
    let scenario = summary.scenario;
    match method {
        Method::LuoWan => {
            summary.check()?;
            // The closed forms are location equivariant, so the shift only
            // matters for bookkeeping.
            let (shifted, shift) = opts.shift.apply(summary);
            let (mean, sd) = formula::luo_wan(&shifted)?;
            Ok(EstimateResult::bare(
                method,
                scenario,
                shift.unshift_mean(mean),
                sd,
                shift,
            ))
        }
        Method::Qe => {
            let r = qe::qe_estimate_with(
                summary,
                &QeOptions {
                    shift: opts.shift,
                    ..QeOptions::default()
                },
            )?;
            let objective = r
                .fits
                .iter()
                .find(|f| f.params == r.selected)
                .map(|f| f.objective);
            Ok(EstimateResult {
                selected: Some(r.selected),
                objective,
                ..EstimateResult::bare(method, scenario, r.mean, r.sd, r.shift)
            })
        }
        Method::Bc => {
            let r = bc::bc_estimate_with(
                summary,
                &BcOptions {
                    mc_draws: opts.mc_draws,
                    seed: opts.seed,
                    shift: opts.shift,
                },
            )?;
            Ok(EstimateResult {
                lambda: Some(r.lambda),
                warning: r.warning,
                ..EstimateResult::bare(method, scenario, r.mean, r.sd, r.shift)
            })
        }
        Method::Abc => {
            let r = abc::abc_estimate_with(
                summary,
                &AbcConfig {
                    n_iter: opts.abc_n_iter,
                    accept_fraction: opts.abc_accept_fraction,
                    seed: opts.seed,
                    shift: opts.shift,
                    ..AbcConfig::default()
                },
            )?;
            Ok(EstimateResult {
                selected: Some(r.params),
                acceptance_rate: Some(r.posterior_prob),
                ..EstimateResult::bare(method, scenario, r.mean, r.sd, r.shift)
            })
        }
    }
}

//! Estimate sample means and standard deviations from reported quantiles,
//! and pool them across studies.
//!
//! Four estimators are available through [`estimate::estimate`]:
//! closed-form weighted formulas ([`formula`]), quantile matching over five
//! parametric families ([`qe`]), Box-Cox back-transformation ([`bc`]) and
//! approximate Bayesian computation ([`abc`]). [`meta`] pools per-study
//! estimates in a random-effects model, and [`sim`] measures estimator error
//! on simulated studies.
//!
//! ```
//! use qmest::estimate::{estimate, EstimateOptions, Method};
//! use qmest::QuantileSummary;
//!
//! let summary = QuantileSummary::s3(1.0, 3.0, 5.0, 8.0, 20.0, 80);
//! let r = estimate(&summary, Method::Qe, &EstimateOptions::default()).unwrap();
//! assert!(r.mean > 5.0 && r.sd > 0.0);
//! ```

// Comparisons are written as `!(x > 0.0)` on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dists;
pub mod error;
pub mod formula;
pub mod optim;
pub mod quad;

pub mod abc;
pub mod bc;
pub mod cli;
pub mod estimate;
pub mod fixtures;
pub mod io;
pub mod meta;
pub mod qe;
pub mod sim;
pub mod summaries;

pub use error::{Error, Result};
pub use summaries::{QuantileSummary, Scenario, ShiftPolicy, ShiftRecord};

/// Seed used whenever a caller does not supply one.
pub const DEFAULT_SEED: u64 = 20_230_817;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/summaries.md")]
    mod summaries {}
    #[doc = include_str!("../../../book/src/closed_form.md")]
    mod closed_form {}
    #[doc = include_str!("../../../book/src/quantile_matching.md")]
    mod quantile_matching {}
    #[doc = include_str!("../../../book/src/box_cox.md")]
    mod box_cox {}
    #[doc = include_str!("../../../book/src/abc.md")]
    mod abc {}
    #[doc = include_str!("../../../book/src/pooling.md")]
    mod pooling {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/command_line.md")]
    mod command_line {}
}

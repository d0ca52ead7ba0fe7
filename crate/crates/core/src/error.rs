use crate::summaries::Violation;
use std::fmt;
use thiserror::Error;

/// Errors raised by the estimators, the meta-analysis engine and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a function or distribution.
    #[error("domain error: {0}")]
    Domain(String),

    /// The method-of-moments system has no solution for this family.
    #[error("method-of-moments fit infeasible for {family}: {reason}")]
    FitInfeasible { family: String, reason: String },

    /// A quantile summary failed validation.
    #[error("invalid summary: {}", ViolationList(.0))]
    Validation(Vec<Violation>),

    /// The summary is valid but too degenerate for the requested estimator.
    #[error("degenerate summary: {0}")]
    Degenerate(String),

    /// The estimator ran but could not produce an estimate.
    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    /// A caller broke an operation's contract (wrong scenario, too few studies...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

struct ViolationList<'a>(&'a [Violation]);

impl fmt::Display for ViolationList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

//! Reading and writing the study summaries CSV schema:
//! `study_id,n,q_min,q1,q2,q3,q_max`, with empty cells for quantiles a study
//! did not report.

use crate::error::{Error, Result};
use crate::summaries::{QuantileSummary, Scenario};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub study_id: String,
    pub n: u64,
    pub q_min: Option<f64>,
    pub q1: Option<f64>,
    pub q2: f64,
    pub q3: Option<f64>,
    pub q_max: Option<f64>,
}

impl SummaryRow {
    /// The row viewed under `scenario`. Fields the scenario does not use are
    /// dropped; missing required fields surface when the summary is validated.
    pub fn to_summary(&self, scenario: Scenario) -> QuantileSummary {
        QuantileSummary {
            scenario,
            q_min: self.q_min,
            q1: self.q1,
            q2: self.q2,
            q3: self.q3,
            q_max: self.q_max,
            n: self.n,
        }
        .restrict(scenario)
    }
}

/// A row that could not be parsed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    /// One-based line number in the input, header included.
    pub line: u64,
    pub message: String,
}

/// Parse every data row. A bad header is an error; bad rows are reported
/// individually so the caller can decide whether to continue.
pub fn read_summaries<R: Read>(input: R) -> Result<Vec<Result<SummaryRow, RowError>>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    for needed in ["study_id", "n", "q_min", "q1", "q2", "q3", "q_max"] {
        if !headers.iter().any(|h| h == needed) {
            return Err(Error::Contract(format!(
                "input is missing the {needed:?} column"
            )));
        }
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let parsed = record.map_err(|e| RowError {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        });
        out.push(parsed.and_then(|r| {
            let line = r.position().map_or(0, |p| p.line());
            r.deserialize::<SummaryRow>(Some(&headers))
                .map_err(|e| RowError {
                    line,
                    message: e.to_string(),
                })
        }));
    }
    Ok(out)
}

pub fn write_summaries<W: Write>(rows: &[SummaryRow], output: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(output);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

//! Datasets bundled with the crate.

use crate::io::{read_summaries, SummaryRow};
use crate::summaries::{QuantileSummary, Scenario};

/// Five-number summaries and sample sizes of the depression-screening
/// studies used in the worked example, one row per study.
pub const TABLE_S1_CSV: &str = include_str!("../data/table_s1.csv");

/// Names accepted by `--fixture`.
pub const NAMES: [&str; 1] = ["table_s1"];

pub fn table_s1() -> Vec<SummaryRow> {
    read_summaries(TABLE_S1_CSV.as_bytes())
        .expect("embedded fixture has a valid header")
        .into_iter()
        .map(|r| r.expect("embedded fixture rows parse"))
        .collect()
}

/// The fixture's studies restricted to `scenario`, ready for pooling.
pub fn table_s1_studies(scenario: Scenario) -> Vec<(String, QuantileSummary)> {
    table_s1()
        .into_iter()
        .map(|r| {
            let s = r.to_summary(scenario);
            (r.study_id, s)
        })
        .collect()
}

pub fn by_name(name: &str) -> Option<Vec<SummaryRow>> {
    match name {
        "table_s1" => Some(table_s1()),
        _ => None,
    }
}

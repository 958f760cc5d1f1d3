use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::write_atomic;

use super::metrics::Metrics;

pub const CSV_HEADER: [&str; 11] = [
    "policy",
    "estimator",
    "control_mode",
    "axis",
    "axis_value",
    "seed",
    "K",
    "violation_prob",
    "norm_total_cost",
    "norm_updating_cost",
    "norm_control_cost",
];

/// One line of a results file.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub policy: String,
    pub estimator: String,
    pub control_mode: String,
    pub axis: String,
    pub axis_value: Option<f64>,
    pub seed: u64,
    pub slots: u64,
    pub metrics: Metrics,
}

#[derive(Serialize)]
struct CsvLine<'a> {
    policy: &'a str,
    estimator: &'a str,
    control_mode: &'a str,
    axis: &'a str,
    axis_value: String,
    seed: u64,
    #[serde(rename = "K")]
    k: u64,
    violation_prob: String,
    norm_total_cost: String,
    norm_updating_cost: String,
    norm_control_cost: String,
}

/// Formats like C's `%g`: six significant digits, trailing zeros removed,
/// scientific notation for exponents below -4 or above 5.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn results_csv_bytes(rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.serialize(CsvLine {
            policy: &r.policy,
            estimator: &r.estimator,
            control_mode: &r.control_mode,
            axis: &r.axis,
            axis_value: r.axis_value.map(format_sig6).unwrap_or_default(),
            seed: r.seed,
            k: r.slots,
            violation_prob: format_sig6(r.metrics.violation_prob),
            norm_total_cost: format_sig6(r.metrics.norm_total_cost),
            norm_updating_cost: format_sig6(r.metrics.norm_updating_cost),
            norm_control_cost: format_sig6(r.metrics.norm_control_cost),
        })?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Writes the complete file through a temporary sibling and a rename.
pub fn write_results_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    write_atomic(path, &results_csv_bytes(rows)?)
}

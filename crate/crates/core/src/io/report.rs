use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::{CoincidenceRow, FileScoreRow};
use crate::stats::RegressionFit;

/// Everything `analyze` produces, as written to the report file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Report {
    pub scores: Vec<FileScoreRow>,
    pub fits: Vec<RegressionFit>,
    pub coincidences: Vec<CoincidenceRow>,
}

const SIGNIFICANT_DIGITS: usize = 9;

fn round_numbers(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            let rounded: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().expect("valid float");
            if let Some(r) = serde_json::Number::from_f64(rounded) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_numbers),
        Value::Object(map) => map.values_mut().for_each(round_numbers),
        _ => {}
    }
}

/// Deterministic pretty-printed JSON: keys sorted, floats rounded to nine
/// significant digits, trailing newline.
pub fn write_report_json(rows: &[FileScoreRow], fits: &[RegressionFit], coincidences: &[CoincidenceRow]) -> String {
    let report = Report { scores: rows.to_vec(), fits: fits.to_vec(), coincidences: coincidences.to_vec() };
    let mut value = serde_json::to_value(&report).expect("report serializes");
    round_numbers(&mut value);
    let mut out = serde_json::to_string_pretty(&value).expect("value serializes");
    out.push('\n');
    out
}

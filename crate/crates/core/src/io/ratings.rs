use serde::{Deserialize, Serialize};

use super::IoError;

/// A human quality rating of one recording, from 0 (very poor) to 10 (very
/// good).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub rec_id: String,
    pub rating: f64,
}

/// Parses `rec_id,rating` CSV. The header row is required.
pub fn parse_ratings_csv(text: &str) -> Result<Vec<RatingRecord>, IoError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| IoError::parse(1, e))?.clone();
    if headers.len() != 2 || &headers[0] != "rec_id" || &headers[1] != "rating" {
        return Err(IoError::parse(1, "expected header rec_id,rating"));
    }
    let mut out = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            IoError::parse(line, e)
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 2 {
            return Err(IoError::parse(line, "expected 2 fields"));
        }
        let rec_id = record[0].to_string();
        if rec_id.is_empty() {
            return Err(IoError::parse(line, "empty rec_id"));
        }
        let rating: f64 = record[1].parse().map_err(|_| IoError::parse(line, format!("bad rating {:?}", &record[1])))?;
        if !(0.0..=10.0).contains(&rating) {
            return Err(IoError::RangeError { line, msg: format!("rating {rating} outside [0, 10]") });
        }
        out.push(RatingRecord { rec_id, rating });
    }
    Ok(out)
}

pub fn write_ratings_csv(records: &[RatingRecord]) -> String {
    let mut out = String::from("rec_id,rating\n");
    for r in records {
        out.push_str(&format!("{},{}\n", r.rec_id, r.rating));
    }
    out
}

use super::IoError;
use crate::detect::{Feature, SuspicionRegion};

pub const REGIONS_CSV_HEADER: &str = "rec_id,feature,start_s,end_s,peak_score";

/// Writes regions as CSV. Floats use the shortest round-trip representation.
pub fn write_regions_csv(regions: &[SuspicionRegion]) -> String {
    let mut out = String::from(REGIONS_CSV_HEADER);
    out.push('\n');
    for r in regions {
        out.push_str(&format!("{},{},{},{},{}\n", r.rec_id, r.feature, r.start_s, r.end_s, r.peak_score));
    }
    out
}

pub fn parse_regions_csv(text: &str) -> Result<Vec<SuspicionRegion>, IoError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| IoError::parse(1, e))?;
    if headers.iter().collect::<Vec<_>>().join(",") != REGIONS_CSV_HEADER {
        return Err(IoError::parse(1, format!("expected header {REGIONS_CSV_HEADER}")));
    }
    let mut out = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| IoError::parse(e.position().map_or(0, |p| p.line() as usize), e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 5 {
            return Err(IoError::parse(line, "expected 5 fields"));
        }
        let feature: Feature = record[1].parse().map_err(|e| IoError::parse(line, e))?;
        let num = |i: usize| -> Result<f64, IoError> {
            let v: f64 = record[i].parse().map_err(|_| IoError::parse(line, format!("bad number {:?}", &record[i])))?;
            Ok(v)
        };
        let (start_s, end_s) = (num(2)?, num(3)?);
        if !(start_s.is_finite() && end_s.is_finite() && start_s >= 0.0 && end_s >= start_s) {
            return Err(IoError::RangeError { line, msg: format!("bad interval [{start_s}, {end_s}]") });
        }
        out.push(SuspicionRegion { rec_id: record[0].to_string(), feature, start_s, end_s, peak_score: num(4)? });
    }
    Ok(out)
}

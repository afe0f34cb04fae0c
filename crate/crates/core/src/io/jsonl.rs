use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::IoError;
use crate::alignment::{validate_alignment, PhoneInstance, RecordingAlignment};

#[derive(Debug, Serialize, Deserialize)]
struct PhoneLine {
    rec_id: String,
    phone: String,
    start_s: f64,
    end_s: f64,
    log_prob: f64,
    #[serde(default)]
    word_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    word: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct HeaderLine {
    rec_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    total_duration_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    word_count: Option<usize>,
}

#[derive(Default)]
struct Pending {
    phones: Vec<PhoneInstance>,
    total_duration_s: Option<f64>,
    word_count: Option<usize>,
}

/// Parses a JSON-Lines alignment stream.
///
/// Lines with a `phone` field are phones. Other lines are per-recording
/// headers that may set `total_duration_s` and `word_count`. Blank lines are
/// skipped. Line numbers in errors are 1-based.
pub fn parse_alignment_records(text: &str) -> Result<BTreeMap<String, RecordingAlignment>, IoError> {
    let mut pending: BTreeMap<String, Pending> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(trimmed).map_err(|e| IoError::parse(line, e))?;
        if !value.is_object() {
            return Err(IoError::parse(line, "expected a JSON object"));
        }
        if value.get("phone").is_some() {
            let p: PhoneLine = serde_json::from_value(value).map_err(|e| IoError::parse(line, e))?;
            let mut phone = PhoneInstance::new(p.phone, p.start_s, p.end_s, p.log_prob, p.word_index);
            phone.word = p.word;
            pending.entry(p.rec_id).or_default().phones.push(phone);
        } else {
            let h: HeaderLine = serde_json::from_value(value).map_err(|e| IoError::parse(line, e))?;
            if h.total_duration_s.is_some_and(|t| !(t.is_finite() && t >= 0.0)) {
                return Err(IoError::RangeError { line, msg: "total_duration_s must be finite and >= 0".into() });
            }
            let entry = pending.entry(h.rec_id).or_default();
            if h.total_duration_s.is_some() {
                entry.total_duration_s = h.total_duration_s;
            }
            if h.word_count.is_some() {
                entry.word_count = h.word_count;
            }
        }
    }

    let mut out = BTreeMap::new();
    for (rec_id, p) in pending {
        let rec = validate_alignment(rec_id.clone(), p.phones, p.total_duration_s)
            .map_err(|source| IoError::Validation { rec_id: rec_id.clone(), source })?;
        let rec = match p.word_count {
            Some(n) => rec.with_word_count(n),
            None => rec,
        };
        out.insert(rec_id, rec);
    }
    Ok(out)
}

/// Serializes recordings as JSON-Lines: one header line per recording
/// followed by its phones. Parsing the output reproduces the input exactly.
pub fn write_alignment_records<'a>(recs: impl IntoIterator<Item = &'a RecordingAlignment>) -> String {
    let mut out = String::new();
    for rec in recs {
        let header = HeaderLine {
            rec_id: rec.rec_id.clone(),
            total_duration_s: Some(rec.total_duration_s()),
            word_count: Some(rec.word_count()),
        };
        out.push_str(&serde_json::to_string(&header).expect("header serializes"));
        out.push('\n');
        for p in rec.phones() {
            let line = PhoneLine {
                rec_id: rec.rec_id.clone(),
                phone: p.label.clone(),
                start_s: p.start_s,
                end_s: p.end_s,
                log_prob: p.log_prob,
                word_index: p.word_index,
                word: p.word.clone(),
            };
            out.push_str(&serde_json::to_string(&line).expect("phone serializes"));
            out.push('\n');
        }
    }
    out
}

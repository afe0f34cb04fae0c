use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ErrorKind, ErrorSpan};
use crate::detect::{Feature, SuspicionRegion};
use crate::io::IoError;

pub const TRUTH_CSV_HEADER: &str = "rec_id,kind,start_s,end_s";

/// Features designed to catch each error kind.
pub fn targets(kind: ErrorKind) -> &'static [Feature] {
    match kind {
        ErrorKind::Bunching => &[Feature::Short],
        ErrorKind::LogpDip => &[Feature::Unexpected],
        ErrorKind::Stretch => &[Feature::Badlength, Feature::Long],
        ErrorKind::QuietGap => &[Feature::Quiet],
        ErrorKind::LoudBurst => &[Feature::Loud],
        ErrorKind::SilenceSwap | ErrorKind::BoundaryDrift => &[],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEval {
    pub n_regions: usize,
    /// Regions overlapping some truth span of the same recording.
    pub n_true_regions: usize,
    pub n_targets: usize,
    pub n_recalled: usize,
    /// Absent when the feature produced no regions.
    pub precision: Option<f64>,
    /// Absent when no truth span targets the feature.
    pub recall: Option<f64>,
}

fn iou(a: (f64, f64), b: (f64, f64)) -> f64 {
    let inter = (a.1.min(b.1) - a.0.max(b.0)).max(0.0);
    let union = a.1.max(b.1) - a.0.min(b.0);
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

fn overlaps(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 < b.1 && b.0 < a.1
}

/// Precision and recall of every feature against injected errors.
///
/// A truth span is recalled by a feature it targets when some region of that
/// feature in the same recording has IoU of at least `match_iou` with it.
pub fn evaluate_detectors(regions: &[SuspicionRegion], truth: &[ErrorSpan], match_iou: f64) -> BTreeMap<Feature, FeatureEval> {
    let mut out = BTreeMap::new();
    for f in Feature::ALL {
        let mine: Vec<&SuspicionRegion> = regions.iter().filter(|r| r.feature == f).collect();
        let n_true_regions = mine
            .iter()
            .filter(|r| truth.iter().any(|t| t.rec_id == r.rec_id && overlaps((r.start_s, r.end_s), (t.start_s, t.end_s))))
            .count();
        let targeted: Vec<&ErrorSpan> = truth.iter().filter(|t| targets(t.kind).contains(&f)).collect();
        let n_recalled = targeted
            .iter()
            .filter(|t| {
                mine.iter().any(|r| r.rec_id == t.rec_id && iou((r.start_s, r.end_s), (t.start_s, t.end_s)) >= match_iou)
            })
            .count();
        out.insert(
            f,
            FeatureEval {
                n_regions: mine.len(),
                n_true_regions,
                n_targets: targeted.len(),
                n_recalled,
                precision: (!mine.is_empty()).then(|| n_true_regions as f64 / mine.len() as f64),
                recall: (!targeted.is_empty()).then(|| n_recalled as f64 / targeted.len() as f64),
            },
        );
    }
    out
}

pub fn write_truth_csv(truth: &[ErrorSpan]) -> String {
    let mut out = format!("{TRUTH_CSV_HEADER}\n");
    for t in truth {
        out.push_str(&format!("{},{},{},{}\n", t.rec_id, t.kind, t.start_s, t.end_s));
    }
    out
}

pub fn parse_truth_csv(text: &str) -> Result<Vec<ErrorSpan>, IoError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRUTH_CSV_HEADER => {}
        _ => return Err(IoError::ParseError { line: 1, msg: format!("expected header {TRUTH_CSV_HEADER}") }),
    }
    let mut out = Vec::new();
    for (i, raw) in lines {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        let err = |msg: String| IoError::ParseError { line, msg };
        if fields.len() != 4 {
            return Err(err("expected 4 fields".into()));
        }
        let kind = fields[1].parse().map_err(err)?;
        let num = |s: &str| s.parse::<f64>().map_err(|_| IoError::ParseError { line, msg: format!("bad number {s:?}") });
        out.push(ErrorSpan { rec_id: fields[0].to_string(), kind, start_s: num(fields[2])?, end_s: num(fields[3])? });
    }
    Ok(out)
}

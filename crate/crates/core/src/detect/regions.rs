use serde::{Deserialize, Serialize};

use super::{Feature, SuspicionRegion};
use crate::alignment::OVERLAP_TOLERANCE_S;

/// Which side of the threshold is suspicious.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Flag scores strictly below the threshold.
    Below,
    /// Flag scores strictly above the threshold.
    Above,
}

impl Direction {
    pub fn flags(self, score: f64, threshold: f64) -> bool {
        match self {
            Direction::Below => score < threshold,
            Direction::Above => score > threshold,
        }
    }

    pub fn peak_mode(self) -> PeakMode {
        match self {
            Direction::Below => PeakMode::Min,
            Direction::Above => PeakMode::Max,
        }
    }

    /// Threshold that flags nothing.
    pub fn never(self) -> f64 {
        match self {
            Direction::Below => f64::NEG_INFINITY,
            Direction::Above => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeakMode {
    Min,
    Max,
}

impl PeakMode {
    fn pick(self, a: f64, b: f64) -> f64 {
        match self {
            PeakMode::Min => a.min(b),
            PeakMode::Max => a.max(b),
        }
    }
}

/// How flagged items join into regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunMerge {
    /// Consecutive flagged items join; unscored items in between are skipped
    /// over, a scored unflagged item ends the run.
    Consecutive,
    /// Flagged items join only when their intervals touch or overlap.
    Touching,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub start_s: f64,
    pub end_s: f64,
    pub score: Option<f64>,
}

/// Per-item scores of one feature on one recording, ready for thresholding.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTrack {
    pub rec_id: String,
    pub feature: Feature,
    pub duration_s: f64,
    pub items: Vec<ScoredItem>,
    pub direction: Direction,
    pub merge: RunMerge,
}

impl ScoreTrack {
    pub fn regions(&self, threshold: f64) -> Vec<SuspicionRegion> {
        let flagged: Vec<Option<bool>> = self
            .items
            .iter()
            .map(|it| it.score.map(|s| self.direction.flags(s, threshold)))
            .collect();
        match self.merge {
            RunMerge::Consecutive => {
                extract_regions(&self.rec_id, self.feature, &self.items, &flagged, self.direction.peak_mode())
            }
            RunMerge::Touching => {
                let intervals = self
                    .items
                    .iter()
                    .zip(&flagged)
                    .filter(|(_, f)| **f == Some(true))
                    .map(|(it, _)| (it.start_s, it.end_s, it.score.unwrap()))
                    .collect();
                merge_intervals(&self.rec_id, self.feature, intervals, self.direction.peak_mode())
            }
        }
    }

    pub fn count(&self, threshold: f64) -> usize {
        self.regions(threshold).len()
    }

    /// Flagged items at `threshold`, as a mask over `items`.
    pub fn flagged(&self, threshold: f64) -> Vec<bool> {
        self.items
            .iter()
            .map(|it| it.score.is_some_and(|s| self.direction.flags(s, threshold)))
            .collect()
    }
}

/// Joins maximal runs of flagged items into regions.
///
/// `flags[i]` is `None` for unscored items, which neither start, end nor break
/// a run. Zero-length regions are dropped.
pub fn extract_regions(
    rec_id: &str,
    feature: Feature,
    items: &[ScoredItem],
    flags: &[Option<bool>],
    peak: PeakMode,
) -> Vec<SuspicionRegion> {
    assert_eq!(items.len(), flags.len());
    let mut out = Vec::new();
    let mut open: Option<SuspicionRegion> = None;
    for (it, flag) in items.iter().zip(flags) {
        match flag {
            None => {}
            Some(true) => {
                let score = it.score.unwrap_or(f64::NAN);
                match open.as_mut() {
                    Some(r) => {
                        r.end_s = r.end_s.max(it.end_s);
                        r.peak_score = peak.pick(r.peak_score, score);
                    }
                    None => {
                        open = Some(SuspicionRegion {
                            rec_id: rec_id.to_string(),
                            feature,
                            start_s: it.start_s,
                            end_s: it.end_s,
                            peak_score: score,
                        })
                    }
                }
            }
            Some(false) => out.extend(open.take()),
        }
    }
    out.extend(open);
    out.retain(|r| r.end_s > r.start_s);
    out
}

/// Merges `(start, end, peak)` intervals that overlap or touch (within 1 ms).
pub fn merge_intervals(
    rec_id: &str,
    feature: Feature,
    mut intervals: Vec<(f64, f64, f64)>,
    peak: PeakMode,
) -> Vec<SuspicionRegion> {
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<SuspicionRegion> = Vec::new();
    for (s, e, score) in intervals {
        match out.last_mut() {
            Some(r) if s <= r.end_s + OVERLAP_TOLERANCE_S => {
                r.end_s = r.end_s.max(e);
                r.peak_score = peak.pick(r.peak_score, score);
            }
            _ => out.push(SuspicionRegion { rec_id: rec_id.to_string(), feature, start_s: s, end_s: e, peak_score: score }),
        }
    }
    out.retain(|r| r.end_s > r.start_s);
    out
}

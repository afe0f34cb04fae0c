//! The seven suspicion features and the detectors that produce them.
//!
//! Label-only detectors (`unexpected`, `improbable`, `short`, `long`,
//! `badlength`) work from the alignment and, where needed, a corpus model.
//! `loud` and `quiet` also need the recording's audio.
//!
//! Threshold-based detectors first compute a [`ScoreTrack`]: one optional
//! score per phone or word. Thresholding a track is cheap, which is what
//! [`calibrate_threshold`] relies on.

mod amplitude;
mod calibrate;
mod regions;

pub use amplitude::detect_amplitude;
pub use calibrate::{calibrate_threshold, Calibration};
pub use regions::{extract_regions, merge_intervals, Direction, PeakMode, RunMerge, ScoreTrack, ScoredItem};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::RecordingAlignment;
use crate::model::CorpusModel;
use crate::stats::smooth_time_weighted;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectError {
    #[error("audio lasts {audio_s:.3} s but the alignment covers {alignment_s:.3} s")]
    DurationMismatch { audio_s: f64, alignment_s: f64 },
    #[error("invalid detector configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    Unexpected,
    Improbable,
    Loud,
    Quiet,
    Short,
    Long,
    Badlength,
}

impl Feature {
    pub const ALL: [Feature; 7] = [
        Feature::Unexpected,
        Feature::Improbable,
        Feature::Loud,
        Feature::Quiet,
        Feature::Short,
        Feature::Long,
        Feature::Badlength,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Unexpected => "unexpected",
            Feature::Improbable => "improbable",
            Feature::Loud => "loud",
            Feature::Quiet => "quiet",
            Feature::Short => "short",
            Feature::Long => "long",
            Feature::Badlength => "badlength",
        }
    }

    pub fn needs_audio(self) -> bool {
        matches!(self, Feature::Loud | Feature::Quiet)
    }

    pub fn needs_model(self) -> bool {
        matches!(self, Feature::Unexpected | Feature::Badlength)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown feature {s:?}"))
    }
}

/// A time interval flagged by one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuspicionRegion {
    pub rec_id: String,
    pub feature: Feature,
    pub start_s: f64,
    pub end_s: f64,
    /// Most extreme statistic inside the region (units depend on the feature).
    pub peak_score: f64,
}

impl SuspicionRegion {
    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// How the duration-mismatch score compares a phone with its prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MismatchForm {
    /// `|ln δ - d| / m`
    #[default]
    Log,
    /// `|δ - d| / m`, mixing seconds with a log-domain prediction.
    Raw,
}

/// Thresholds and windows for every detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Smoothed `L/δ - prediction` below this flags `unexpected`.
    pub logp_threshold: f64,
    /// Word log-probability per second below this flags `improbable`.
    pub word_logp_threshold: f64,
    pub quiet_pct: f64,
    pub loud_pct: f64,
    pub min_extreme_run_s: f64,
    /// Mean phone duration at or below this flags `short`.
    pub word_mean_min_s: f64,
    /// Mean phone duration at or above this flags `long`.
    pub word_mean_max_s: f64,
    /// Smoothed mismatch score above this flags `badlength`.
    pub badlength_threshold: f64,
    pub smoothing_window_s: f64,
    pub min_word_phones: usize,
    pub mismatch_form: MismatchForm,
    /// Score silence phones in `unexpected` and `badlength` too.
    pub score_silence: bool,
}

// The three score thresholds depend on the aligner's scoring. These sit in the
// quiet stretch between planted errors and background noise on the default
// synthetic corpus; recalibrate (`calibrate_threshold`) for real aligners,
// whose log-probability scales differ.
impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            logp_threshold: -10.0,
            word_logp_threshold: -90.0,
            quiet_pct: 3.0,
            loud_pct: 97.0,
            min_extreme_run_s: 0.25,
            word_mean_min_s: 1.0 / 32.0,
            word_mean_max_s: 1.0 / 8.0,
            badlength_threshold: 5.0,
            smoothing_window_s: 1.0,
            min_word_phones: 4,
            mismatch_form: MismatchForm::Log,
            score_silence: false,
        }
    }
}

/// Cap for mismatch scores of classes with zero spread.
pub const MISMATCH_CAP: f64 = 1e6;

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        let bad = |msg: &str| Err(DetectError::InvalidConfig(msg.to_string()));
        if !(self.min_extreme_run_s > 0.0 && self.smoothing_window_s > 0.0 && self.word_mean_min_s > 0.0) {
            return bad("durations must be positive");
        }
        if !(self.quiet_pct < self.loud_pct && self.quiet_pct >= 0.0 && self.loud_pct <= 100.0) {
            return bad("need 0 <= quiet_pct < loud_pct <= 100");
        }
        if self.word_mean_min_s >= self.word_mean_max_s {
            return bad("word_mean_min_s must be below word_mean_max_s");
        }
        if self.min_word_phones == 0 {
            return bad("min_word_phones must be at least 1");
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, DetectError> {
        let cfg: Self = toml::from_str(text).map_err(|e| DetectError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn threshold(&self, feature: Feature) -> Option<f64> {
        match feature {
            Feature::Unexpected => Some(self.logp_threshold),
            Feature::Improbable => Some(self.word_logp_threshold),
            Feature::Badlength => Some(self.badlength_threshold),
            _ => None,
        }
    }

    pub fn set_threshold(&mut self, feature: Feature, value: f64) -> bool {
        match feature {
            Feature::Unexpected => self.logp_threshold = value,
            Feature::Improbable => self.word_logp_threshold = value,
            Feature::Badlength => self.badlength_threshold = value,
            _ => return false,
        }
        true
    }
}

fn scores_phone(rec: &RecordingAlignment, i: usize, model: &CorpusModel, cfg: &DetectorConfig) -> bool {
    let p = &rec.phones()[i];
    (cfg.score_silence || !p.is_silence()) && model.config.is_scorable(p.duration())
}

fn phone_track(
    rec: &RecordingAlignment,
    feature: Feature,
    raw: Vec<Option<f64>>,
    cfg: &DetectorConfig,
    direction: Direction,
) -> ScoreTrack {
    let spans = rec.spans();
    let smoothed = smooth_time_weighted(&spans, &raw, cfg.smoothing_window_s);
    ScoreTrack {
        rec_id: rec.rec_id.clone(),
        feature,
        duration_s: rec.total_duration_s(),
        items: spans.into_iter().zip(smoothed).map(|((s, e), score)| ScoredItem { start_s: s, end_s: e, score }).collect(),
        direction,
        merge: RunMerge::Consecutive,
    }
}

/// Smoothed difference between each phone's `L/δ` and the model's prediction.
pub fn unexpected_track(rec: &RecordingAlignment, model: &CorpusModel, cfg: &DetectorConfig) -> ScoreTrack {
    let raw = (0..rec.phones().len())
        .map(|i| {
            if !scores_phone(rec, i, model, cfg) {
                return None;
            }
            let p = &rec.phones()[i];
            model.predict_logp_rate(rec, i).ok().map(|pred| p.log_prob / p.duration() - pred)
        })
        .collect();
    phone_track(rec, Feature::Unexpected, raw, cfg, Direction::Below)
}

/// Phones whose log-probability rate is persistently below the corpus
/// prediction.
pub fn detect_unexpected(rec: &RecordingAlignment, model: &CorpusModel, cfg: &DetectorConfig) -> Vec<SuspicionRegion> {
    unexpected_track(rec, model, cfg).regions(cfg.logp_threshold)
}

/// Log-probability per second of every word with enough phones.
pub fn improbable_track(rec: &RecordingAlignment, cfg: &DetectorConfig) -> ScoreTrack {
    let phones = rec.phones();
    let items = rec
        .words()
        .iter()
        .map(|w| {
            let score = (w.phone_count() >= cfg.min_word_phones && w.duration() > 0.0).then(|| {
                let total: f64 = phones[w.phone_range()].iter().map(|p| p.log_prob).sum();
                total / w.duration()
            });
            ScoredItem { start_s: w.start_s, end_s: w.end_s, score }
        })
        .collect();
    ScoreTrack {
        rec_id: rec.rec_id.clone(),
        feature: Feature::Improbable,
        duration_s: rec.total_duration_s(),
        items,
        direction: Direction::Below,
        merge: RunMerge::Touching,
    }
}

/// Words whose summed log-probability per second falls below a fixed floor.
pub fn detect_improbable(rec: &RecordingAlignment, cfg: &DetectorConfig) -> Vec<SuspicionRegion> {
    improbable_track(rec, cfg).regions(cfg.word_logp_threshold)
}

/// Words whose mean phone duration is implausibly short or long.
pub fn detect_word_duration(rec: &RecordingAlignment, cfg: &DetectorConfig) -> Vec<SuspicionRegion> {
    let mut short = Vec::new();
    let mut long = Vec::new();
    for w in rec.words() {
        if w.phone_count() < cfg.min_word_phones {
            continue;
        }
        let mean = w.duration() / w.phone_count() as f64;
        if mean <= cfg.word_mean_min_s {
            short.push((w.start_s, w.end_s, mean));
        } else if mean >= cfg.word_mean_max_s {
            long.push((w.start_s, w.end_s, mean));
        }
    }
    let mut out = merge_intervals(&rec.rec_id, Feature::Short, short, PeakMode::Min);
    out.extend(merge_intervals(&rec.rec_id, Feature::Long, long, PeakMode::Max));
    out
}

/// Smoothed duration-mismatch score of each phone.
pub fn badlength_track(rec: &RecordingAlignment, model: &CorpusModel, cfg: &DetectorConfig) -> ScoreTrack {
    let raw = (0..rec.phones().len())
        .map(|i| {
            if !scores_phone(rec, i, model, cfg) {
                return None;
            }
            let p = &rec.phones()[i];
            let predicted = model.predict_log_duration(rec, i).ok()?;
            let deviation = match cfg.mismatch_form {
                MismatchForm::Log => (p.duration().ln() - predicted).abs(),
                MismatchForm::Raw => (p.duration() - predicted).abs(),
            };
            let spread = model.stats.get(&p.label).log_duration_mad;
            Some(if spread > 0.0 {
                (deviation / spread).min(MISMATCH_CAP)
            } else if deviation == 0.0 {
                0.0
            } else {
                MISMATCH_CAP
            })
        })
        .collect();
    phone_track(rec, Feature::Badlength, raw, cfg, Direction::Above)
}

/// Phones whose durations stray far from the duration model.
pub fn detect_duration_mismatch(
    rec: &RecordingAlignment,
    model: &CorpusModel,
    cfg: &DetectorConfig,
) -> Vec<SuspicionRegion> {
    badlength_track(rec, model, cfg).regions(cfg.badlength_threshold)
}

/// Threshold-based track for `feature`, if it has one.
pub fn score_track(
    feature: Feature,
    rec: &RecordingAlignment,
    model: Option<&CorpusModel>,
    cfg: &DetectorConfig,
) -> Option<ScoreTrack> {
    match (feature, model) {
        (Feature::Unexpected, Some(m)) => Some(unexpected_track(rec, m, cfg)),
        (Feature::Badlength, Some(m)) => Some(badlength_track(rec, m, cfg)),
        (Feature::Improbable, _) => Some(improbable_track(rec, cfg)),
        _ => None,
    }
}

/// Runs every detector whose inputs are available. Regions come back grouped
/// by feature in [`Feature::ALL`] order, each group sorted by time.
pub fn detect_all(
    rec: &RecordingAlignment,
    model: Option<&CorpusModel>,
    audio: Option<&crate::io::AudioTrack>,
    cfg: &DetectorConfig,
) -> Result<Vec<SuspicionRegion>, DetectError> {
    let mut out = Vec::new();
    if let Some(m) = model {
        out.extend(detect_unexpected(rec, m, cfg));
        out.extend(detect_duration_mismatch(rec, m, cfg));
    }
    out.extend(detect_improbable(rec, cfg));
    out.extend(detect_word_duration(rec, cfg));
    if let Some(a) = audio {
        out.extend(detect_amplitude(rec, a, cfg)?);
    }
    out.sort_by(|a, b| a.feature.cmp(&b.feature).then(a.start_s.total_cmp(&b.start_s)));
    Ok(out)
}

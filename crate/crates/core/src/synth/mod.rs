//! Synthetic aligned corpora with known, injected alignment errors.
//!
//! A clean recording alternates words (runs of phones with log-normal
//! durations about their class medians) with pauses. Log-probabilities follow
//! `L = (rate + noise) * δ`. Audio is amplitude-modulated noise: louder under
//! speech labels, near the noise floor under silences.

mod eval;
mod inject;

pub use eval::{evaluate_detectors, parse_truth_csv, targets, write_truth_csv, FeatureEval, TRUTH_CSV_HEADER};
pub use inject::{
    bunch_word, dip_logp, drift_boundaries, inject_errors, inject_recording, loud_burst, quiet_gap, stretch_word,
    swap_silence, word_runs,
};

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{validate_alignment, PhoneInstance, RecordingAlignment};
use crate::io::AudioTrack;

/// Shortest phone the generator emits, as with a three-state 10 ms HMM.
pub const MIN_PHONE_S: f64 = 0.03;
pub const SILENCE_LABEL: &str = "sil";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// A word squeezed to minimum-length phones, the rest of its time given
    /// to the following silence.
    Bunching,
    /// A pause and the word after it trade places.
    SilenceSwap,
    /// A run of boundaries all displaced by the same offset.
    BoundaryDrift,
    /// Log-probabilities lowered over a stretch of speech.
    LogpDip,
    /// Audio dropped far below the noise floor inside speech.
    QuietGap,
    /// A loud noise burst inside a pause.
    LoudBurst,
    /// A word's phones made eight times longer, eating into the pause after.
    Stretch,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 7] = [
        ErrorKind::Bunching,
        ErrorKind::SilenceSwap,
        ErrorKind::BoundaryDrift,
        ErrorKind::LogpDip,
        ErrorKind::QuietGap,
        ErrorKind::LoudBurst,
        ErrorKind::Stretch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::Bunching => "bunching",
            ErrorKind::SilenceSwap => "silence_swap",
            ErrorKind::BoundaryDrift => "boundary_drift",
            ErrorKind::LogpDip => "logp_dip",
            ErrorKind::QuietGap => "quiet_gap",
            ErrorKind::LoudBurst => "loud_burst",
            ErrorKind::Stretch => "stretch",
        }
    }

    pub fn is_audio_only(self) -> bool {
        matches!(self, ErrorKind::QuietGap | ErrorKind::LoudBurst)
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ErrorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ErrorKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown error kind {s:?}"))
    }
}

/// Ground truth for one injected error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSpan {
    pub rec_id: String,
    pub kind: ErrorKind,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhoneClassSpec {
    pub label: String,
    pub median_duration_s: f64,
    /// Mean log-probability per second.
    pub log_prob_rate: f64,
}

/// Errors per hour of audio, by kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorRates {
    pub bunching: f64,
    pub silence_swap: f64,
    pub boundary_drift: f64,
    pub logp_dip: f64,
    pub quiet_gap: f64,
    pub loud_burst: f64,
    pub stretch: f64,
}

impl Default for ErrorRates {
    fn default() -> Self {
        Self {
            bunching: 12.0,
            silence_swap: 6.0,
            boundary_drift: 6.0,
            logp_dip: 12.0,
            quiet_gap: 12.0,
            loud_burst: 12.0,
            stretch: 12.0,
        }
    }
}

impl ErrorRates {
    pub fn none() -> Self {
        Self {
            bunching: 0.0,
            silence_swap: 0.0,
            boundary_drift: 0.0,
            logp_dip: 0.0,
            quiet_gap: 0.0,
            loud_burst: 0.0,
            stretch: 0.0,
        }
    }

    pub fn get(&self, kind: ErrorKind) -> f64 {
        match kind {
            ErrorKind::Bunching => self.bunching,
            ErrorKind::SilenceSwap => self.silence_swap,
            ErrorKind::BoundaryDrift => self.boundary_drift,
            ErrorKind::LogpDip => self.logp_dip,
            ErrorKind::QuietGap => self.quiet_gap,
            ErrorKind::LoudBurst => self.loud_burst,
            ErrorKind::Stretch => self.stretch,
        }
    }

    pub fn set(&mut self, kind: ErrorKind, rate: f64) {
        let slot = match kind {
            ErrorKind::Bunching => &mut self.bunching,
            ErrorKind::SilenceSwap => &mut self.silence_swap,
            ErrorKind::BoundaryDrift => &mut self.boundary_drift,
            ErrorKind::LogpDip => &mut self.logp_dip,
            ErrorKind::QuietGap => &mut self.quiet_gap,
            ErrorKind::LoudBurst => &mut self.loud_burst,
            ErrorKind::Stretch => &mut self.stretch,
        };
        *slot = rate;
    }

    /// Only `kind`, at `rate` per hour.
    pub fn only(kind: ErrorKind, rate: f64) -> Self {
        let mut r = Self::none();
        r.set(kind, rate);
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_recordings: usize,
    pub duration_s: f64,
    pub seed: u64,
    pub phones: Vec<PhoneClassSpec>,
    /// Standard deviation of `ln δ` about the class median.
    pub duration_sigma: f64,
    /// Standard deviation of the per-phone log-probability rate noise.
    pub rate_noise_sd: f64,
    pub silence_log_prob_rate: f64,
    pub min_word_phones: usize,
    pub max_word_phones: usize,
    /// Chance of a pause after each word.
    pub pause_prob: f64,
    /// Pause length range (log-uniform).
    pub pause_s: [f64; 2],
    /// Chance that a pause is a long one.
    pub long_pause_prob: f64,
    pub long_pause_s: [f64; 2],
    pub with_audio: bool,
    pub sample_rate_hz: u32,
    pub speech_rms: f64,
    pub silence_rms: f64,
    pub errors: ErrorRates,
    pub logp_dip_rate: f64,
    pub logp_dip_s: f64,
    /// Loud bursts sit this far above the silence level.
    pub loud_burst_db: f64,
    pub loud_burst_s: f64,
    pub quiet_gap_s: [f64; 2],
    pub stretch_factor: f64,
    /// Minimum gap between injected errors in one recording.
    pub error_spacing_s: f64,
    /// Per-recording error rates are scaled by `exp(u)`, `u` uniform in
    /// `[-quality_spread, quality_spread]`, so recordings differ in quality.
    pub quality_spread: f64,
}

/// The default inventory: twenty classes with medians from 50 to 85 ms.
pub fn default_inventory() -> Vec<PhoneClassSpec> {
    const LABELS: [&str; 20] =
        ["aa", "ae", "ah", "ao", "eh", "ih", "iy", "uw", "b", "d", "g", "k", "p", "t", "m", "n", "s", "z", "f", "l"];
    LABELS
        .iter()
        .enumerate()
        .map(|(i, l)| PhoneClassSpec {
            label: (*l).to_string(),
            median_duration_s: 0.05 + 0.035 * ((i * 7) % 20) as f64 / 19.0,
            log_prob_rate: -65.0 - 20.0 * ((i * 13) % 20) as f64 / 19.0,
        })
        .collect()
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_recordings: 10,
            duration_s: 600.0,
            seed: 1,
            phones: default_inventory(),
            duration_sigma: 0.2,
            rate_noise_sd: 3.0,
            silence_log_prob_rate: -50.0,
            min_word_phones: 2,
            max_word_phones: 6,
            pause_prob: 0.3,
            pause_s: [0.15, 1.2],
            long_pause_prob: 0.08,
            long_pause_s: [2.0, 4.5],
            with_audio: true,
            sample_rate_hz: 8000,
            speech_rms: 0.02,
            silence_rms: 0.0015,
            errors: ErrorRates::default(),
            logp_dip_rate: 20.0,
            logp_dip_s: 2.0,
            loud_burst_db: 30.0,
            loud_burst_s: 0.5,
            quiet_gap_s: [0.3, 0.45],
            stretch_factor: 8.0,
            error_spacing_s: 3.0,
            quality_spread: 0.7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.to_string()));
        if self.phones.is_empty() {
            return bad("phone inventory is empty");
        }
        if self.phones.iter().any(|p| !(p.median_duration_s > 0.0 && p.log_prob_rate.is_finite()) || p.label == SILENCE_LABEL) {
            return bad("phone classes need positive medians, finite rates and a label other than sil");
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad("duration_s must be positive");
        }
        if self.min_word_phones == 0 || self.min_word_phones > self.max_word_phones {
            return bad("need 1 <= min_word_phones <= max_word_phones");
        }
        if !(0.0..=1.0).contains(&self.pause_prob) || !(0.0..=1.0).contains(&self.long_pause_prob) {
            return bad("probabilities must lie in [0, 1]");
        }
        let range_ok = |r: [f64; 2]| r[0] > 0.0 && r[0] <= r[1];
        if !range_ok(self.pause_s) || !range_ok(self.long_pause_s) || !range_ok(self.quiet_gap_s) {
            return bad("ranges need 0 < low <= high");
        }
        if self.duration_sigma < 0.0 || self.rate_noise_sd < 0.0 {
            return bad("noise levels must be non-negative");
        }
        if self.sample_rate_hz < 400 {
            return bad("sample_rate_hz must be at least 400");
        }
        if ErrorKind::ALL.iter().any(|&k| !(self.errors.get(k) >= 0.0)) {
            return bad("error rates must be non-negative");
        }
        if !(self.quality_spread >= 0.0 && self.quality_spread <= 5.0) {
            return bad("quality_spread must lie in [0, 5]");
        }
        if !(self.stretch_factor > 1.0 && self.loud_burst_s > 0.0 && self.logp_dip_s > 0.0) {
            return bad("stretch_factor must exceed 1 and span lengths must be positive");
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SynthError> {
        let spec: Self = toml::from_str(text).map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn rec_id(&self, index: usize) -> String {
        format!("synth{index:03}")
    }

    /// Number of errors of `kind` injected into each recording when
    /// `quality_spread` is zero.
    pub fn errors_per_recording(&self, kind: ErrorKind) -> usize {
        (self.errors.get(kind) * self.duration_s / 3600.0).round() as usize
    }

    /// Error-rate multiplier of recording `index`.
    pub fn quality_factor(&self, index: usize) -> f64 {
        if self.quality_spread == 0.0 {
            return 1.0;
        }
        let u: f64 = rng_for(self.seed, index, 3).random_range(-1.0..=1.0);
        (u * self.quality_spread).exp()
    }

    /// Number of errors of `kind` aimed at recording `index`.
    pub fn errors_in_recording(&self, kind: ErrorKind, index: usize) -> usize {
        (self.errors.get(kind) * self.quality_factor(index) * self.duration_s / 3600.0).round() as usize
    }
}

/// Stand-in listener rating on a 0-10 scale: 10 for a flawless recording,
/// falling by half a point per injected error per ten minutes.
pub fn synthetic_rating(n_errors: usize, duration_s: f64) -> f64 {
    if duration_s <= 0.0 {
        return 10.0;
    }
    (10.0 - 0.5 * n_errors as f64 * 600.0 / duration_s).clamp(0.0, 10.0)
}

/// One generated recording.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthRecording {
    pub alignment: RecordingAlignment,
    pub audio: Option<AudioTrack>,
}

/// Independent generator for `(seed, index, purpose)`.
pub(crate) fn rng_for(seed: u64, index: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((index as u64) << 8) | purpose);
    rng
}

fn log_uniform(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    if range[0] == range[1] {
        return range[0];
    }
    (range[0].ln() + rng.random::<f64>() * (range[1].ln() - range[0].ln())).exp()
}

/// Fills `samples[start..end)` with uniform noise of the given RMS.
pub(crate) fn fill_noise(samples: &mut [f32], rms: f64, rng: &mut ChaCha8Rng) {
    let amp = (rms * 3f64.sqrt()) as f32;
    for s in samples {
        *s = amp * (2.0 * rng.random::<f32>() - 1.0);
    }
}

pub(crate) fn sample_range(span: (f64, f64), sr: u32, len: usize) -> std::ops::Range<usize> {
    let a = ((span.0 * f64::from(sr)).round().max(0.0) as usize).min(len);
    let b = ((span.1 * f64::from(sr)).round().max(0.0) as usize).min(len);
    a..b.max(a)
}

/// Generates one clean recording.
pub fn generate_recording(spec: &SynthSpec, index: usize) -> SynthRecording {
    let mut rng = rng_for(spec.seed, index, 0);
    let rate_noise = Normal::new(0.0, spec.rate_noise_sd).expect("valid sd");
    let dur_noise = Normal::new(0.0, spec.duration_sigma).expect("valid sigma");
    let total = spec.duration_s;
    let mut phones: Vec<PhoneInstance> = Vec::new();
    let mut t = 0.0;

    let push_silence = |phones: &mut Vec<PhoneInstance>, t: &mut f64, d: f64, rng: &mut ChaCha8Rng| {
        let l = (spec.silence_log_prob_rate + rate_noise.sample(rng)) * d;
        phones.push(PhoneInstance::new(SILENCE_LABEL, *t, *t + d, l, None));
        *t += d;
    };
    let lead = log_uniform(&mut rng, spec.pause_s);
    push_silence(&mut phones, &mut t, lead.min(total), &mut rng);

    let mut word = 0usize;
    while t < total {
        let n = rng.random_range(spec.min_word_phones..=spec.max_word_phones);
        let mut planned = Vec::with_capacity(n);
        for _ in 0..n {
            let class = &spec.phones[rng.random_range(0..spec.phones.len())];
            let d = (class.median_duration_s * dur_noise.sample(&mut rng).exp()).max(MIN_PHONE_S);
            planned.push((class, d));
        }
        let word_len: f64 = planned.iter().map(|p| p.1).sum();
        if t + word_len > total {
            break;
        }
        let text = format!("w{word}");
        for (class, d) in planned {
            let l = (class.log_prob_rate + rate_noise.sample(&mut rng)) * d;
            phones.push(PhoneInstance::new(class.label.clone(), t, t + d, l, Some(word)).with_word(text.clone()));
            t += d;
        }
        word += 1;
        if rng.random::<f64>() < spec.pause_prob {
            let range = if rng.random::<f64>() < spec.long_pause_prob { spec.long_pause_s } else { spec.pause_s };
            let d = log_uniform(&mut rng, range).min(total - t);
            if d > 0.0 {
                push_silence(&mut phones, &mut t, d, &mut rng);
            }
        }
    }
    // close with silence up to the nominal length
    if total - t > 1e-9 {
        let d = total - t;
        let l = (spec.silence_log_prob_rate + rate_noise.sample(&mut rng)) * d;
        phones.push(PhoneInstance::new(SILENCE_LABEL, t, total, l, None));
    }
    let alignment = validate_alignment(spec.rec_id(index), phones, Some(total)).expect("generator emits valid alignments");
    let audio = spec.with_audio.then(|| synth_audio(spec, &alignment, index));
    SynthRecording { alignment, audio }
}

fn synth_audio(spec: &SynthSpec, rec: &RecordingAlignment, index: usize) -> AudioTrack {
    let mut rng = rng_for(spec.seed, index, 1);
    let sr = spec.sample_rate_hz;
    let n = (rec.total_duration_s() * f64::from(sr)).round() as usize;
    let mut samples = vec![0f32; n];
    for p in rec.phones() {
        let range = sample_range((p.start_s, p.end_s), sr, n);
        let rms = if p.is_silence() { spec.silence_rms } else { spec.speech_rms * rng.random_range(0.5..=1.0) };
        fill_noise(&mut samples[range], rms, &mut rng);
    }
    AudioTrack::from_samples(rec.rec_id.clone(), sr, samples)
}

/// Generates every clean recording of the spec, in index order.
pub fn generate_corpus(spec: &SynthSpec) -> Vec<SynthRecording> {
    (0..spec.n_recordings).map(|i| generate_recording(spec, i)).collect()
}

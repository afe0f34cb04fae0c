//! Aligned recordings: phones with HMM scores, and the words they group into.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack allowed between consecutive phones before they count as overlapping.
pub const OVERLAP_TOLERANCE_S: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlignmentError {
    #[error("phone {index} ({label}) ends at {end_s} before it starts at {start_s}")]
    NegativeDuration { index: usize, label: String, start_s: f64, end_s: f64 },
    #[error("phone {index} ({label}) has a negative or non-finite time or score")]
    InvalidValue { index: usize, label: String },
    #[error("phones {first} and {second} overlap by {overlap_s:.4} s")]
    OverlapError { first: usize, second: usize, overlap_s: f64 },
    #[error("word index {word_index} is not a single contiguous run of phones (phone {index})")]
    DanglingWordIndex { index: usize, word_index: usize },
    #[error("total duration {total_s} s is shorter than the last phone end {last_end_s} s")]
    DurationTooShort { total_s: f64, last_end_s: f64 },
}

/// One aligned phone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhoneInstance {
    pub label: String,
    pub start_s: f64,
    pub end_s: f64,
    /// Aligner log-probability for the whole phone.
    pub log_prob: f64,
    /// Parent word; `None` marks silence.
    pub word_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word: Option<String>,
}

impl PhoneInstance {
    pub fn new(label: impl Into<String>, start_s: f64, end_s: f64, log_prob: f64, word_index: Option<usize>) -> Self {
        Self { label: label.into(), start_s, end_s, log_prob, word_index, word: None }
    }

    pub fn silence(start_s: f64, end_s: f64, log_prob: f64) -> Self {
        Self::new("sil", start_s, end_s, log_prob, None)
    }

    pub fn with_word(mut self, word: impl Into<String>) -> Self {
        self.word = Some(word.into());
        self
    }

    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }

    pub fn is_silence(&self) -> bool {
        self.word_index.is_none()
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start_s + self.end_s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordInstance {
    pub label: String,
    pub word_index: usize,
    /// Phone indices `[first, last]` inclusive.
    pub first_phone: usize,
    pub last_phone: usize,
    pub start_s: f64,
    pub end_s: f64,
}

impl WordInstance {
    pub fn phone_count(&self) -> usize {
        self.last_phone - self.first_phone + 1
    }

    pub fn phone_range(&self) -> std::ops::RangeInclusive<usize> {
        self.first_phone..=self.last_phone
    }

    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// A validated recording. Construct through [`validate_alignment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingAlignment {
    pub rec_id: String,
    phones: Vec<PhoneInstance>,
    words: Vec<WordInstance>,
    total_duration_s: f64,
    word_count: usize,
}

impl RecordingAlignment {
    pub fn phones(&self) -> &[PhoneInstance] {
        &self.phones
    }

    pub fn words(&self) -> &[WordInstance] {
        &self.words
    }

    pub fn total_duration_s(&self) -> f64 {
        self.total_duration_s
    }

    /// Number of words used to normalise per-word scores. Defaults to the
    /// number of aligned words; an external transcript count may override it.
    pub fn word_count(&self) -> usize {
        self.word_count
    }

    pub fn with_word_count(mut self, word_count: usize) -> Self {
        self.word_count = word_count;
        self
    }

    /// `(start, end)` of every phone, in order.
    pub fn spans(&self) -> Vec<(f64, f64)> {
        self.phones.iter().map(|p| (p.start_s, p.end_s)).collect()
    }

    /// Maximal speech intervals: unions of abutting word spans.
    pub fn speech_intervals(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for w in &self.words {
            if w.end_s <= w.start_s {
                continue;
            }
            match out.last_mut() {
                Some(last) if w.start_s <= last.1 + OVERLAP_TOLERANCE_S => last.1 = last.1.max(w.end_s),
                _ => out.push((w.start_s, w.end_s)),
            }
        }
        out
    }

    /// Complement of [`Self::speech_intervals`] within the recording.
    pub fn silence_intervals(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut cursor = 0.0;
        for (s, e) in self.speech_intervals() {
            if s > cursor {
                out.push((cursor, s));
            }
            cursor = cursor.max(e);
        }
        if self.total_duration_s > cursor {
            out.push((cursor, self.total_duration_s));
        }
        out
    }
}

/// Checks and normalises a phone sequence into a [`RecordingAlignment`].
///
/// Phones are sorted by start time. `total_duration_s` of `None` means "ends
/// with the last phone".
pub fn validate_alignment(
    rec_id: impl Into<String>,
    mut phones: Vec<PhoneInstance>,
    total_duration_s: Option<f64>,
) -> Result<RecordingAlignment, AlignmentError> {
    for (index, p) in phones.iter().enumerate() {
        let bad = !p.start_s.is_finite() || !p.end_s.is_finite() || p.start_s < 0.0 || !p.log_prob.is_finite();
        if bad {
            return Err(AlignmentError::InvalidValue { index, label: p.label.clone() });
        }
        if p.end_s < p.start_s {
            return Err(AlignmentError::NegativeDuration {
                index,
                label: p.label.clone(),
                start_s: p.start_s,
                end_s: p.end_s,
            });
        }
    }
    phones.sort_by(|a, b| a.start_s.total_cmp(&b.start_s).then(a.end_s.total_cmp(&b.end_s)));

    for (i, pair) in phones.windows(2).enumerate() {
        let overlap = pair[0].end_s - pair[1].start_s;
        if overlap > OVERLAP_TOLERANCE_S {
            return Err(AlignmentError::OverlapError { first: i, second: i + 1, overlap_s: overlap });
        }
    }

    let words = group_words(&phones)?;
    let last_end = phones.iter().map(|p| p.end_s).fold(0.0, f64::max);
    let total = match total_duration_s {
        Some(t) if t + OVERLAP_TOLERANCE_S < last_end || !t.is_finite() => {
            return Err(AlignmentError::DurationTooShort { total_s: t, last_end_s: last_end })
        }
        Some(t) => t.max(last_end),
        None => last_end,
    };
    let word_count = words.len();
    Ok(RecordingAlignment { rec_id: rec_id.into(), phones, words, total_duration_s: total, word_count })
}

fn group_words(phones: &[PhoneInstance]) -> Result<Vec<WordInstance>, AlignmentError> {
    let mut words: Vec<WordInstance> = Vec::new();
    for (i, p) in phones.iter().enumerate() {
        let Some(w) = p.word_index else { continue };
        match words.last_mut() {
            Some(last) if last.word_index == w && last.last_phone + 1 == i => {
                last.last_phone = i;
                last.end_s = p.end_s;
            }
            // a word index may only appear once, in increasing order
            Some(last) if last.word_index >= w => {
                return Err(AlignmentError::DanglingWordIndex { index: i, word_index: w });
            }
            _ => words.push(WordInstance {
                label: p.word.clone().unwrap_or_default(),
                word_index: w,
                first_phone: i,
                last_phone: i,
                start_s: p.start_s,
                end_s: p.end_s,
            }),
        }
    }
    Ok(words)
}

/// The words of a validated alignment.
pub fn derive_words(alignment: &RecordingAlignment) -> Vec<WordInstance> {
    alignment.words.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ph(label: &str, s: f64, e: f64, w: Option<usize>) -> PhoneInstance {
        PhoneInstance::new(label, s, e, -5.0, w)
    }

    #[test]
    fn empty_alignment() {
        let a = validate_alignment("r", vec![], Some(10.0)).unwrap();
        assert_eq!(a.word_count(), 0);
        assert_eq!(a.total_duration_s(), 10.0);
        assert_eq!(a.silence_intervals(), vec![(0.0, 10.0)]);
    }

    #[test]
    fn minimal_alignment() {
        let a = validate_alignment("r", vec![ph("sil", 0.0, 0.5, None), ph("AA1", 0.5, 0.6, Some(0))], None).unwrap();
        assert_eq!(a.words().len(), 1);
        assert_eq!(a.words()[0].phone_count(), 1);
        assert_eq!(a.word_count(), 1);
    }

    #[test]
    fn overlap_is_rejected() {
        let err = validate_alignment("r", vec![ph("T", 0.0, 0.2, Some(0)), ph("AA1", 0.1, 0.3, Some(0))], None);
        assert!(matches!(err, Err(AlignmentError::OverlapError { first: 0, second: 1, .. })));
    }

    #[test]
    fn jitter_within_tolerance_is_accepted() {
        let a = validate_alignment("r", vec![ph("T", 0.0, 0.2005, Some(0)), ph("AA1", 0.2, 0.3, Some(0))], None);
        assert!(a.is_ok());
    }

    #[test]
    fn negative_duration_is_rejected() {
        let err = validate_alignment("r", vec![ph("T", 0.3, 0.2, Some(0))], None);
        assert!(matches!(err, Err(AlignmentError::NegativeDuration { index: 0, .. })));
    }

    #[test]
    fn words_split_by_silence_are_rejected() {
        let phones = vec![ph("T", 0.0, 0.1, Some(0)), ph("sil", 0.1, 0.2, None), ph("AA1", 0.2, 0.3, Some(0))];
        assert!(matches!(
            validate_alignment("r", phones, None),
            Err(AlignmentError::DanglingWordIndex { index: 2, word_index: 0 })
        ));
        let phones = vec![ph("T", 0.0, 0.1, Some(1)), ph("AA1", 0.1, 0.2, Some(0))];
        assert!(validate_alignment("r", phones, None).is_err());
    }

    #[test]
    fn phones_are_sorted() {
        let a = validate_alignment("r", vec![ph("B", 0.1, 0.2, Some(0)), ph("A", 0.0, 0.1, Some(0))], None).unwrap();
        assert_eq!(a.phones()[0].label, "A");
    }

    #[test]
    fn total_duration_must_cover_phones() {
        assert!(matches!(
            validate_alignment("r", vec![ph("A", 0.0, 2.0, Some(0))], Some(1.0)),
            Err(AlignmentError::DurationTooShort { .. })
        ));
    }

    #[test]
    fn derive_words_counts() {
        let mut phones = Vec::new();
        for i in 0..4 {
            phones.push(ph("X", i as f64 * 0.1, (i + 1) as f64 * 0.1, Some(0)));
        }
        for i in 4..6 {
            phones.push(ph("Y", i as f64 * 0.1, (i + 1) as f64 * 0.1, Some(1)));
        }
        let a = validate_alignment("r", phones, None).unwrap();
        let counts: Vec<usize> = derive_words(&a).iter().map(WordInstance::phone_count).collect();
        assert_eq!(counts, vec![4, 2]);

        let sil = validate_alignment("r", vec![ph("sil", 0.0, 1.0, None)], None).unwrap();
        assert!(derive_words(&sil).is_empty());
    }

    #[test]
    fn speech_and_silence_partition() {
        let phones = vec![
            ph("sil", 0.0, 1.0, None),
            ph("A", 1.0, 1.2, Some(0)),
            ph("B", 1.2, 1.5, Some(1)),
            ph("sil", 1.5, 2.0, None),
            ph("C", 2.0, 2.5, Some(2)),
        ];
        let a = validate_alignment("r", phones, Some(3.0)).unwrap();
        assert_eq!(a.speech_intervals(), vec![(1.0, 1.5), (2.0, 2.5)]);
        assert_eq!(a.silence_intervals(), vec![(0.0, 1.0), (1.5, 2.0), (2.5, 3.0)]);
    }

    fn arb_alignment() -> impl Strategy<Value = Vec<PhoneInstance>> {
        // (duration, is word boundary, is silence)
        prop::collection::vec((0.0f64..0.3, any::<bool>(), prop::bool::weighted(0.2)), 0..60).prop_map(|spec| {
            let mut t = 0.0;
            let mut word = 0usize;
            let mut prev_sil = true;
            let mut out = Vec::new();
            for (d, boundary, sil) in spec {
                let w = if sil {
                    None
                } else {
                    if !prev_sil && boundary {
                        word += 1;
                    }
                    if prev_sil && !out.is_empty() {
                        word += 1;
                    }
                    Some(word)
                };
                prev_sil = sil;
                out.push(PhoneInstance::new(if sil { "sil" } else { "X" }, t, t + d, -1.0, w));
                t += d;
            }
            out
        })
    }

    proptest! {
        #[test]
        fn words_cover_speech_phones_once(phones in arb_alignment()) {
            let a = validate_alignment("r", phones, None).unwrap();
            let covered: Vec<usize> = derive_words(&a).iter().flat_map(|w| w.phone_range()).collect();
            let speech: Vec<usize> = a.phones().iter().enumerate().filter(|(_, p)| !p.is_silence()).map(|(i, _)| i).collect();
            prop_assert_eq!(covered, speech);
            let word_time: f64 = a.words().iter().map(WordInstance::duration).sum();
            prop_assert!(word_time <= a.total_duration_s() + 1e-9);
        }

        #[test]
        fn validation_is_idempotent(phones in arb_alignment()) {
            let a = validate_alignment("r", phones, None).unwrap();
            let b = validate_alignment("r", a.phones().to_vec(), Some(a.total_duration_s())).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}

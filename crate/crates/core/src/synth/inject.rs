use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{fill_noise, rng_for, sample_range, ErrorKind, ErrorSpan, SynthRecording, SynthSpec, MIN_PHONE_S};
use crate::alignment::{validate_alignment, PhoneInstance};
use crate::io::AudioTrack;

/// `(first, last)` phone indices of every word.
pub fn word_runs(phones: &[PhoneInstance]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for (i, p) in phones.iter().enumerate() {
        let Some(w) = p.word_index else { continue };
        match out.last_mut() {
            Some(last) if last.1 + 1 == i && phones[last.0].word_index == Some(w) => last.1 = i,
            _ => out.push((i, i)),
        }
    }
    out
}

/// Sets a phone's duration, keeping its log-probability rate.
fn resize(p: &mut PhoneInstance, start: f64, end: f64) {
    let rate = p.log_prob / p.duration();
    p.start_s = start;
    p.end_s = end;
    p.log_prob = rate * (end - start);
}

/// Lays phones `range` out back to back from `start` with the given
/// durations; returns the end time.
fn lay_out(phones: &mut [PhoneInstance], start: f64, durations: &[f64]) -> f64 {
    let mut t = start;
    for (p, &d) in phones.iter_mut().zip(durations) {
        resize(p, t, t + d);
        t += d;
    }
    t
}

/// Compresses word `first..=last` to minimum-length phones and hands the
/// freed time to the silence after it. Returns the word's original extent.
pub fn bunch_word(phones: &mut [PhoneInstance], first: usize, last: usize) -> Option<(f64, f64)> {
    let next = phones.get(last + 1)?;
    if !next.is_silence() {
        return None;
    }
    let n = last - first + 1;
    let (start, end) = (phones[first].start_s, phones[last].end_s);
    if end - start <= n as f64 * MIN_PHONE_S {
        return None;
    }
    let new_end = lay_out(&mut phones[first..=last], start, &vec![MIN_PHONE_S; n]);
    let sil_end = phones[last + 1].end_s;
    resize(&mut phones[last + 1], new_end, sil_end);
    Some((start, end))
}

/// Swaps the silence at `sil` with the word that follows it: the word's
/// phones are rescaled to fill the silence's time, and the silence takes the
/// word's. Returns the combined extent.
pub fn swap_silence(phones: &mut Vec<PhoneInstance>, sil: usize) -> Option<(f64, f64)> {
    if !phones.get(sil)?.is_silence() {
        return None;
    }
    let w = phones.get(sil + 1)?.word_index?;
    let last = (sil + 1..phones.len()).take_while(|&i| phones[i].word_index == Some(w)).last()?;
    let start = phones[sil].start_s;
    let sil_len = phones[sil].duration();
    let end = phones[last].end_s;
    let word_len = end - phones[sil + 1].start_s;
    if sil_len <= 0.0 || word_len <= 0.0 {
        return None;
    }
    let factor = sil_len / word_len;
    let durations: Vec<f64> = phones[sil + 1..=last].iter().map(|p| p.duration() * factor).collect();
    let silence = phones.remove(sil);
    let mid = lay_out(&mut phones[sil..last], start, &durations);
    let mut silence = silence;
    resize(&mut silence, mid, end);
    phones.insert(last, silence);
    Some((start, end))
}

/// Moves every boundary from the start of `first` to the end of `last` by
/// `offset`. Only the phones just outside the run change length; both must
/// stay at least [`MIN_PHONE_S`] long.
pub fn drift_boundaries(phones: &mut [PhoneInstance], first: usize, last: usize, offset: f64) -> Option<(f64, f64)> {
    if first == 0 || last + 1 >= phones.len() || first > last {
        return None;
    }
    let before = &phones[first - 1];
    let after = &phones[last + 1];
    if before.duration() + offset < MIN_PHONE_S || after.duration() - offset < MIN_PHONE_S {
        return None;
    }
    let span = (phones[first].start_s + offset.min(0.0), phones[last].end_s + offset.max(0.0));
    let (bs, be) = (before.start_s, before.end_s + offset);
    resize(&mut phones[first - 1], bs, be);
    for p in &mut phones[first..=last] {
        p.start_s += offset;
        p.end_s += offset;
    }
    let (as_, ae) = (phones[last + 1].start_s + offset, phones[last + 1].end_s);
    resize(&mut phones[last + 1], as_, ae);
    Some(span)
}

/// Lowers the log-probability of every phone whose midpoint falls in
/// `[start, end)` by `rate` per second. Returns the extent of the affected
/// phones.
pub fn dip_logp(phones: &mut [PhoneInstance], start: f64, end: f64, rate: f64) -> Option<(f64, f64)> {
    let mut span: Option<(f64, f64)> = None;
    for p in phones.iter_mut().filter(|p| p.midpoint() >= start && p.midpoint() < end) {
        p.log_prob -= rate * p.duration();
        span = Some(span.map_or((p.start_s, p.end_s), |s| (s.0, p.end_s)));
    }
    span
}

/// Multiplies the durations of word `first..=last` by `factor`, shortening
/// the following silence to match. At least `keep_s` of silence must remain.
pub fn stretch_word(
    phones: &mut [PhoneInstance],
    first: usize,
    last: usize,
    factor: f64,
    keep_s: f64,
) -> Option<(f64, f64)> {
    let next = phones.get(last + 1)?;
    if !next.is_silence() {
        return None;
    }
    let start = phones[first].start_s;
    let durations: Vec<f64> = phones[first..=last].iter().map(|p| p.duration() * factor).collect();
    let new_end = start + durations.iter().sum::<f64>();
    if next.end_s - new_end < keep_s {
        return None;
    }
    lay_out(&mut phones[first..=last], start, &durations);
    let sil_end = phones[last + 1].end_s;
    resize(&mut phones[last + 1], new_end, sil_end);
    Some((start, new_end))
}

/// Replaces `span` of the audio with noise far below the silence level.
pub fn quiet_gap(samples: &mut [f32], sample_rate_hz: u32, span: (f64, f64), rms: f64, rng: &mut ChaCha8Rng) {
    let range = sample_range(span, sample_rate_hz, samples.len());
    fill_noise(&mut samples[range], rms, rng);
}

/// Replaces `span` of the audio with loud noise.
pub fn loud_burst(samples: &mut [f32], sample_rate_hz: u32, span: (f64, f64), rms: f64, rng: &mut ChaCha8Rng) {
    let range = sample_range(span, sample_rate_hz, samples.len());
    fill_noise(&mut samples[range], rms, rng);
}

const ATTEMPTS: usize = 200;
/// Stretched words are long enough for the word-duration check to see them.
const STRETCH_MIN_PHONES: usize = 4;
const STRETCH_KEEP_S: f64 = 0.15;

/// Injection order: the kinds with the scarcest sites go first.
const ORDER: [ErrorKind; 7] = [
    ErrorKind::Stretch,
    ErrorKind::Bunching,
    ErrorKind::SilenceSwap,
    ErrorKind::LogpDip,
    ErrorKind::BoundaryDrift,
    ErrorKind::LoudBurst,
    ErrorKind::QuietGap,
];

struct Placer {
    spans: Vec<(f64, f64)>,
    spacing: f64,
}

impl Placer {
    fn free(&self, span: (f64, f64)) -> bool {
        self.spans.iter().all(|s| span.1 + self.spacing <= s.0 || s.1 + self.spacing <= span.0)
    }
}

/// Injects the spec's errors into one clean recording. Each kind gets
/// `errors_in_recording` attempts at a site; kinds that find no free site
/// inject fewer. Spans come back sorted by start.
pub fn inject_recording(clean: &SynthRecording, spec: &SynthSpec, index: usize) -> (SynthRecording, Vec<ErrorSpan>) {
    let mut rng = rng_for(spec.seed, index, 2);
    let rec = &clean.alignment;
    let total = rec.total_duration_s();
    let mut phones = rec.phones().to_vec();
    let mut placer = Placer { spans: Vec::new(), spacing: spec.error_spacing_s };
    let mut truth = Vec::new();
    let mut samples: Option<Vec<f32>> = clean.audio.as_ref().map(|a| a.samples().to_vec());
    let sr = spec.sample_rate_hz;

    for kind in ORDER {
        for _ in 0..spec.errors_in_recording(kind, index) {
            let mut placed = None;
            for _ in 0..ATTEMPTS {
                if let Some(span) = try_place(kind, &mut phones, &placer, spec, total, clean, &mut samples, sr, &mut rng) {
                    placed = Some(span);
                    break;
                }
            }
            if let Some(span) = placed {
                placer.spans.push(span);
                truth.push(ErrorSpan { rec_id: rec.rec_id.clone(), kind, start_s: span.0, end_s: span.1 });
            }
        }
    }
    truth.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));

    let alignment = validate_alignment(rec.rec_id.clone(), phones, Some(total))
        .expect("edits keep the alignment valid")
        .with_word_count(rec.word_count());
    let audio = match (samples, &clean.audio) {
        (Some(s), Some(a)) => Some(AudioTrack::from_samples(a.rec_id.clone(), a.sample_rate_hz, s)),
        _ => None,
    };
    (SynthRecording { alignment, audio }, truth)
}

#[allow(clippy::too_many_arguments)]
fn try_place(
    kind: ErrorKind,
    phones: &mut Vec<PhoneInstance>,
    placer: &Placer,
    spec: &SynthSpec,
    total: f64,
    clean: &SynthRecording,
    samples: &mut Option<Vec<f32>>,
    sr: u32,
    rng: &mut ChaCha8Rng,
) -> Option<(f64, f64)> {
    match kind {
        ErrorKind::Bunching => {
            let words = word_runs(phones);
            let &(first, last) = words.get(rng.random_range(0..words.len().max(1)))?;
            if last - first + 1 < 4 || !placer.free((phones[first].start_s, phones[last].end_s)) {
                return None;
            }
            bunch_word(phones, first, last)
        }
        ErrorKind::Stretch => {
            // sites are scarce (a long enough pause must follow), so list them all
            let sites: Vec<(usize, usize)> = word_runs(phones)
                .into_iter()
                .filter(|&(first, last)| {
                    let longest = phones[first..=last].iter().map(|p| p.duration()).fold(0.0, f64::max);
                    let start = phones[first].start_s;
                    let end = start + (phones[last].end_s - start) * spec.stretch_factor;
                    last + 1 - first >= STRETCH_MIN_PHONES
                        && longest * spec.stretch_factor < 1.0
                        && phones.get(last + 1).is_some_and(|n| n.is_silence() && n.end_s - end >= STRETCH_KEEP_S)
                        && placer.free((start, end))
                })
                .collect();
            let &(first, last) = sites.get(rng.random_range(0..sites.len().max(1)))?;
            stretch_word(phones, first, last, spec.stretch_factor, STRETCH_KEEP_S)
        }
        ErrorKind::SilenceSwap => {
            let i = rng.random_range(0..phones.len());
            let p = &phones[i];
            let next_is_word = phones.get(i + 1).is_some_and(|n| n.word_index.is_some());
            if !p.is_silence() || !next_is_word || !(0.2..=1.5).contains(&p.duration()) {
                return None;
            }
            let w = phones[i + 1].word_index;
            let last = (i + 1..phones.len()).take_while(|&j| phones[j].word_index == w).last()?;
            if !placer.free((p.start_s, phones[last].end_s)) {
                return None;
            }
            swap_silence(phones, i)
        }
        ErrorKind::LogpDip => {
            let i = rng.random_range(0..phones.len());
            let start = phones[i].start_s;
            let end = start + spec.logp_dip_s;
            if phones[i].is_silence() || end > total {
                return None;
            }
            let last_end = phones.iter().filter(|p| p.midpoint() >= start && p.midpoint() < end).map(|p| p.end_s).next_back()?;
            if !placer.free((start, last_end)) {
                return None;
            }
            dip_logp(phones, start, end, spec.logp_dip_rate)
        }
        ErrorKind::BoundaryDrift => {
            let first = rng.random_range(1..phones.len().max(2));
            let mut last = first;
            while last + 2 < phones.len() && phones[last].end_s - phones[first].start_s < 0.5 {
                last += 1;
            }
            let offset = rng.random_range(0.04..0.08) * if rng.random::<bool>() { 1.0 } else { -1.0 };
            let span = (phones.get(first)?.start_s - 0.08, phones.get(last)?.end_s + 0.08);
            if !placer.free(span) {
                return None;
            }
            drift_boundaries(phones, first, last, offset)
        }
        ErrorKind::QuietGap => {
            let samples = samples.as_mut()?;
            let len = rng.random_range(spec.quiet_gap_s[0]..=spec.quiet_gap_s[1]);
            let speech = clean.alignment.speech_intervals();
            let &(s, e) = speech.get(rng.random_range(0..speech.len().max(1)))?;
            if e - s < len + 0.2 {
                return None;
            }
            let start = rng.random_range(s + 0.1..=e - 0.1 - len);
            let span = (start, start + len);
            if !placer.free(span) {
                return None;
            }
            quiet_gap(samples, sr, span, spec.silence_rms * 0.1, rng);
            Some(span)
        }
        ErrorKind::LoudBurst => {
            let samples = samples.as_mut()?;
            let len = spec.loud_burst_s;
            let silences = clean.alignment.silence_intervals();
            let &(s, e) = silences.get(rng.random_range(0..silences.len().max(1)))?;
            if e - s < len + 0.3 {
                return None;
            }
            let start = rng.random_range(s + 0.15..=e - 0.15 - len);
            let span = (start, start + len);
            if !placer.free(span) {
                return None;
            }
            let rms = spec.silence_rms * 10f64.powf(spec.loud_burst_db / 20.0);
            loud_burst(samples, sr, span, rms, rng);
            Some(span)
        }
    }
}

/// Injects errors into every recording; spans are grouped by recording in
/// corpus order.
pub fn inject_errors(corpus: &[SynthRecording], spec: &SynthSpec) -> (Vec<SynthRecording>, Vec<ErrorSpan>) {
    let mut recs = Vec::with_capacity(corpus.len());
    let mut truth = Vec::new();
    for (i, clean) in corpus.iter().enumerate() {
        let (rec, mut spans) = inject_recording(clean, spec, i);
        recs.push(rec);
        truth.append(&mut spans);
    }
    (recs, truth)
}

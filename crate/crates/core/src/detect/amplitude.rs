use super::{DetectError, DetectorConfig, Feature, SuspicionRegion};
use crate::alignment::RecordingAlignment;
use crate::io::{AudioTrack, FRAME_S};
use crate::stats::percentiles;

/// Allowed relative disagreement between audio and alignment length.
const DURATION_SLACK: f64 = 0.01;

/// Long quiet stretches inside speech and long loud stretches inside silence.
///
/// Thresholds are the `quiet_pct` and `loud_pct` percentiles of the whole
/// recording's frame RMS, so the detector is independent of recording gain.
/// A frame belongs to an interval when its centre does. Regions report their
/// length in seconds as the peak score.
pub fn detect_amplitude(
    rec: &RecordingAlignment,
    audio: &AudioTrack,
    cfg: &DetectorConfig,
) -> Result<Vec<SuspicionRegion>, DetectError> {
    let alignment_s = rec.total_duration_s();
    let audio_s = audio.duration_s();
    if (audio_s - alignment_s).abs() > DURATION_SLACK * alignment_s.max(audio_s) {
        return Err(DetectError::DurationMismatch { audio_s, alignment_s });
    }
    let rms = audio.frame_rms();
    if rms.is_empty() {
        return Ok(Vec::new());
    }
    let th = percentiles(rms, &[cfg.quiet_pct, cfg.loud_pct]).expect("validated percentiles");
    let (quiet_th, loud_th) = (th[0], th[1]);
    let min_frames = ((cfg.min_extreme_run_s / FRAME_S) - 1e-9).ceil().max(1.0) as usize;

    let mut out = Vec::new();
    for (s, e) in rec.speech_intervals() {
        scan(rms, (s, e), min_frames, |r| r < quiet_th, &rec.rec_id, Feature::Quiet, &mut out);
    }
    for (s, e) in rec.silence_intervals() {
        scan(rms, (s, e), min_frames, |r| r > loud_th, &rec.rec_id, Feature::Loud, &mut out);
    }
    out.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    Ok(out)
}

fn scan(
    rms: &[f64],
    (start, end): (f64, f64),
    min_frames: usize,
    extreme: impl Fn(f64) -> bool,
    rec_id: &str,
    feature: Feature,
    out: &mut Vec<SuspicionRegion>,
) {
    // frames whose centre (j + 0.5) * FRAME_S lies in [start, end)
    let first = ((start / FRAME_S) - 0.5).ceil().max(0.0) as usize;
    let last = (((end / FRAME_S) - 0.5).ceil().max(0.0) as usize).min(rms.len());
    let mut j = first;
    while j < last {
        if !extreme(rms[j]) {
            j += 1;
            continue;
        }
        let run_start = j;
        while j < last && extreme(rms[j]) {
            j += 1;
        }
        let frames = j - run_start;
        if frames >= min_frames {
            let s = (run_start as f64 * FRAME_S).max(start);
            let e = (j as f64 * FRAME_S).min(end);
            if e > s {
                out.push(SuspicionRegion {
                    rec_id: rec_id.to_string(),
                    feature,
                    start_s: s,
                    end_s: e,
                    peak_score: frames as f64 * FRAME_S,
                });
            }
        }
    }
}

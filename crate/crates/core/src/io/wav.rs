use std::io::Cursor;

use serde::{Deserialize, Serialize};

use super::IoError;

/// Length of one amplitude frame.
pub const FRAME_S: f64 = 0.010;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelPolicy {
    /// Average of both channels.
    #[default]
    Mix,
    Left,
    Right,
}

impl std::str::FromStr for ChannelPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mix" => Ok(Self::Mix),
            "left" => Ok(Self::Left),
            "right" => Ok(Self::Right),
            other => Err(format!("unknown channel policy {other:?} (mix, left, right)")),
        }
    }
}

/// Mono audio with per-frame RMS amplitude over non-overlapping 10 ms frames.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioTrack {
    pub rec_id: String,
    pub sample_rate_hz: u32,
    samples: Vec<f32>,
    frame_rms: Vec<f64>,
}

impl AudioTrack {
    pub fn from_samples(rec_id: impl Into<String>, sample_rate_hz: u32, samples: Vec<f32>) -> Self {
        assert!(sample_rate_hz > 0, "sample rate must be positive");
        let frame_rms = frame_rms(&samples, sample_rate_hz);
        Self { rec_id: rec_id.into(), sample_rate_hz, samples, frame_rms }
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn frame_rms(&self) -> &[f64] {
        &self.frame_rms
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }

    /// Drops the raw samples, keeping only the frame energies.
    pub fn into_frames_only(mut self) -> Self {
        self.samples = Vec::new();
        self
    }
}

/// RMS of consecutive 10 ms frames. Frame `j` covers samples
/// `[round(j * L), round((j + 1) * L))` with `L = 0.01 * rate`, so rates that
/// are not multiples of 100 Hz still yield `floor(n / L)` frames.
pub fn frame_rms(samples: &[f32], sample_rate_hz: u32) -> Vec<f64> {
    let frame_len = FRAME_S * f64::from(sample_rate_hz);
    let n_frames = (samples.len() as f64 / frame_len + 1e-9).floor() as usize;
    (0..n_frames)
        .map(|j| {
            let lo = (j as f64 * frame_len).round() as usize;
            let hi = (((j + 1) as f64 * frame_len).round() as usize).min(samples.len());
            let frame = &samples[lo..hi];
            if frame.is_empty() {
                return 0.0;
            }
            let energy: f64 = frame.iter().map(|&s| f64::from(s) * f64::from(s)).sum();
            (energy / frame.len() as f64).sqrt()
        })
        .collect()
}

/// Decodes a 16-bit PCM WAV file (mono or stereo) into a mono track.
pub fn read_wav_mono(rec_id: &str, bytes: &[u8], policy: ChannelPolicy) -> Result<AudioTrack, IoError> {
    let reader = hound::WavReader::new(Cursor::new(bytes)).map_err(wav_error)?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(IoError::UnsupportedFormat(format!(
            "{:?} {}-bit samples; only 16-bit PCM is supported",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    if !(1..=2).contains(&spec.channels) {
        return Err(IoError::UnsupportedFormat(format!("{} channels", spec.channels)));
    }
    if spec.sample_rate == 0 {
        return Err(IoError::UnsupportedFormat("zero sample rate".into()));
    }
    let declared = reader.len() as usize;
    let mut raw = Vec::with_capacity(declared.min(bytes.len() / 2));
    for s in reader.into_samples::<i16>() {
        raw.push(s.map_err(wav_error)?);
    }
    if raw.len() < declared {
        return Err(IoError::TruncatedFile);
    }
    let scale = |s: i16| f32::from(s) / 32768.0;
    let samples = if spec.channels == 1 {
        raw.into_iter().map(scale).collect()
    } else {
        raw.chunks_exact(2)
            .map(|lr| match policy {
                ChannelPolicy::Mix => 0.5 * (scale(lr[0]) + scale(lr[1])),
                ChannelPolicy::Left => scale(lr[0]),
                ChannelPolicy::Right => scale(lr[1]),
            })
            .collect()
    };
    Ok(AudioTrack::from_samples(rec_id, spec.sample_rate, samples))
}

fn wav_error(e: hound::Error) -> IoError {
    match e {
        // hound reports a short sample read as a plain io error
        hound::Error::IoError(io)
            if io.kind() == std::io::ErrorKind::UnexpectedEof || io.to_string().contains("enough bytes") =>
        {
            IoError::TruncatedFile
        }
        hound::Error::IoError(io) => IoError::Io(io.to_string()),
        hound::Error::Unsupported => IoError::UnsupportedFormat("unsupported WAV encoding".into()),
        other => IoError::UnsupportedFormat(other.to_string()),
    }
}

/// Encodes mono samples as 16-bit PCM WAV, clipping to full scale.
pub fn write_wav_mono(samples: &[f32], sample_rate_hz: u32) -> Vec<u8> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut out = Cursor::new(Vec::with_capacity(44 + samples.len() * 2));
    {
        let mut w = hound::WavWriter::new(&mut out, spec).expect("in-memory writer");
        let mut w16 = w.get_i16_writer(samples.len() as u32);
        for &s in samples {
            w16.write_sample((s * 32768.0).round().clamp(-32768.0, 32767.0) as i16);
        }
        w16.flush().expect("in-memory write");
        w.finalize().expect("in-memory write");
    }
    out.into_inner()
}

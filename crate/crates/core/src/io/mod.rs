//! Reading alignments, ratings and audio; writing regions, TextGrids and
//! reports.

mod jsonl;
mod ratings;
mod regions_csv;
mod report;
mod textgrid;
mod wav;

pub use jsonl::{parse_alignment_records, write_alignment_records};
pub use ratings::{parse_ratings_csv, write_ratings_csv, RatingRecord};
pub use regions_csv::{parse_regions_csv, write_regions_csv, REGIONS_CSV_HEADER};
pub use report::{write_report_json, Report};
pub use textgrid::{
    parse_textgrid, regions_textgrid, write_textgrid, write_textgrid_regions, TextGrid, Tier, TierClass, TierItem,
};
pub use wav::{frame_rms, read_wav_mono, write_wav_mono, AudioTrack, ChannelPolicy, FRAME_S};

use thiserror::Error;

use crate::alignment::AlignmentError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IoError {
    #[error("line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("line {line}: {msg}")]
    RangeError { line: usize, msg: String },
    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),
    #[error("audio file is truncated")]
    TruncatedFile,
    #[error("region [{start_s}, {end_s}] lies outside [0, {total_s}]")]
    RegionOutOfBounds { start_s: f64, end_s: f64, total_s: f64 },
    #[error("recording {rec_id}: {source}")]
    Validation { rec_id: String, source: AlignmentError },
    #[error("{0}")]
    Io(String),
}

impl IoError {
    pub(crate) fn parse(line: usize, msg: impl std::fmt::Display) -> Self {
        IoError::ParseError { line, msg: msg.to_string() }
    }
}

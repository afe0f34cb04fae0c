//! Quality checks for automatic phone alignments.

pub mod alignment;
pub mod analysis;
pub mod detect;
pub mod io;
pub mod model;
pub mod stats;
pub mod synth;

pub use alignment::{validate_alignment, AlignmentError, PhoneInstance, RecordingAlignment, WordInstance};
pub use analysis::{CoincidenceTable, FileScoreRow};
pub use detect::{DetectorConfig, Feature, SuspicionRegion};
pub use io::{AudioTrack, IoError};
pub use model::{CorpusModel, ModelConfig};
pub use stats::RegressionFit;

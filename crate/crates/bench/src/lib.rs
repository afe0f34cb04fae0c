//! Shared fixtures for the benchmarks.

use aligncheck_core::model::{CorpusModel, ModelConfig};
use aligncheck_core::synth::{generate_corpus, inject_errors, SynthRecording, SynthSpec};

/// Ten five-minute recordings with the default error mix.
pub fn corpus(with_audio: bool) -> Vec<SynthRecording> {
    let spec = SynthSpec { n_recordings: 10, duration_s: 300.0, with_audio, ..Default::default() };
    inject_errors(&generate_corpus(&spec), &spec).0
}

pub fn model(corpus: &[SynthRecording]) -> CorpusModel {
    let alignments: Vec<_> = corpus.iter().map(|r| r.alignment.clone()).collect();
    CorpusModel::train(&alignments, None, &ModelConfig::default()).expect("synthetic corpus trains")
}

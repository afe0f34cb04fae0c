//! Synthetic corpus through the file formats and back.

use aligncheck_core::detect::{detect_all, DetectorConfig, Feature};
use aligncheck_core::io::{
    parse_alignment_records, parse_regions_csv, read_wav_mono, write_alignment_records, write_regions_csv,
    write_wav_mono, ChannelPolicy,
};
use aligncheck_core::model::{CorpusModel, ModelConfig};
use aligncheck_core::synth::{generate_corpus, inject_errors, parse_truth_csv, write_truth_csv, SynthSpec};

fn spec() -> SynthSpec {
    SynthSpec { n_recordings: 3, duration_s: 180.0, seed: 9, ..Default::default() }
}

#[test]
fn alignments_survive_jsonl() {
    let (dirty, _) = inject_errors(&generate_corpus(&spec()), &spec());
    let text = write_alignment_records(dirty.iter().map(|r| &r.alignment));
    let parsed = parse_alignment_records(&text).unwrap();
    assert_eq!(parsed.len(), 3);
    for r in &dirty {
        assert_eq!(parsed[&r.alignment.rec_id], r.alignment);
    }
    assert_eq!(write_alignment_records(parsed.values()), text);
}

#[test]
fn audio_survives_wav() {
    let rec = &generate_corpus(&spec())[0];
    let audio = rec.audio.as_ref().unwrap();
    let back = read_wav_mono("x", &write_wav_mono(audio.samples(), audio.sample_rate_hz), ChannelPolicy::Mix).unwrap();
    assert_eq!(back.sample_rate_hz, audio.sample_rate_hz);
    assert_eq!(back.samples().len(), audio.samples().len());
    // 16-bit quantisation
    for (a, b) in audio.samples().iter().zip(back.samples()) {
        assert!((a - b).abs() <= 1.0 / 32768.0 + 1e-7);
    }
}

#[test]
fn regions_and_truth_survive_csv() {
    let spec = spec();
    let (dirty, truth) = inject_errors(&generate_corpus(&spec), &spec);
    let corpus: Vec<_> = dirty.iter().map(|r| r.alignment.clone()).collect();
    let model = CorpusModel::train(&corpus, None, &ModelConfig::default()).unwrap();
    let regions: Vec<_> = dirty
        .iter()
        .flat_map(|r| detect_all(&r.alignment, Some(&model), r.audio.as_ref(), &DetectorConfig::default()).unwrap())
        .collect();
    assert!(regions.iter().any(|r| r.feature == Feature::Short));
    assert_eq!(parse_regions_csv(&write_regions_csv(&regions)).unwrap(), regions);
    assert_eq!(parse_truth_csv(&write_truth_csv(&truth)).unwrap(), truth);
}

#[test]
fn pipeline_is_deterministic() {
    let run = || {
        let spec = spec();
        let (dirty, truth) = inject_errors(&generate_corpus(&spec), &spec);
        let corpus: Vec<_> = dirty.iter().map(|r| r.alignment.clone()).collect();
        let model = CorpusModel::train(&corpus, Some("synth000"), &ModelConfig::default()).unwrap();
        let regions = detect_all(&dirty[0].alignment, Some(&model), dirty[0].audio.as_ref(), &DetectorConfig::default()).unwrap();
        (write_truth_csv(&truth), model.to_json(), write_regions_csv(&regions))
    };
    assert_eq!(run(), run());
}

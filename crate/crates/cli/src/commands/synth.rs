use aligncheck_core::io::{write_alignment_records, write_ratings_csv, write_wav_mono, RatingRecord};
use aligncheck_core::synth::{generate_recording, inject_recording, synthetic_rating, write_truth_csv, SynthSpec};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::output::{create_dir, read_text, write_atomic};
use crate::SynthArgs;

pub fn run(args: &SynthArgs) -> CliResult<()> {
    let spec = match &args.spec {
        None => SynthSpec::default(),
        Some(path) => {
            SynthSpec::from_toml_str(&read_text(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        }
    };
    create_dir(&args.out)?;

    let made: Vec<_> = (0..spec.n_recordings)
        .into_par_iter()
        .map(|i| inject_recording(&generate_recording(&spec, i), &spec, i))
        .collect();

    let mut truth = Vec::new();
    let mut ratings = Vec::new();
    for (rec, spans) in &made {
        ratings.push(RatingRecord {
            rec_id: rec.alignment.rec_id.clone(),
            rating: synthetic_rating(spans.len(), rec.alignment.total_duration_s()),
        });
        truth.extend(spans.iter().cloned());
    }
    write_atomic(&args.out.join("alignments.jsonl"), write_alignment_records(made.iter().map(|(r, _)| &r.alignment)).as_bytes())?;
    write_atomic(&args.out.join("truth.csv"), write_truth_csv(&truth).as_bytes())?;
    write_atomic(&args.out.join("ratings.csv"), write_ratings_csv(&ratings).as_bytes())?;
    write_atomic(&args.out.join("spec.toml"), spec.to_toml_string().as_bytes())?;
    if spec.with_audio {
        let audio_dir = args.out.join("audio");
        create_dir(&audio_dir)?;
        made.par_iter()
            .filter_map(|(r, _)| r.audio.as_ref())
            .try_for_each(|a| write_atomic(&audio_dir.join(format!("{}.wav", a.rec_id)), &write_wav_mono(a.samples(), a.sample_rate_hz)))?;
    }

    let mut manifest = RunManifest::new("synth").with_config(spec.to_toml_string());
    if let Some(p) = &args.spec {
        manifest.add_input(p)?;
    }
    manifest.write_in_dir(&args.out)?;

    println!("recordings: {}", made.len());
    println!("injected errors: {}", truth.len());
    println!("output: {}", args.out.display());
    Ok(())
}

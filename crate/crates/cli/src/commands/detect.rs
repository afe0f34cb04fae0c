use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use aligncheck_core::alignment::RecordingAlignment;
use aligncheck_core::detect::{detect_all, DetectorConfig, Feature, SuspicionRegion};
use aligncheck_core::io::{read_wav_mono, regions_textgrid, write_regions_csv, write_textgrid, ChannelPolicy};
use aligncheck_core::model::CorpusModel;
use log::{info, warn};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::output::{create_dir, load_config, read_alignments, read_model, write_atomic};
use crate::DetectArgs;

/// Models trained on fewer than half of a recording's phone classes are
/// probably for another language or phone set.
const MIN_INVENTORY_OVERLAP: f64 = 0.5;

pub fn regions_file(dir: &Path, rec_id: &str) -> PathBuf {
    dir.join(format!("{rec_id}.regions.csv"))
}

struct Outcome {
    regions: Vec<SuspicionRegion>,
    /// `(path, bytes)` of the audio read, for the manifest.
    audio: Option<(PathBuf, Vec<u8>)>,
}

fn detect_one(
    rec: &RecordingAlignment,
    model: &CorpusModel,
    cfg: &DetectorConfig,
    audio_dir: Option<&Path>,
    channel: ChannelPolicy,
    out: &Path,
) -> Result<Outcome, String> {
    let overlap = model.inventory_overlap(rec);
    if overlap < MIN_INVENTORY_OVERLAP {
        warn!("{}: model knows only {:.0}% of its phone classes", rec.rec_id, 100.0 * overlap);
    }
    let mut audio_bytes = None;
    let audio = match audio_dir {
        None => None,
        Some(dir) => {
            let path = dir.join(format!("{}.wav", rec.rec_id));
            match std::fs::read(&path) {
                Ok(bytes) => {
                    let track = read_wav_mono(&rec.rec_id, &bytes, channel).map_err(|e| format!("{}: {e}", path.display()))?;
                    audio_bytes = Some((path, bytes));
                    Some(track)
                }
                Err(e) => {
                    warn!("{}: {e}; loud and quiet skipped", path.display());
                    None
                }
            }
        }
    };
    let regions = detect_all(rec, Some(model), audio.as_ref(), cfg).map_err(|e| format!("{}: {e}", rec.rec_id))?;

    let mut features: Vec<Feature> = Feature::ALL.iter().copied().filter(|f| !f.needs_audio()).collect();
    if audio.is_some() {
        features.extend([Feature::Loud, Feature::Quiet]);
    }
    let grid = regions_textgrid(rec, &regions, &features).map_err(|e| format!("{}: {e}", rec.rec_id))?;
    let write = |path: PathBuf, text: String| write_atomic(&path, text.as_bytes()).map_err(|e| e.to_string());
    write(regions_file(out, &rec.rec_id), write_regions_csv(&regions))?;
    write(out.join(format!("{}.TextGrid", rec.rec_id)), write_textgrid(&grid))?;
    Ok(Outcome { regions, audio: audio_bytes })
}

pub fn run(args: &DetectArgs) -> CliResult<()> {
    let (cfg, cfg_path) = load_config(args.config.as_deref())?;
    cfg.validate().map_err(|e| CliError::Input(format!("config: {e}")))?;
    let channel: ChannelPolicy = args.channel.parse().map_err(CliError::Usage)?;
    let recs = read_alignments(&args.alignments)?;
    let model = read_model(&args.model)?;
    if recs.is_empty() {
        return Err(CliError::Input(format!("{}: no recordings", args.alignments.display())));
    }
    create_dir(&args.out)?;

    match &model.excluded_rec {
        None => info!("model was trained on the whole corpus; scoring in global mode"),
        Some(id) => {
            let others = recs.keys().filter(|k| *k != id).count();
            if others > 0 {
                warn!("model leaves out {id} only; {others} other recording(s) are scored in global mode");
            }
        }
    }
    if args.audio_dir.is_none() {
        warn!("no --audio-dir: loud and quiet are skipped");
    }

    let list: Vec<&RecordingAlignment> = recs.values().collect();
    let results: Vec<Result<Outcome, String>> = list
        .par_iter()
        .map(|rec| detect_one(rec, &model, &cfg, args.audio_dir.as_deref(), channel, &args.out))
        .collect();

    let mut manifest = RunManifest::new("detect").with_config(cfg.to_toml_string());
    manifest.add_input(&args.alignments)?;
    manifest.add_input(&args.model)?;
    if let Some(p) = &cfg_path {
        manifest.add_input(p)?;
    }
    let mut totals: BTreeMap<Feature, usize> = BTreeMap::new();
    let mut failed = 0;
    for (rec, result) in list.iter().zip(results) {
        match result {
            Ok(outcome) => {
                for r in &outcome.regions {
                    *totals.entry(r.feature).or_default() += 1;
                }
                if let Some((path, bytes)) = outcome.audio {
                    manifest.add_digest(&path, &bytes);
                }
            }
            Err(e) => {
                failed += 1;
                log::error!("{}: {e}", rec.rec_id);
            }
        }
    }
    manifest.write_in_dir(&args.out)?;

    println!("recordings: {} ({} failed)", list.len(), failed);
    for f in Feature::ALL {
        if args.audio_dir.is_none() && matches!(f, Feature::Loud | Feature::Quiet) {
            println!("{f}: skipped (no audio)");
        } else {
            println!("{f}: {} regions", totals.get(&f).copied().unwrap_or(0));
        }
    }
    if failed > 0 {
        return Err(CliError::Compute(format!("{failed} recording(s) failed; see messages above")));
    }
    Ok(())
}

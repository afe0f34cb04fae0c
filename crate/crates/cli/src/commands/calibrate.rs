use std::collections::BTreeSet;

use aligncheck_core::detect::{calibrate_threshold, score_track, Feature};
use log::warn;

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::output::{load_config, read_alignments, read_model, read_text, write_atomic};
use crate::CalibrateArgs;

const CALIBRATABLE: [Feature; 3] = [Feature::Unexpected, Feature::Improbable, Feature::Badlength];

/// `a,b,c` or `@path` holding one id per line.
fn problem_ids(list: &str) -> CliResult<Vec<String>> {
    let text = match list.strip_prefix('@') {
        Some(path) => read_text(path.as_ref())?.lines().map(str::to_string).collect::<Vec<_>>().join(","),
        None => list.to_string(),
    };
    Ok(text.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect())
}

pub fn run(args: &CalibrateArgs) -> CliResult<()> {
    let feature: Feature = args.feature.parse().map_err(CliError::Usage)?;
    if !CALIBRATABLE.contains(&feature) {
        return Err(CliError::Usage(format!("{feature} has no score threshold; use unexpected, improbable or badlength")));
    }
    if !(args.target_per_hour >= 0.0 && args.target_per_hour.is_finite()) {
        return Err(CliError::Usage("--target-per-hour must be a non-negative number".into()));
    }
    let needs_model = feature != Feature::Improbable;
    if needs_model && args.model.is_none() {
        return Err(CliError::Usage(format!("--model is required to calibrate {feature}")));
    }

    let (mut cfg, config_path) = load_config(args.config.as_deref())?;
    let recs = read_alignments(&args.alignments)?;
    let model = args.model.as_deref().map(read_model).transpose()?;
    let mut manifest = RunManifest::new("calibrate");
    manifest.add_input(&args.alignments)?;
    for p in args.model.iter().chain(config_path.iter()) {
        manifest.add_input(p)?;
    }

    let ids: Vec<String> = match &args.problem_files {
        Some(list) => {
            let ids = problem_ids(list)?;
            if let Some(bad) = ids.iter().find(|id| !recs.contains_key(*id)) {
                return Err(CliError::Input(format!("problem file {bad} is not in the alignments")));
            }
            if ids.is_empty() {
                return Err(CliError::Input("--problem-files names no recordings".into()));
            }
            ids.into_iter().collect::<BTreeSet<_>>().into_iter().collect()
        }
        None => recs.keys().cloned().collect(),
    };
    if ids.is_empty() {
        return Err(CliError::Input(format!("{}: no recordings", args.alignments.display())));
    }

    let tracks: Vec<_> = ids
        .iter()
        .map(|id| score_track(feature, &recs[id], model.as_ref(), &cfg).expect("calibratable feature has a track"))
        .collect();
    let cal = calibrate_threshold(&tracks, args.target_per_hour);
    if args.target_per_hour == 0.0 {
        warn!("target rate 0: threshold set so that {feature} never fires");
    } else if !cal.within_tolerance {
        warn!(
            "no threshold reaches {} regions/hour within 5%; closest gives {:.2}",
            args.target_per_hour, cal.achieved_per_hour
        );
    }

    println!("feature: {feature}");
    println!("threshold: {}", cal.threshold);
    println!("achieved regions/hour: {:.3} (target {})", cal.achieved_per_hour, args.target_per_hour);

    if let Some(out) = &args.write_config {
        cfg.set_threshold(feature, cal.threshold);
        let text = cfg.to_toml_string();
        write_atomic(out, text.as_bytes())?;
        manifest.with_config(text).write_beside(out)?;
        println!("config: {}", out.display());
    }
    Ok(())
}

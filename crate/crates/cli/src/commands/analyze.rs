use std::collections::{BTreeMap, BTreeSet};

use aligncheck_core::analysis::{
    corpus_coincidence, file_scores, regression_harness, ChanceModel, RecordingRegions, MIN_RATED_RECORDINGS,
};
use aligncheck_core::detect::SuspicionRegion;
use aligncheck_core::io::{parse_ratings_csv, parse_regions_csv, write_report_json};
use log::warn;

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::output::{read_alignments, read_text, write_atomic};
use crate::AnalyzeArgs;

const REGIONS_SUFFIX: &str = ".regions.csv";

fn parse_chance(s: &str) -> CliResult<ChanceModel> {
    match s {
        "interval" => Ok(ChanceModel::Interval),
        "point" => Ok(ChanceModel::Point),
        other => Err(CliError::Usage(format!("--chance must be interval or point, not {other:?}"))),
    }
}

pub fn run(args: &AnalyzeArgs) -> CliResult<()> {
    let chance = parse_chance(&args.chance)?;
    if !(args.window >= 0.0 && args.window.is_finite()) {
        return Err(CliError::Usage("--window must be a non-negative number of seconds".into()));
    }
    let recs = read_alignments(&args.alignments)?;
    let mut manifest = RunManifest::new("analyze");
    manifest.add_input(&args.alignments)?;

    // regions, by recording
    let entries = std::fs::read_dir(&args.regions).map_err(|e| CliError::Input(format!("{}: {e}", args.regions.display())))?;
    let mut files: Vec<_> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(REGIONS_SUFFIX)))
        .collect();
    files.sort();
    let mut regions: BTreeMap<String, Vec<SuspicionRegion>> = BTreeMap::new();
    let mut seen_files: BTreeSet<String> = BTreeSet::new();
    for path in &files {
        let parsed = parse_regions_csv(&read_text(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let stem = path.file_name().and_then(|n| n.to_str()).map(|n| n.trim_end_matches(REGIONS_SUFFIX).to_string());
        seen_files.extend(stem);
        for r in parsed {
            regions.entry(r.rec_id.clone()).or_default().push(r);
        }
        manifest.add_input(path)?;
    }
    for id in regions.keys().filter(|id| !recs.contains_key(*id)) {
        warn!("regions for unknown recording {id} ignored");
    }
    for id in recs.keys().filter(|id| !seen_files.contains(*id)) {
        warn!("no regions file for {id}; counted as no regions");
    }

    // ratings
    let ratings: Option<BTreeMap<String, f64>> = match &args.ratings {
        None => None,
        Some(path) => {
            let parsed = parse_ratings_csv(&read_text(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            manifest.add_input(path)?;
            let map: BTreeMap<String, f64> = parsed.into_iter().map(|r| (r.rec_id, r.rating)).collect();
            if !map.keys().any(|k| recs.contains_key(k)) {
                return Err(CliError::Input(format!("{}: no rated recording appears in the alignments", path.display())));
            }
            for id in map.keys().filter(|id| !recs.contains_key(*id)) {
                warn!("rating for unknown recording {id} ignored");
            }
            Some(map)
        }
    };

    let empty = Vec::new();
    let mut rows = Vec::with_capacity(recs.len());
    let mut per_rec = Vec::with_capacity(recs.len());
    for (id, rec) in &recs {
        let mine = regions.get(id).unwrap_or(&empty);
        let rating = ratings.as_ref().and_then(|m| m.get(id).copied());
        rows.push(file_scores(rec, mine, rating).map_err(|e| CliError::Compute(e.to_string()))?);
        per_rec.push(RecordingRegions::new(rec.total_duration_s(), mine));
    }

    let mut fits = Vec::new();
    if ratings.is_some() {
        let rated: Vec<_> = rows.iter().filter(|r| r.rating.is_some()).cloned().collect();
        if rated.len() < MIN_RATED_RECORDINGS {
            warn!("only {} rated recording(s); regression needs {MIN_RATED_RECORDINGS} and is skipped", rated.len());
        } else {
            let out = regression_harness(&rated).map_err(|e| CliError::Compute(e.to_string()))?;
            for w in &out.warnings {
                warn!("{w}");
            }
            fits = out.fits;
        }
    }
    let table = corpus_coincidence(&per_rec, args.window, chance);

    write_atomic(&args.out, write_report_json(&rows, &fits, &table.rows).as_bytes())?;
    manifest.write_beside(&args.out)?;

    println!("recordings: {}", rows.len());
    println!("regressions: {}", fits.len());
    if let Some(best) = fits.iter().max_by(|a, b| a.r_squared.total_cmp(&b.r_squared)) {
        println!("best fit: {} (R^2 {:.3})", best.label, best.r_squared);
    }
    if let Some(top) = table.rows.iter().filter(|r| r.ratio.is_some()).max_by(|a, b| a.ratio.unwrap().total_cmp(&b.ratio.unwrap())) {
        println!(
            "strongest coincidence: {}/{} ratio {:.2} (p {:.2e})",
            top.feature_a,
            top.feature_b,
            top.ratio.unwrap(),
            top.p_value
        );
    }
    println!("report: {}", args.out.display());
    Ok(())
}

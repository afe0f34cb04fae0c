use aligncheck_core::model::{CorpusModel, ModelConfig, ModelError};

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::output::{read_alignments, write_atomic};
use crate::TrainArgs;

fn norm(w: &[f64]) -> f64 {
    w.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn run(args: &TrainArgs) -> CliResult<()> {
    let recs = read_alignments(&args.alignments)?;
    if let Some(id) = &args.exclude {
        if !recs.contains_key(id) {
            return Err(CliError::Input(format!("{}: no recording {id:?} to exclude", args.alignments.display())));
        }
    }
    let corpus: Vec<_> = recs.into_values().collect();
    let cfg = ModelConfig::default();
    let model = CorpusModel::train(&corpus, args.exclude.as_deref(), &cfg).map_err(|e| match e {
        ModelError::EmptyCorpus => CliError::Compute("empty corpus".into()),
        other => CliError::Compute(format!("{}: {other}", args.alignments.display())),
    })?;
    write_atomic(&args.out, model.to_json().as_bytes())?;

    let mut manifest = RunManifest::new("train").with_config(toml::to_string(&cfg).expect("config serializes"));
    manifest.add_input(&args.alignments)?;
    manifest.write_beside(&args.out)?;

    let used = corpus.iter().filter(|r| Some(r.rec_id.as_str()) != args.exclude.as_deref());
    let (n_recs, n_phones) = used.fold((0, 0), |(r, p), rec| (r + 1, p + rec.phones().len()));
    println!("recordings: {n_recs} ({n_phones} phones)");
    if let Some(id) = &args.exclude {
        println!("excluded: {id}");
    }
    println!("phone classes: {}", model.stats.classes().count());
    println!("logp weights: {:?} (norm {:.4})", model.logp_weights, norm(&model.logp_weights));
    println!(
        "duration weights: norm {:.4}, local rate mean {:.4}",
        norm(&model.duration_weights),
        model.local_rate_weight_mean()
    );
    println!("model: {}", args.out.display());
    Ok(())
}

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;
use synacc::datamodel::{embeddings_to_csv, model_records_to_jsonl, predictions_to_csv, Split};
use synacc::toygan::{run_toy, ToyConfig, ToyRun};

use super::frechet::{pool_report, ratio_csv, PoolEntry};
use super::{csv_bytes, fmt_opt, Global};
use crate::manifest::{report_json, sha256_hex, to_json_bytes, RunManifest};
use crate::output::OutputSet;

#[derive(Debug, Clone, Args, Serialize)]
pub struct ToyArgs {
    /// JSON toy configuration; missing fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Also write every classifier's penultimate-layer features.
    #[arg(long)]
    pub embeddings: bool,
}

const SPLITS: [Split; 3] = [Split::Train, Split::Test, Split::Syn];

pub fn load_config(path: Option<&Path>) -> Result<ToyConfig> {
    let Some(path) = path else {
        return Ok(ToyConfig::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Every file of a toy run, keyed by path relative to the output directory.
pub fn toy_outputs(run: &ToyRun, manifest: &RunManifest, embeddings: bool) -> Result<OutputSet> {
    let mut out = OutputSet::new();
    out.add("summary.json", report_json(manifest, &run.summary)?);
    out.add("score.json", report_json(manifest, &run.score)?);

    let threshold = run.config.well_trained_threshold;
    let entries: Vec<PoolEntry> = run
        .models
        .iter()
        .map(|m| PoolEntry {
            model_id: m.record.model_id.clone(),
            train_acc: m.record.train_acc,
            well_trained: m.record.train_acc > threshold,
            distances: m.distance.clone(),
        })
        .collect();
    out.add("ratios.csv", ratio_csv(&entries)?);
    out.add(
        "distances.json",
        report_json(manifest, &pool_report(entries, threshold))?,
    );

    out.add(
        "scatter.csv",
        csv_bytes(
            &["model_id", "train_acc", "g_hat", "g_true", "gap_pred", "gap_true"],
            run.models.iter().map(|m| {
                let r = &m.record;
                let (gh, gt) = (r.syn_acc.expect("evaluated"), r.test_acc.expect("evaluated"));
                [
                    r.model_id.clone(),
                    r.train_acc.to_string(),
                    gh.to_string(),
                    gt.to_string(),
                    (r.train_acc - gh).to_string(),
                    (r.train_acc - gt).to_string(),
                ]
            }),
        )?,
    );
    out.add(
        "ratio_hist.csv",
        csv_bytes(
            &["lo", "hi", "syn_test_over_train_test", "syn_test_over_syn_train"],
            run.summary.ratio_histogram.iter().map(|b| {
                [
                    b.lo.to_string(),
                    fmt_opt(b.hi),
                    b.syn_test_over_train_test.to_string(),
                    b.syn_test_over_syn_train.to_string(),
                ]
            }),
        )?,
    );

    for (split, set) in SPLITS.iter().zip([&run.train, &run.test, &run.syn]) {
        out.add(format!("data/{split}.csv"), embeddings_to_csv(set));
    }
    let mut records = Vec::with_capacity(run.models.len());
    for m in &run.models {
        let id = &m.record.model_id;
        let mut rec = m.record.clone();
        let mut refs = BTreeMap::new();
        for (split, preds) in SPLITS.iter().zip(&m.predictions) {
            let rel = PathBuf::from(format!("predictions/{id}/{split}.csv"));
            out.add(rel.clone(), predictions_to_csv(preds));
            refs.insert(split.to_string(), rel);
        }
        if embeddings {
            for (split, set) in SPLITS.iter().zip(&m.embeddings) {
                out.add(format!("embeddings/{id}/{split}.csv"), embeddings_to_csv(set));
            }
        }
        rec.prediction_refs = Some(refs);
        records.push(rec);
    }
    out.add("records.jsonl", model_records_to_jsonl(&records));

    #[derive(Serialize)]
    struct Index<'a> {
        manifest: &'a RunManifest,
        outputs: BTreeMap<String, String>,
    }
    let outputs = out
        .files()
        .map(|(p, b)| (p.display().to_string(), sha256_hex(b)))
        .collect();
    out.add("manifest.json", to_json_bytes(&Index { manifest, outputs })?);
    Ok(out)
}

pub fn run(g: &Global, args: &ToyArgs) -> Result<()> {
    let Some(dir) = &g.out else {
        bail!("toy-e2e needs --out DIR");
    };
    let config = load_config(args.config.as_deref())?;
    let run = run_toy(&config, g.seed)?;

    let mut manifest = RunManifest::new("toy-e2e", g.seed)
        .with_config(&run.config)?
        .with_config(args)?;
    if let Some(p) = &args.config {
        manifest.record_input(p)?;
    }
    for (name, v) in [
        ("mixture", run.seeds.mixture),
        ("gan", run.seeds.gan),
        ("synthetic", run.seeds.synthetic),
        ("pool", run.seeds.pool),
        ("kfold", run.seeds.kfold),
    ] {
        manifest.seed(name, v);
    }
    toy_outputs(&run, &manifest, args.embeddings)?.commit(dir)
}

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use synacc::datamodel::{load_embeddings, load_model_records, LabeledEmbeddingSet, Split};
use synacc::frechet::{distance_report, DistanceReport};
use synacc::toygan::RatioStats;

use super::{csv_bytes, fmt_opt, sibling, Global};
use crate::manifest::{report_json, RunManifest};
use crate::output::write_atomic;

#[derive(Debug, Clone, Args, Serialize)]
pub struct FrechetArgs {
    /// Training-set embeddings (`example_id,label,f0,...`).
    #[arg(long, required_unless_present = "pool", conflicts_with = "pool")]
    pub train: Option<PathBuf>,

    /// Test-set embeddings.
    #[arg(long, required_unless_present = "pool", conflicts_with = "pool")]
    pub test: Option<PathBuf>,

    /// Embeddings of the GAN samples.
    #[arg(long, required_unless_present = "pool", conflicts_with = "pool")]
    pub syn: Option<PathBuf>,

    /// Directory holding `<model_id>/{train,test,syn}.csv` for every model in `--models`.
    #[arg(long, requires = "models")]
    pub pool: Option<PathBuf>,

    /// Model records; their train accuracy decides which models are well trained.
    #[arg(long)]
    pub models: Option<PathBuf>,

    /// Models with train accuracy strictly above this are well trained.
    #[arg(long, default_value_t = 0.97)]
    pub well_trained_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoolEntry {
    pub model_id: String,
    pub train_acc: f64,
    pub well_trained: bool,
    pub distances: DistanceReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WellTrainedSubset {
    pub threshold: f64,
    /// True when no model clears the threshold.
    pub empty: bool,
    pub model_ids: Vec<String>,
    pub ratio_syn_test_over_train_test: RatioStats,
    pub ratio_syn_test_over_syn_train: RatioStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoolReport {
    pub models: Vec<PoolEntry>,
    pub well_trained: WellTrainedSubset,
}

pub const RATIO_HEADER: [&str; 5] = [
    "model_id",
    "train_acc",
    "well_trained",
    "ratio_syn_test_over_train_test",
    "ratio_syn_test_over_syn_train",
];

fn defined(r: f64) -> Option<f64> {
    r.is_finite().then_some(r)
}

pub fn pool_report(entries: Vec<PoolEntry>, threshold: f64) -> PoolReport {
    let good: Vec<&PoolEntry> = entries.iter().filter(|e| e.well_trained).collect();
    let stats = |f: fn(&DistanceReport) -> f64| {
        let v: Vec<f64> = good.iter().filter_map(|e| defined(f(&e.distances))).collect();
        RatioStats::of(&v)
    };
    let well_trained = WellTrainedSubset {
        threshold,
        empty: good.is_empty(),
        model_ids: good.iter().map(|e| e.model_id.clone()).collect(),
        ratio_syn_test_over_train_test: stats(|d| d.ratio_syn_test_over_train_test),
        ratio_syn_test_over_syn_train: stats(|d| d.ratio_syn_test_over_syn_train),
    };
    PoolReport {
        models: entries,
        well_trained,
    }
}

pub fn ratio_csv(entries: &[PoolEntry]) -> Result<Vec<u8>> {
    csv_bytes(
        &RATIO_HEADER,
        entries.iter().map(|e| {
            [
                e.model_id.clone(),
                e.train_acc.to_string(),
                e.well_trained.to_string(),
                fmt_opt(defined(e.distances.ratio_syn_test_over_train_test)),
                fmt_opt(defined(e.distances.ratio_syn_test_over_syn_train)),
            ]
        }),
    )
}

fn load_triple(train: &Path, test: &Path, syn: &Path) -> Result<[LabeledEmbeddingSet<f64>; 3]> {
    Ok([
        load_embeddings(train, Split::Train)?,
        load_embeddings(test, Split::Test)?,
        load_embeddings(syn, Split::Syn)?,
    ])
}

pub fn run(g: &Global, args: &FrechetArgs) -> Result<()> {
    if !(args.well_trained_threshold.is_finite() && args.well_trained_threshold >= 0.0) {
        bail!("well-trained threshold must be finite and non-negative");
    }
    let mut manifest = RunManifest::new("frechet", g.seed).with_config(args)?;
    match (&args.pool, &args.models) {
        (Some(dir), Some(models)) => run_pool(g, args, &mut manifest, dir, models),
        _ => {
            let (train, test, syn) = match (&args.train, &args.test, &args.syn) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => bail!("--train, --test and --syn are all required without --pool"),
            };
            for p in [train, test, syn] {
                manifest.record_input(p)?;
            }
            let [a, b, c] = load_triple(train, test, syn)?;
            let report = distance_report(&a, &b, &c)?;
            g.emit(&report_json(&manifest, &report)?)
        }
    }
}

fn run_pool(g: &Global, args: &FrechetArgs, manifest: &mut RunManifest, dir: &Path, models: &Path) -> Result<()> {
    let mut records = load_model_records(models)?;
    records.sort_by(|a, b| a.model_id.cmp(&b.model_id));
    manifest.record_input(models)?;
    let paths: Vec<[PathBuf; 3]> = records
        .iter()
        .map(|m| ["train", "test", "syn"].map(|s| dir.join(&m.model_id).join(format!("{s}.csv"))))
        .collect();
    for (m, ps) in records.iter().zip(&paths) {
        for p in ps {
            manifest
                .record_input(p)
                .with_context(|| format!("model {:?}", m.model_id))?;
        }
    }

    let entries: Vec<PoolEntry> = records
        .par_iter()
        .zip(&paths)
        .map(|(m, [train, test, syn])| {
            let run = || -> Result<PoolEntry> {
                let [a, b, c] = load_triple(train, test, syn)?;
                Ok(PoolEntry {
                    model_id: m.model_id.clone(),
                    train_acc: m.train_acc,
                    well_trained: m.train_acc > args.well_trained_threshold,
                    distances: distance_report(&a, &b, &c)?,
                })
            };
            run().with_context(|| format!("model {:?}", m.model_id))
        })
        .collect::<Result<_>>()?;

    let ratios = ratio_csv(&entries)?;
    let report = pool_report(entries, args.well_trained_threshold);
    if report.well_trained.empty {
        log::warn!("no model has train accuracy above {}", args.well_trained_threshold);
    }
    let json = report_json(manifest, &report)?;
    g.emit(&json)?;
    if let Some(out) = &g.out {
        write_atomic(&sibling(out, "ratios.csv"), &ratios)?;
    }
    Ok(())
}

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use synacc::datamodel::load_model_records;
use synacc::predictor::predict_test_accuracy_in;
use synacc::scoring::{score_pool, R2Line, ScoreConfig};
use synacc::seed::derive_seed;

use super::{base_dir, record_prediction_inputs, Global};
use crate::manifest::{report_json, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LineArg {
    Identity,
    Ols,
}

impl From<LineArg> for R2Line {
    fn from(l: LineArg) -> Self {
        match l {
            LineArg::Identity => R2Line::Identity,
            LineArg::Ols => R2Line::Ols,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScoreArgs {
    /// Model records with test_acc, one JSON object per line.
    #[arg(long)]
    pub models: PathBuf,

    /// Folds for the cross-validated R^2.
    #[arg(long, default_value_t = 10)]
    pub k: usize,

    /// Line the headline R^2 is measured against.
    #[arg(long, value_enum, default_value_t = LineArg::Identity)]
    pub r2_line: LineArg,

    /// Regressor count for the adjusted R^2.
    #[arg(long, default_value_t = 1)]
    pub regressors: usize,
}

pub fn run(g: &Global, args: &ScoreArgs) -> Result<()> {
    let records = load_model_records(&args.models)?;
    let base = base_dir(&args.models);
    let mut manifest = RunManifest::new("score", g.seed).with_config(args)?;
    manifest.record_input(&args.models)?;
    record_prediction_inputs(&mut manifest, &records, base)?;

    let g_hat: Vec<f64> = records
        .par_iter()
        .map(|m| predict_test_accuracy_in(m, base).with_context(|| format!("model {:?}", m.model_id)))
        .collect::<Result<_>>()?;

    let config = ScoreConfig {
        k: args.k,
        seed: derive_seed(g.seed, "kfold"),
        regressors: args.regressors,
        r2_line: args.r2_line.into(),
    };
    manifest.seed("kfold", config.seed);
    let report = score_pool(&records, &g_hat, &config)?;
    g.emit(&report_json(&manifest, &report)?)
}

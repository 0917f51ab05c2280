use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use synacc::datamodel::load_model_records;
use synacc::predictor::{fit_calibration, predict_test_accuracy_in, LinearCalibration};
use synacc::seed::derive_seed;

use super::{base_dir, csv_bytes, fmt_opt, record_prediction_inputs, sibling, Global};
use crate::manifest::{to_json_bytes, RunManifest};
use crate::output::write_atomic;

#[derive(Debug, Clone, Args, Serialize)]
pub struct PredictArgs {
    /// Model records, one JSON object per line.
    #[arg(long)]
    pub models: PathBuf,

    /// Fit `g = a * g_hat + b` on part of the models with known test accuracy
    /// and apply it to all of them.
    #[arg(long)]
    pub calibrate: bool,

    /// Fraction of the models with known test accuracy used for fitting.
    #[arg(long, default_value_t = 0.5)]
    pub calibration_split: f64,
}

pub const HEADER: [&str; 6] = [
    "model_id",
    "g_hat",
    "g_calibrated",
    "gap_pred",
    "g_true",
    "calibration_role",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationSummary {
    pub fit: LinearCalibration<f64>,
    pub fit_models: Vec<String>,
    pub eval_models: Vec<String>,
}

/// Chooses the fitting subset among `labeled` model ids: ids are ordered by
/// a seeded hash, and the first `round(split * n)` are used for fitting.
pub fn calibration_partition(labeled: &[&str], split: f64, seed: u64) -> Result<(Vec<String>, Vec<String>)> {
    if !(split > 0.0 && split <= 1.0) {
        bail!("calibration split must be in (0, 1], got {split}");
    }
    let n_fit = (split * labeled.len() as f64).round() as usize;
    if n_fit < 2 {
        bail!(
            "calibration needs at least 2 fitting models; split {split} of {} models with test_acc gives {n_fit}",
            labeled.len()
        );
    }
    let mut order: Vec<(u64, &str)> = labeled.iter().map(|id| (derive_seed(seed, id), *id)).collect();
    order.sort();
    let ids: Vec<String> = order.into_iter().map(|(_, id)| id.to_owned()).collect();
    let (fit, eval) = ids.split_at(n_fit);
    Ok((fit.to_vec(), eval.to_vec()))
}

pub fn run(g: &Global, args: &PredictArgs) -> Result<()> {
    let records = load_model_records(&args.models)?;
    let base = base_dir(&args.models);
    let mut manifest = RunManifest::new("predict", g.seed).with_config(args)?;
    manifest.record_input(&args.models)?;
    record_prediction_inputs(&mut manifest, &records, base)?;

    let g_hat: Vec<f64> = records
        .par_iter()
        .map(|m| predict_test_accuracy_in(m, base).with_context(|| format!("model {:?}", m.model_id)))
        .collect::<Result<_>>()?;

    let mut calibration = None;
    let mut roles = vec![""; records.len()];
    if args.calibrate {
        let seed = derive_seed(g.seed, "calibration");
        manifest.seed("calibration", seed);
        let labeled: Vec<&str> = records
            .iter()
            .filter(|m| m.test_acc.is_some())
            .map(|m| m.model_id.as_str())
            .collect();
        let (fit_models, eval_models) = calibration_partition(&labeled, args.calibration_split, seed)?;
        let mut pairs = Vec::new();
        for (i, m) in records.iter().enumerate() {
            if fit_models.contains(&m.model_id) {
                roles[i] = "fit";
                pairs.push((g_hat[i], m.test_acc.expect("labeled")));
            } else {
                roles[i] = "eval";
            }
        }
        let fit = fit_calibration(&pairs).context("fitting the calibration")?;
        calibration = Some(CalibrationSummary {
            fit,
            fit_models,
            eval_models,
        });
    }

    let rows = records.iter().zip(&g_hat).zip(&roles).map(|((m, &gh), role)| {
        [
            m.model_id.clone(),
            gh.to_string(),
            fmt_opt(calibration.as_ref().map(|c| c.fit.apply(gh))),
            (m.train_acc - gh).to_string(),
            fmt_opt(m.test_acc),
            role.to_string(),
        ]
    });
    let csv = csv_bytes(&HEADER, rows)?;

    #[derive(Serialize)]
    struct Sidecar<'a> {
        manifest: &'a RunManifest,
        calibration: &'a Option<CalibrationSummary>,
    }
    let sidecar = to_json_bytes(&Sidecar {
        manifest: &manifest,
        calibration: &calibration,
    })?;
    g.emit(&csv)?;
    if let Some(out) = &g.out {
        write_atomic(&sibling(out, "manifest.json"), &sidecar)?;
    }
    Ok(())
}

//! Metrics for judging accuracy and generalization-gap predictions.

mod cmi;
mod rank;
mod regression;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use cmi::{
    build_pair_sign_table, cmi_score, conditional_mutual_information, CmiScore, ConditionKey, PairSign, PairSignTable,
    Sign,
};
pub use rank::kendall_tau;
pub use regression::{adjusted_r_squared, kfold_assignment, kfold_r_squared, r_squared};

use crate::datamodel::ModelRecord;
use crate::error::{Error, Result};
use crate::predictor::{fit_calibration, LinearCalibration};

/// Line the headline R^2 is measured against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum R2Line {
    /// `y = x`: the raw synthetic accuracy as the prediction.
    #[default]
    Identity,
    /// The least-squares line over the whole pool.
    Ols,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub k: usize,
    pub seed: u64,
    /// Regressor count for adjusted R^2.
    pub regressors: usize,
    pub r2_line: R2Line,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            k: 10,
            seed: 0,
            regressors: 1,
            r2_line: R2Line::Identity,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreReport {
    pub r2: f64,
    pub adjusted_r2: f64,
    pub kfold_r2: f64,
    pub kendall_tau: f64,
    pub cmi_per_hparam: BTreeMap<String, f64>,
    pub cmi_min: f64,
    pub cmi_per_hparam_x100: BTreeMap<String, f64>,
    pub cmi_min_x100: f64,
    pub cmi_dropped_ties: usize,
    /// Unadjusted R^2 of the least-squares calibration on the full pool.
    pub calibrated_r2: f64,
    pub calibration: LinearCalibration<f64>,
    pub n_models: usize,
    pub config: ScoreConfig,
}

/// Scores synthetic accuracies `g_hat` (one per model, same order) against
/// each model's `test_acc`. The CMI measure is the predicted gap
/// `train_acc - g_hat`.
pub fn score_pool(models: &[ModelRecord], g_hat: &[f64], config: &ScoreConfig) -> Result<ScoreReport> {
    if g_hat.len() != models.len() {
        return Err(Error::DimensionMismatch {
            expected: models.len(),
            got: g_hat.len(),
        });
    }
    let g: Vec<f64> = models
        .iter()
        .map(|m| {
            m.test_acc
                .ok_or_else(|| Error::invalid(format!("model {:?} has no test_acc", m.model_id)))
        })
        .collect::<Result<_>>()?;
    if config.k > models.len() {
        return Err(Error::invalid(format!(
            "k exceeds pool size ({} > {})",
            config.k,
            models.len()
        )));
    }
    let pairs: Vec<(f64, f64)> = g_hat.iter().copied().zip(g.iter().copied()).collect();

    let calibration = fit_calibration(&pairs)?;
    let line = match config.r2_line {
        R2Line::Identity => (1.0, 0.0),
        R2Line::Ols => (calibration.a, calibration.b),
    };
    let r2 = r_squared(&pairs, line)?;
    let calibrated_r2 = r_squared(&pairs, (calibration.a, calibration.b))?;
    let adjusted_r2 = adjusted_r_squared(calibrated_r2, pairs.len(), config.regressors)?;
    let kfold_r2 = kfold_r_squared(&pairs, config.k, config.seed)?;
    let tau = kendall_tau(g_hat, &g)?;

    let mu: Vec<f64> = models.iter().zip(g_hat).map(|(m, &s)| m.train_acc - s).collect();
    let cmi = cmi_score(models, &mu)?;

    Ok(ScoreReport {
        r2,
        adjusted_r2,
        kfold_r2,
        kendall_tau: tau,
        cmi_per_hparam_x100: cmi.per_hparam.iter().map(|(k, v)| (k.clone(), v * 100.0)).collect(),
        cmi_min_x100: cmi.min * 100.0,
        cmi_per_hparam: cmi.per_hparam,
        cmi_min: cmi.min,
        cmi_dropped_ties: cmi.dropped_ties,
        calibrated_r2,
        calibration,
        n_models: models.len(),
        config: *config,
    })
}

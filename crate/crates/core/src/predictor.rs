//! Test-accuracy prediction from synthetic accuracy.
//!
//! A classifier's accuracy on a labeled sample drawn from a conditional
//! generator trained on the same training set is used directly as the
//! estimate of its test accuracy. Two derived predictions are provided: the
//! generalization gap `train_acc - syn_acc`, and a least-squares linear
//! recalibration `a * syn_acc + b` fitted on a pool with known test accuracy.

use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::datamodel::{load_predictions, ModelRecord, PredictionSet, Split};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Fraction of rows whose prediction equals the true label.
pub fn accuracy(preds: &PredictionSet) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::invalid(format!(
            "accuracy of an empty {} prediction set",
            preds.split
        )));
    }
    let correct = preds.rows.iter().filter(|r| r.true_label == r.pred_label).count();
    Ok(correct as f64 / preds.len() as f64)
}

/// Logs a warning when fewer synthetic examples than training examples were
/// used. Returns whether the size contract holds.
pub fn check_synthetic_size(n_syn: usize, n_train: usize) -> bool {
    let ok = n_syn >= n_train;
    if !ok {
        warn!(
            "synthetic set has {n_syn} examples, fewer than the {n_train} training examples; \
             the synthetic accuracy may not have concentrated"
        );
    }
    ok
}

/// Synthetic accuracy of `m`, with relative prediction paths resolved against
/// `base_dir`. A stored `syn_acc` takes precedence over a prediction file.
pub fn predict_test_accuracy_in(m: &ModelRecord, base_dir: &Path) -> Result<f64> {
    if let Some(acc) = m.syn_acc {
        return Ok(acc);
    }
    let Some(rel) = m.prediction_ref(Split::Syn) else {
        return Err(Error::invalid(format!(
            "model {:?} has neither syn_acc nor a syn prediction file",
            m.model_id
        )));
    };
    let syn = load_predictions(base_dir.join(rel), Split::Syn)?;
    if let Some(train_rel) = m.prediction_ref(Split::Train) {
        let train = load_predictions(base_dir.join(train_rel), Split::Train)?;
        check_synthetic_size(syn.len(), train.len());
    }
    accuracy(&syn)
}

pub fn predict_test_accuracy(m: &ModelRecord) -> Result<f64> {
    predict_test_accuracy_in(m, Path::new(""))
}

/// `train_acc - syn_acc`; negative when the model does better on synthetic data.
pub fn predict_generalization_gap_in(m: &ModelRecord, base_dir: &Path) -> Result<f64> {
    Ok(m.train_acc - predict_test_accuracy_in(m, base_dir)?)
}

pub fn predict_generalization_gap(m: &ModelRecord) -> Result<f64> {
    predict_generalization_gap_in(m, Path::new(""))
}

/// `g = a * g_hat + b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearCalibration<T> {
    pub a: T,
    pub b: T,
    pub fit_count: usize,
}

impl<T: Scalar> LinearCalibration<T> {
    /// The uncalibrated predictor, `a = 1, b = 0`.
    pub fn identity() -> Self {
        LinearCalibration {
            a: T::one(),
            b: T::zero(),
            fit_count: 0,
        }
    }

    pub fn apply(&self, g_hat: T) -> T {
        self.a * g_hat + self.b
    }
}

pub fn apply_calibration<T: Scalar>(c: &LinearCalibration<T>, g_hat: T) -> T {
    c.apply(g_hat)
}

/// Ordinary least squares of `g` on `g_hat` over `(g_hat, g)` pairs.
pub fn fit_calibration<T: Scalar>(pool: &[(T, T)]) -> Result<LinearCalibration<T>> {
    if pool.len() < 2 {
        return Err(Error::invalid(format!(
            "calibration needs at least 2 points, got {}",
            pool.len()
        )));
    }
    if pool.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::invalid("calibration pool has non-finite values"));
    }
    let first = pool[0].0;
    if pool.iter().all(|&(x, _)| x == first) {
        return Err(Error::RankDeficient("all predicted accuracies are identical".into()));
    }
    let n = T::from_usize_lossy(pool.len());
    let mx = pool.iter().map(|p| p.0).sum::<T>() / n;
    let my = pool.iter().map(|p| p.1).sum::<T>() / n;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for &(x, y) in pool {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == T::zero() {
        return Err(Error::RankDeficient("predicted accuracies have zero spread".into()));
    }
    let a = sxy / sxx;
    let b = my - a * mx;
    Ok(LinearCalibration {
        a,
        b,
        fit_count: pool.len(),
    })
}

/// Apportions `total` items across weights by the largest-remainder rule.
/// Ties in the remainder go to the lower index.
pub fn largest_remainder_quotas(weights: &[f64], total: usize) -> Result<Vec<usize>> {
    if weights.is_empty() {
        return Err(Error::invalid("no weights to apportion"));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::invalid("weights must be finite and non-negative"));
    }
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return Err(Error::invalid("weights sum to zero"));
    }
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = quotas.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&i, &j| {
        let (ri, rj) = (exact[i] - exact[i].floor(), exact[j] - exact[j].floor());
        rj.total_cmp(&ri).then(i.cmp(&j))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        quotas[i] += 1;
    }
    Ok(quotas)
}

/// Per-class synthetic label counts for a sample of size `n` matching the
/// training class frequencies. Exact integer arithmetic, so `n` equal to the
/// training size reproduces the training histogram.
pub fn synthetic_label_quotas(train_counts: &[usize], n: usize) -> Result<Vec<usize>> {
    let total: usize = train_counts.iter().sum();
    if total == 0 {
        return Err(Error::invalid("training class counts are all zero"));
    }
    let (n128, t128) = (n as u128, total as u128);
    let mut quotas: Vec<usize> = train_counts
        .iter()
        .map(|&c| (n128 * c as u128 / t128) as usize)
        .collect();
    let rem: Vec<u128> = train_counts.iter().map(|&c| n128 * c as u128 % t128).collect();
    let assigned: usize = quotas.iter().sum();
    let mut order: Vec<usize> = (0..train_counts.len()).collect();
    order.sort_by(|&i, &j| rem[j].cmp(&rem[i]).then(i.cmp(&j)));
    for &i in order.iter().take(n - assigned) {
        quotas[i] += 1;
    }
    Ok(quotas)
}

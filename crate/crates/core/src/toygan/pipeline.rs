//! The whole experiment at toy scale: mixture data, conditional GAN,
//! synthetic sample, classifier pool, synthetic-accuracy predictions, scores
//! and per-classifier feature-space distances.

use std::collections::BTreeMap;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classifier::{penultimate_features, predictions, train_classifier_pool, PoolGrid};
use super::gan::{sample_synthetic, train_conditional_gan, GanConfig};
use super::mixture::{sample_mixture, MixtureSpec};
use super::mlp::MlpParams;
use crate::datamodel::{LabeledEmbeddingSet, ModelRecord, PredictionSet, Split};
use crate::error::{Error, Result};
use crate::frechet::{distance_report, DistanceReport};
use crate::predictor::{accuracy, check_synthetic_size, synthetic_label_quotas};
use crate::scoring::{score_pool, ScoreConfig, ScoreReport};
use crate::seed::derive_seed;

/// Ratio histogram bins: `[0, 0.1), [0.1, 0.2), ..., [1.9, 2.0)` and `[2.0, inf)`.
pub const HIST_BIN_WIDTH: f64 = 1.0 / BINS_PER_UNIT;
pub const HIST_BINS: usize = 20;
const BINS_PER_UNIT: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    pub mixture: MixtureSpec,
    pub gan: GanConfig,
    pub pool: PoolGrid,
    /// Synthetic sample size; the training size when absent.
    pub synthetic_size: Option<usize>,
    pub well_trained_threshold: f64,
    /// Folds for the cross-validated R^2. Small so that held-out folds of a
    /// 24-model pool hold several models.
    pub k: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            mixture: MixtureSpec::default(),
            gan: GanConfig::default(),
            pool: PoolGrid::default(),
            synthetic_size: None,
            well_trained_threshold: 0.97,
            k: 4,
        }
    }
}

/// Per-component seeds, all derived from one base seed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToySeeds {
    pub base: u64,
    pub mixture: u64,
    pub gan: u64,
    pub synthetic: u64,
    pub pool: u64,
    pub kfold: u64,
}

impl ToySeeds {
    pub fn derive(base: u64) -> Self {
        ToySeeds {
            base,
            mixture: derive_seed(base, "mixture"),
            gan: derive_seed(base, "gan"),
            synthetic: derive_seed(base, "synthetic"),
            pool: derive_seed(base, "pool"),
            kfold: derive_seed(base, "kfold"),
        }
    }
}

impl ToyConfig {
    /// The config with every embedded seed replaced by its derived value.
    pub fn resolved(&self, seeds: &ToySeeds) -> ToyConfig {
        let mut c = self.clone();
        c.mixture.seed = seeds.mixture;
        c.gan.seed = seeds.gan;
        c.synthetic_size = Some(self.synthetic_size.unwrap_or(self.mixture.train_size));
        c
    }
}

#[derive(Clone, Debug)]
pub struct ToyModel {
    pub record: ModelRecord,
    pub classifier: MlpParams<f64>,
    /// Train, test and synthetic predictions, in that order.
    pub predictions: [PredictionSet; 3],
    /// Penultimate-layer features of train, test and synthetic data.
    pub embeddings: [LabeledEmbeddingSet<f64>; 3],
    pub distance: DistanceReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioRow {
    pub model_id: String,
    pub train_acc: f64,
    pub well_trained: bool,
    /// `None` when the denominator distance is zero.
    pub ratio_syn_test_over_train_test: Option<f64>,
    pub ratio_syn_test_over_syn_train: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioStats {
    pub count: usize,
    pub below_one: usize,
    pub fraction_below_one: Option<f64>,
    pub min: Option<f64>,
    pub median: Option<f64>,
    pub max: Option<f64>,
}

impl RatioStats {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let below_one = v.iter().filter(|&&x| x < 1.0).count();
        let median = match n {
            0 => None,
            _ if n % 2 == 1 => Some(v[n / 2]),
            _ => Some(0.5 * (v[n / 2 - 1] + v[n / 2])),
        };
        RatioStats {
            count: n,
            below_one,
            fraction_below_one: (n > 0).then(|| below_one as f64 / n as f64),
            min: v.first().copied(),
            median,
            max: v.last().copied(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistBin {
    pub lo: f64,
    /// `None` for the open last bin.
    pub hi: Option<f64>,
    pub syn_test_over_train_test: usize,
    pub syn_test_over_syn_train: usize,
}

pub fn ratio_histogram(a: &[f64], b: &[f64]) -> Vec<HistBin> {
    let bin = |x: f64| ((x * BINS_PER_UNIT).floor().max(0.0) as usize).min(HIST_BINS);
    let mut bins: Vec<HistBin> = (0..=HIST_BINS)
        .map(|i| HistBin {
            // dividing keeps edges at exact decimals
            lo: i as f64 / BINS_PER_UNIT,
            hi: (i < HIST_BINS).then(|| (i + 1) as f64 / BINS_PER_UNIT),
            syn_test_over_train_test: 0,
            syn_test_over_syn_train: 0,
        })
        .collect();
    for &x in a {
        bins[bin(x)].syn_test_over_train_test += 1;
    }
    for &x in b {
        bins[bin(x)].syn_test_over_syn_train += 1;
    }
    bins
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ToySummary {
    pub n_models: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub n_syn: usize,
    pub kendall_tau: f64,
    pub r2: f64,
    pub adjusted_r2: f64,
    pub kfold_r2: f64,
    pub cmi_min: f64,
    pub cmi_min_x100: f64,
    /// Distance from each class's synthetic mean to its true mixture mean.
    pub gan_class_mean_error: BTreeMap<String, f64>,
    pub well_trained_threshold: f64,
    pub n_well_trained: usize,
    pub ratios: Vec<RatioRow>,
    /// Over well-trained classifiers only.
    pub ratio_syn_test_over_train_test: RatioStats,
    pub ratio_syn_test_over_syn_train: RatioStats,
    pub ratio_histogram: Vec<HistBin>,
}

#[derive(Clone, Debug)]
pub struct ToyRun {
    pub config: ToyConfig,
    pub seeds: ToySeeds,
    pub train: LabeledEmbeddingSet<f64>,
    pub test: LabeledEmbeddingSet<f64>,
    pub syn: LabeledEmbeddingSet<f64>,
    pub models: Vec<ToyModel>,
    pub score: ScoreReport,
    pub summary: ToySummary,
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.context(format!("stage {name}")))
}

fn finite_ratio(r: f64) -> Option<f64> {
    r.is_finite().then_some(r)
}

pub fn run_toy(config: &ToyConfig, base_seed: u64) -> Result<ToyRun> {
    let seeds = ToySeeds::derive(base_seed);
    let config = config.resolved(&seeds);
    // thresholds above 1 are allowed and select nothing
    if !(config.well_trained_threshold >= 0.0 && config.well_trained_threshold.is_finite()) {
        return Err(Error::invalid("well_trained_threshold must be finite and non-negative"));
    }

    info!("sampling mixture");
    let train: LabeledEmbeddingSet<f64> = stage("mixture", sample_mixture(&config.mixture, Split::Train))?;
    let test: LabeledEmbeddingSet<f64> = stage("mixture", sample_mixture(&config.mixture, Split::Test))?;

    info!("training conditional GAN ({} steps)", config.gan.steps);
    let gan = stage("gan", train_conditional_gan(&train, &config.gan))?;
    let n_syn = config.synthetic_size.expect("resolved");
    check_synthetic_size(n_syn, train.len());
    let quotas = stage("synthetic", synthetic_label_quotas(&train.class_counts(), n_syn))?;
    let syn = stage("synthetic", sample_synthetic(&gan, n_syn, &quotas, seeds.synthetic))?;

    info!("training {} classifiers", config.pool.len());
    let pool = stage("pool", train_classifier_pool(&train, &config.pool, seeds.pool))?;

    info!("predicting and measuring feature distances");
    let models: Vec<ToyModel> = stage(
        "evaluation",
        pool.into_par_iter()
            .map(|(mut record, classifier)| {
                let id = record.model_id.clone();
                let eval = || -> Result<ToyModel> {
                    let preds = [
                        predictions(&classifier, &train)?,
                        predictions(&classifier, &test)?,
                        predictions(&classifier, &syn)?,
                    ];
                    record.test_acc = Some(accuracy(&preds[1])?);
                    record.syn_acc = Some(accuracy(&preds[2])?);
                    let embeddings = [
                        penultimate_features(&classifier, &train)?,
                        penultimate_features(&classifier, &test)?,
                        penultimate_features(&classifier, &syn)?,
                    ];
                    let distance = distance_report(&embeddings[0], &embeddings[1], &embeddings[2])?;
                    Ok(ToyModel {
                        record,
                        classifier,
                        predictions: preds,
                        embeddings,
                        distance,
                    })
                };
                eval().map_err(|e| e.context(format!("model {id}")))
            })
            .collect(),
    )?;

    let records: Vec<ModelRecord> = models.iter().map(|m| m.record.clone()).collect();
    let g_hat: Vec<f64> = records.iter().map(|r| r.syn_acc.expect("set above")).collect();
    let score_cfg = ScoreConfig {
        k: config.k,
        seed: seeds.kfold,
        ..ScoreConfig::default()
    };
    let score = stage("scoring", score_pool(&records, &g_hat, &score_cfg))?;

    let summary = summarize(&config, &train, &test, &syn, &models, &score);
    Ok(ToyRun {
        config,
        seeds,
        train,
        test,
        syn,
        models,
        score,
        summary,
    })
}

fn summarize(
    config: &ToyConfig,
    train: &LabeledEmbeddingSet<f64>,
    test: &LabeledEmbeddingSet<f64>,
    syn: &LabeledEmbeddingSet<f64>,
    models: &[ToyModel],
    score: &ScoreReport,
) -> ToySummary {
    let threshold = config.well_trained_threshold;
    let ratios: Vec<RatioRow> = models
        .iter()
        .map(|m| RatioRow {
            model_id: m.record.model_id.clone(),
            train_acc: m.record.train_acc,
            well_trained: m.record.train_acc > threshold,
            ratio_syn_test_over_train_test: finite_ratio(m.distance.ratio_syn_test_over_train_test),
            ratio_syn_test_over_syn_train: finite_ratio(m.distance.ratio_syn_test_over_syn_train),
        })
        .collect();
    let well: Vec<&RatioRow> = ratios.iter().filter(|r| r.well_trained).collect();
    let a: Vec<f64> = well.iter().filter_map(|r| r.ratio_syn_test_over_train_test).collect();
    let b: Vec<f64> = well.iter().filter_map(|r| r.ratio_syn_test_over_syn_train).collect();

    let mut gan_class_mean_error = BTreeMap::new();
    let counts = syn.class_counts();
    for (c, comp) in config.mixture.components.iter().enumerate() {
        if counts[c] == 0 {
            continue;
        }
        let dist2: f64 = (0..syn.dim)
            .map(|j| {
                let mean = syn
                    .rows
                    .iter()
                    .filter(|r| r.label.index() == c)
                    .map(|r| r.vector[j])
                    .sum::<f64>()
                    / counts[c] as f64;
                (mean - comp.mean[j]).powi(2)
            })
            .sum();
        gan_class_mean_error.insert(syn.classes.names()[c].clone(), dist2.sqrt());
    }

    ToySummary {
        n_models: models.len(),
        n_train: train.len(),
        n_test: test.len(),
        n_syn: syn.len(),
        kendall_tau: score.kendall_tau,
        r2: score.r2,
        adjusted_r2: score.adjusted_r2,
        kfold_r2: score.kfold_r2,
        cmi_min: score.cmi_min,
        cmi_min_x100: score.cmi_min_x100,
        gan_class_mean_error,
        well_trained_threshold: threshold,
        n_well_trained: well.len(),
        ratio_syn_test_over_train_test: RatioStats::of(&a),
        ratio_syn_test_over_syn_train: RatioStats::of(&b),
        ratio_histogram: ratio_histogram(&a, &b),
        ratios,
    }
}

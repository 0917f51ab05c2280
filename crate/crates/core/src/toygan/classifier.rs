//! Softmax MLP classifiers trained by minibatch SGD with momentum, and the
//! hyperparameter-grid pool built from them.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mlp::{mlp_backward_acc, mlp_forward, Activation, MlpGrads, MlpParams};
use crate::datamodel::{
    ClassId, EmbeddingRow, HParamValue, LabeledEmbeddingSet, ModelRecord, PredictionRow, PredictionSet,
};
use crate::error::{Error, Result};
use crate::predictor::accuracy;
use crate::scalar::Scalar;
use crate::seed::{derive_seed, rng_for};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub width: usize,
    /// Number of hidden layers, all of `width` units.
    pub depth: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch: usize,
    pub momentum: f64,
    pub activation: Activation,
    pub seed: u64,
}

/// Cartesian grid of classifier hyperparameters. Points are enumerated with
/// `seeds` varying fastest and `widths` slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolGrid {
    pub widths: Vec<usize>,
    pub lrs: Vec<f64>,
    pub weight_decays: Vec<f64>,
    pub epochs: Vec<usize>,
    pub seeds: Vec<u64>,
    pub depth: usize,
    pub batch: usize,
    pub momentum: f64,
    pub activation: Activation,
}

impl Default for PoolGrid {
    /// 2 x 2 x 2 x 3 x 1 = 24 classifiers. The small learning rate and short
    /// schedules leave part of the pool under-trained, which spreads accuracies.
    fn default() -> Self {
        PoolGrid {
            widths: vec![8, 32],
            lrs: vec![0.1, 0.003],
            weight_decays: vec![0.0, 1e-3],
            epochs: vec![1, 4, 40],
            seeds: vec![0],
            depth: 2,
            batch: 32,
            momentum: 0.9,
            activation: Activation::Relu,
        }
    }
}

impl PoolGrid {
    pub fn len(&self) -> usize {
        self.widths.len() * self.lrs.len() * self.weight_decays.len() * self.epochs.len() * self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Vec<ClassifierConfig> {
        let mut out = Vec::with_capacity(self.len());
        for &width in &self.widths {
            for &lr in &self.lrs {
                for &weight_decay in &self.weight_decays {
                    for &epochs in &self.epochs {
                        for &seed in &self.seeds {
                            out.push(ClassifierConfig {
                                width,
                                depth: self.depth,
                                lr,
                                weight_decay,
                                epochs,
                                batch: self.batch,
                                momentum: self.momentum,
                                activation: self.activation,
                                seed,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

fn softmax_in_place<T: Scalar>(v: &mut [T]) {
    let max = v.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Trains one classifier on `train`; `seed` keys both initialization and
/// minibatch order.
pub fn train_classifier<T: Scalar>(
    train: &LabeledEmbeddingSet<T>,
    cfg: &ClassifierConfig,
    seed: u64,
) -> Result<MlpParams<T>> {
    if cfg.width == 0 || cfg.depth == 0 || cfg.batch == 0 {
        return Err(Error::invalid("width, depth and batch must be positive"));
    }
    if !(cfg.lr > 0.0 && cfg.weight_decay >= 0.0 && (0.0..1.0).contains(&cfg.momentum)) {
        return Err(Error::invalid("need lr > 0, weight_decay >= 0 and momentum in [0, 1)"));
    }
    if train.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    let k = train.classes.len();
    let mut sizes = vec![train.dim];
    sizes.extend(std::iter::repeat_n(cfg.width, cfg.depth));
    sizes.push(k);
    let mut params = MlpParams::random(&sizes, cfg.activation, &mut rng_for(seed, "classifier/init"))?;
    let mut velocity = MlpGrads::zeros_like(&params);
    let mut rng = rng_for(seed, "classifier/order");
    let (lr, mu, wd) = (T::lit(cfg.lr), T::lit(cfg.momentum), T::lit(cfg.weight_decay));
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut step = 0;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch) {
            let mut grads = MlpGrads::zeros_like(&params);
            let mut loss = T::zero();
            for &i in chunk {
                let row = &train.rows[i];
                let (mut p, cache) = mlp_forward(&params, &row.vector)?;
                softmax_in_place(&mut p);
                let y = row.label.index();
                loss -= p[y].max(T::min_positive_value()).ln();
                p[y] -= T::one();
                mlp_backward_acc(&params, &cache, &p, &mut grads)?;
            }
            let inv = T::one() / T::from_usize_lossy(chunk.len());
            if !(loss * inv).is_finite() {
                return Err(Error::Diverged {
                    step,
                    what: "classifier loss".into(),
                });
            }
            grads.scale(inv);
            for (g, l) in grads.layers.iter_mut().zip(&params.layers) {
                for (gw, &w) in g.weight.as_mut_slice().iter_mut().zip(l.weight.as_slice()) {
                    *gw += wd * w;
                }
            }
            for (v, &g) in velocity.values_mut().zip(grads.values()) {
                *v = mu * *v + g;
            }
            for (p, &v) in params.values_mut().zip(velocity.values()) {
                *p -= lr * v;
            }
            if !params.is_finite() {
                return Err(Error::Diverged {
                    step,
                    what: "classifier parameters".into(),
                });
            }
            step += 1;
        }
    }
    Ok(params)
}

/// Arg-max of the logits; ties go to the lower class id.
pub fn predict_labels<T: Scalar>(clf: &MlpParams<T>, data: &LabeledEmbeddingSet<T>) -> Result<Vec<ClassId>> {
    data.rows
        .iter()
        .map(|r| {
            let (logits, _) = mlp_forward(clf, &r.vector)?;
            let mut best = 0;
            for (c, &v) in logits.iter().enumerate() {
                if v > logits[best] {
                    best = c;
                }
            }
            Ok(ClassId(best as u32))
        })
        .collect()
}

pub fn predictions<T: Scalar>(clf: &MlpParams<T>, data: &LabeledEmbeddingSet<T>) -> Result<PredictionSet> {
    if clf.output_dim() != data.classes.len() {
        return Err(Error::DimensionMismatch {
            expected: data.classes.len(),
            got: clf.output_dim(),
        });
    }
    let labels = predict_labels(clf, data)?;
    Ok(PredictionSet {
        split: data.split,
        classes: data.classes.clone(),
        rows: data
            .rows
            .iter()
            .zip(labels)
            .map(|(r, pred_label)| PredictionRow {
                example_id: r.example_id.clone(),
                true_label: r.label,
                pred_label,
            })
            .collect(),
    })
}

pub fn classifier_accuracy<T: Scalar>(clf: &MlpParams<T>, data: &LabeledEmbeddingSet<T>) -> Result<f64> {
    accuracy(&predictions(clf, data)?)
}

fn hparams(cfg: &ClassifierConfig) -> std::collections::BTreeMap<String, HParamValue> {
    [
        ("width", cfg.width as f64),
        ("lr", cfg.lr),
        ("weight_decay", cfg.weight_decay),
        ("epochs", cfg.epochs as f64),
        ("seed", cfg.seed as f64),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_owned(), HParamValue::Num(v)))
    .collect()
}

/// One classifier per grid point, trained in parallel. Point `i` gets model id
/// `clf{i:02}` and a seed derived from `(base_seed, i, grid seed)`.
pub fn train_classifier_pool<T: Scalar>(
    train: &LabeledEmbeddingSet<T>,
    grid: &PoolGrid,
    base_seed: u64,
) -> Result<Vec<(ModelRecord, MlpParams<T>)>> {
    let points = grid.points();
    if points.is_empty() {
        return Err(Error::invalid("classifier grid is empty"));
    }
    points
        .par_iter()
        .enumerate()
        .map(|(i, cfg)| {
            let seed = derive_seed(base_seed, &format!("pool/{i}/{}", cfg.seed));
            let params = train_classifier(train, cfg, seed)?;
            let mut record = ModelRecord::new(format!("clf{i:02}"), classifier_accuracy(&params, train)?);
            record.hparams = hparams(cfg);
            Ok((record, params))
        })
        .collect()
}

/// Activations entering the final linear layer, with the data's labels.
pub fn penultimate_features<T: Scalar>(
    clf: &MlpParams<T>,
    data: &LabeledEmbeddingSet<T>,
) -> Result<LabeledEmbeddingSet<T>> {
    let n = clf.layers.len();
    if n < 2 {
        return Err(Error::invalid("penultimate features need at least 2 layers"));
    }
    let rows = data
        .rows
        .iter()
        .map(|r| {
            let (_, mut cache) = mlp_forward(clf, &r.vector)?;
            Ok(EmbeddingRow {
                example_id: r.example_id.clone(),
                label: r.label,
                vector: cache.post.swap_remove(n - 2),
            })
        })
        .collect::<Result<_>>()?;
    LabeledEmbeddingSet::new(data.split, clf.layers[n - 1].inputs(), data.classes.clone(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::Split;
    use crate::numerics::Matrix;
    use crate::toygan::mixture::{sample_mixture, MixtureComponent, MixtureSpec};
    use crate::toygan::mlp::Layer;

    fn separable() -> LabeledEmbeddingSet<f64> {
        let comp = |m: f64| MixtureComponent {
            mean: vec![m, 0.5 * m],
            cov: vec![vec![0.3, 0.0], vec![0.0, 0.3]],
            weight: 0.5,
        };
        let spec = MixtureSpec {
            components: vec![comp(-2.0), comp(2.0)],
            train_size: 200,
            test_size: 4,
            seed: 11,
        };
        sample_mixture(&spec, Split::Train).unwrap()
    }

    fn cfg(epochs: usize) -> ClassifierConfig {
        let p = PoolGrid::default();
        ClassifierConfig {
            width: 32,
            depth: p.depth,
            lr: 0.1,
            weight_decay: 0.0,
            epochs,
            batch: p.batch,
            momentum: p.momentum,
            activation: p.activation,
            seed: 0,
        }
    }

    #[test]
    fn zero_epochs_keeps_initialization() {
        let data = separable();
        let a = train_classifier(&data, &cfg(0), 4).unwrap();
        let init = MlpParams::random(&[2, 32, 32, 2], Activation::Relu, &mut rng_for(4, "classifier/init")).unwrap();
        assert_eq!(a, init);
        let acc = classifier_accuracy(&a, &data).unwrap();
        assert!((0.0..=1.0).contains(&acc));
    }

    #[test]
    fn well_trained_on_separable_data() {
        let data = separable();
        let clf = train_classifier(&data, &cfg(30), 4).unwrap();
        assert!(classifier_accuracy(&clf, &data).unwrap() >= 0.97);
        assert_eq!(clf, train_classifier(&data, &cfg(30), 4).unwrap());
    }

    #[test]
    fn pool_size_is_grid_cardinality() {
        let grid = PoolGrid {
            widths: vec![4, 8],
            lrs: vec![0.1, 0.05],
            weight_decays: vec![0.0, 1e-3],
            epochs: vec![1],
            seeds: vec![0],
            ..PoolGrid::default()
        };
        let pool = train_classifier_pool(&separable(), &grid, 3).unwrap();
        assert_eq!(pool.len(), 8);
        assert_eq!(pool[7].0.model_id, "clf07");
        assert_eq!(pool[7].0.hparams["width"], HParamValue::Num(8.0));
        let empty = PoolGrid { seeds: vec![], ..grid };
        assert!(train_classifier_pool(&separable(), &empty, 3).is_err());
    }

    #[test]
    fn penultimate_layer_of_two_layer_net() {
        let clf = MlpParams::new(
            vec![
                Layer {
                    weight: Matrix::from_rows(&[vec![1.0, -1.0], vec![0.5, 2.0], vec![-1.0, 0.0]]).unwrap(),
                    bias: vec![0.1, 0.0, 0.2],
                },
                Layer::zeros(3, 2),
            ],
            Activation::Tanh,
        )
        .unwrap();
        let data = separable();
        let feats = penultimate_features(&clf, &data).unwrap();
        assert_eq!(feats.dim, 3);
        let x = &data.rows[0].vector;
        let expected = [
            (x[0] - x[1] + 0.1).tanh(),
            (0.5 * x[0] + 2.0 * x[1]).tanh(),
            (-x[0] + 0.2).tanh(),
        ];
        for (a, b) in feats.rows[0].vector.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        let single = MlpParams::<f64>::zeros(&[2, 2], Activation::Tanh).unwrap();
        assert!(penultimate_features(&single, &data).is_err());
    }
}

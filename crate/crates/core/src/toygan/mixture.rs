//! Labeled Gaussian mixtures: the toy data distribution.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::datamodel::{ClassId, ClassSet, EmbeddingRow, LabeledEmbeddingSet, Split};
use crate::error::{Error, Result};
use crate::numerics::{psd_sqrt, SymMatrix};
use crate::predictor::largest_remainder_quotas;
use crate::scalar::Scalar;
use crate::seed::rng_for;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub mean: Vec<f64>,
    /// Row-major covariance.
    pub cov: Vec<Vec<f64>>,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixtureSpec {
    /// One component per class; class `k` is named `c{k}` (zero-padded).
    pub components: Vec<MixtureComponent>,
    pub train_size: usize,
    pub test_size: usize,
    pub seed: u64,
}

impl Default for MixtureSpec {
    /// Four anisotropic classes around the origin. Adjacent classes overlap a
    /// little so accuracy varies across classifiers.
    fn default() -> Self {
        let comp = |mean: [f64; 2], cov: [[f64; 2]; 2]| MixtureComponent {
            mean: mean.to_vec(),
            cov: cov.iter().map(|r| r.to_vec()).collect(),
            weight: 0.25,
        };
        MixtureSpec {
            components: vec![
                comp([1.5, 1.5], [[0.5, 0.2], [0.2, 0.3]]),
                comp([-1.5, 1.5], [[0.3, 0.0], [0.0, 0.6]]),
                comp([-1.5, -1.5], [[0.5, -0.2], [-0.2, 0.3]]),
                comp([1.5, -1.5], [[0.4, 0.1], [0.1, 0.4]]),
            ],
            train_size: 400,
            test_size: 2000,
            seed: 0,
        }
    }
}

impl MixtureSpec {
    pub fn num_classes(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, |c| c.mean.len())
    }

    pub fn class_names(&self) -> Vec<String> {
        class_names(self.num_classes())
    }

    pub fn classes(&self) -> ClassSet {
        ClassSet::from_labels(self.class_names())
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes() < 2 {
            return Err(Error::invalid("a mixture needs at least 2 classes"));
        }
        let dim = self.dim();
        if dim == 0 {
            return Err(Error::invalid("mixture dimension must be positive"));
        }
        let mut total = 0.0;
        for (k, c) in self.components.iter().enumerate() {
            if c.mean.len() != dim || c.cov.len() != dim || c.cov.iter().any(|r| r.len() != dim) {
                return Err(Error::invalid(format!("component {k} does not have dimension {dim}")));
            }
            if c.mean.iter().chain(c.cov.iter().flatten()).any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("component {k} has non-finite parameters")));
            }
            if !(c.weight >= 0.0 && c.weight.is_finite()) {
                return Err(Error::invalid(format!("component {k} has invalid weight {}", c.weight)));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(())
    }
}

/// `c0, c1, ...`, zero-padded so that lexicographic order is numeric order
/// and class `k` gets id `k`.
pub fn class_names(k: usize) -> Vec<String> {
    let width = k.saturating_sub(1).to_string().len();
    (0..k).map(|i| format!("c{i:0width$}")).collect()
}

/// Draws the train or test split. Rows are grouped by class; class counts are
/// the largest-remainder quotas of the weights.
pub fn sample_mixture<T: Scalar>(spec: &MixtureSpec, split: Split) -> Result<LabeledEmbeddingSet<T>> {
    spec.validate()?;
    let size = match split {
        Split::Train => spec.train_size,
        Split::Test => spec.test_size,
        Split::Syn => return Err(Error::invalid("the mixture only has train and test splits")),
    };
    let k = spec.num_classes();
    if size < 2 * k {
        return Err(Error::invalid(format!(
            "{split} size {size} is below 2 per class ({k} classes)"
        )));
    }
    let weights: Vec<f64> = spec.components.iter().map(|c| c.weight).collect();
    let quotas = largest_remainder_quotas(&weights, size)?;
    let dim = spec.dim();
    let mut rng = rng_for(spec.seed, &format!("mixture/{split}"));
    let mut rows = Vec::with_capacity(size);
    for (ki, (comp, &count)) in spec.components.iter().zip(&quotas).enumerate() {
        let cov =
            SymMatrix::from_rows(&comp.cov).map_err(|e| Error::invalid(format!("component {ki} covariance: {e}")))?;
        let root = psd_sqrt(&cov)?;
        for _ in 0..count {
            let z: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let vector = (0..dim)
                .map(|i| {
                    let shift: f64 = (0..dim).map(|j| root.get(i, j) * z[j]).sum();
                    T::lit(comp.mean[i] + shift)
                })
                .collect();
            rows.push(EmbeddingRow {
                example_id: format!("{split}{}", rows.len()),
                label: ClassId(ki as u32),
                vector,
            });
        }
    }
    LabeledEmbeddingSet::new(split, dim, spec.classes(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_class(cov: f64) -> MixtureSpec {
        let comp = |m: f64| MixtureComponent {
            mean: vec![m, 0.0],
            cov: vec![vec![cov, 0.0], vec![0.0, cov]],
            weight: 0.5,
        };
        MixtureSpec {
            components: vec![comp(-2.0), comp(2.0)],
            train_size: 100,
            test_size: 10,
            seed: 5,
        }
    }

    #[test]
    fn equal_weights_split_evenly() {
        let s: LabeledEmbeddingSet<f64> = sample_mixture(&two_class(1.0), Split::Train).unwrap();
        assert_eq!(s.class_counts(), vec![50, 50]);
        assert_eq!(s.classes.names(), &["c0".to_owned(), "c1".to_owned()]);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a: LabeledEmbeddingSet<f64> = sample_mixture(&two_class(1.0), Split::Train).unwrap();
        let b: LabeledEmbeddingSet<f64> = sample_mixture(&two_class(1.0), Split::Train).unwrap();
        assert_eq!(a, b);
        let t: LabeledEmbeddingSet<f64> = sample_mixture(&two_class(1.0), Split::Test).unwrap();
        assert_ne!(a.rows[0].vector, t.rows[0].vector);
    }

    #[test]
    fn zero_covariance_collapses_to_mean() {
        let s: LabeledEmbeddingSet<f64> = sample_mixture(&two_class(0.0), Split::Train).unwrap();
        for r in &s.rows {
            let m = if r.label.0 == 0 { -2.0 } else { 2.0 };
            assert_eq!(r.vector, vec![m, 0.0]);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = two_class(1.0);
        s.test_size = 3;
        assert!(sample_mixture::<f64>(&s, Split::Test).is_err());
        let mut s = two_class(1.0);
        s.components[0].weight = 0.4;
        assert!(s.validate().is_err());
        let mut s = two_class(1.0);
        s.components[0].cov = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(sample_mixture::<f64>(&s, Split::Train).unwrap_err().is_numerical());
    }

    #[test]
    fn class_names_sort_numerically() {
        let names = class_names(12);
        assert_eq!(names[0], "c00");
        let set = ClassSet::from_labels(&names);
        assert_eq!(set.id("c10"), Some(ClassId(10)));
    }
}

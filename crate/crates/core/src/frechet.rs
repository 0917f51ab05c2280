//! Class-conditional Fréchet distance between labeled embedding sets.
//!
//! For one pair of Gaussians the distance is
//! `||mu_1 - mu_2||^2 + Tr[C_1 + C_2 - 2 (C_1 C_2)^{1/2}]`; the
//! class-conditional version sums it over classes, unnormalized.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::datamodel::{ClassId, ClassSet, LabeledEmbeddingSet};
use crate::error::{Error, Result};
use crate::numerics::{mean_and_cov_with, trace_sqrt_product, CovDivisor, SymMatrix};
use crate::scalar::Scalar;

/// Mean and covariance of one Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments<T> {
    pub mean: Vec<T>,
    pub cov: SymMatrix<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassStats<T> {
    pub count: usize,
    pub moments: Moments<T>,
}

/// Per-class moments of an embedding set.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianStats<T> {
    pub dim: usize,
    pub classes: ClassSet,
    pub per_class: BTreeMap<ClassId, ClassStats<T>>,
}

impl<T: Scalar> GaussianStats<T> {
    fn by_name(&self) -> BTreeMap<&str, &ClassStats<T>> {
        self.per_class
            .iter()
            .map(|(&id, s)| (self.classes.name(id), s))
            .collect()
    }
}

pub fn gaussian_stats<T: Scalar>(set: &LabeledEmbeddingSet<T>) -> Result<GaussianStats<T>> {
    gaussian_stats_with(set, CovDivisor::Unbiased)
}

pub fn gaussian_stats_with<T: Scalar>(set: &LabeledEmbeddingSet<T>, divisor: CovDivisor) -> Result<GaussianStats<T>> {
    let mut groups: BTreeMap<ClassId, Vec<&[T]>> = BTreeMap::new();
    for r in &set.rows {
        groups.entry(r.label).or_default().push(&r.vector);
    }
    if let Some((&id, rows)) = groups.iter().find(|(_, rows)| rows.len() < 2) {
        return Err(Error::invalid(format!(
            "class {:?} in {} split has {} example(s); at least 2 are required",
            set.classes.name(id),
            set.split,
            rows.len()
        )));
    }
    let stats: Vec<(ClassId, ClassStats<T>)> = groups
        .into_par_iter()
        .map(|(id, rows)| {
            let (mean, cov) = mean_and_cov_with(&rows, set.dim, divisor)?;
            Ok((
                id,
                ClassStats {
                    count: rows.len(),
                    moments: Moments { mean, cov },
                },
            ))
        })
        .collect::<Result<_>>()?;
    Ok(GaussianStats {
        dim: set.dim,
        classes: set.classes.clone(),
        per_class: stats.into_iter().collect(),
    })
}

/// Fréchet distance between two Gaussians, clamped at zero.
pub fn frechet_distance<T: Scalar>(p: &Moments<T>, q: &Moments<T>) -> Result<T> {
    let dim = p.mean.len();
    for got in [q.mean.len(), p.cov.n(), q.cov.n()] {
        if got != dim {
            return Err(Error::DimensionMismatch { expected: dim, got });
        }
    }
    let mean_term: T = p.mean.iter().zip(&q.mean).map(|(&a, &b)| (a - b) * (a - b)).sum();
    let cross = trace_sqrt_product(&p.cov, &q.cov)?;
    let traces = p.cov.trace() + q.cov.trace();
    let d = mean_term + traces - T::lit(2.0) * cross;
    // Cancellation leaves noise of order eps * dim * trace; identical
    // moments should give exactly zero.
    let noise = T::epsilon() * T::lit(64.0) * T::from_usize_lossy(dim.max(1)) * traces;
    Ok(if d <= noise { T::zero() } else { d })
}

/// Per-class Fréchet terms keyed by class name, in class-name order.
pub fn class_conditional_terms<T: Scalar>(s: &GaussianStats<T>, t: &GaussianStats<T>) -> Result<BTreeMap<String, T>> {
    if s.dim != t.dim {
        return Err(Error::DimensionMismatch {
            expected: s.dim,
            got: t.dim,
        });
    }
    let (sn, tn) = (s.by_name(), t.by_name());
    let sk: BTreeSet<&str> = sn.keys().copied().collect();
    let tk: BTreeSet<&str> = tn.keys().copied().collect();
    if sk != tk {
        let diff: Vec<&str> = sk.symmetric_difference(&tk).copied().collect();
        return Err(Error::invalid(format!("class set mismatch: {{{}}}", diff.join(", "))));
    }
    let pairs: Vec<(&str, &ClassStats<T>, &ClassStats<T>)> = sn.iter().map(|(&name, &a)| (name, a, tn[name])).collect();
    let terms: Vec<(String, T)> = pairs
        .into_par_iter()
        .map(|(name, a, b)| Ok((name.to_owned(), frechet_distance(&a.moments, &b.moments)?)))
        .collect::<Result<_>>()?;
    Ok(terms.into_iter().collect())
}

/// Sum of per-class Fréchet distances, reduced in class-name order.
pub fn class_conditional_distance<T: Scalar>(s: &GaussianStats<T>, t: &GaussianStats<T>) -> Result<T> {
    Ok(class_conditional_terms(s, t)?.values().copied().sum())
}

/// Per-class contributions to the three pairwise distances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairTerms {
    pub syn_test: f64,
    pub train_test: f64,
    pub syn_train: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub test: usize,
    pub syn: usize,
}

/// Pairwise distances among train, test and synthetic sets under one
/// feature extractor. An undefined ratio (zero denominator) is NaN in memory
/// and the string `"undefined"` in JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub d_syn_test: f64,
    pub d_train_test: f64,
    pub d_syn_train: f64,
    #[serde(with = "ratio_serde")]
    pub ratio_syn_test_over_train_test: f64,
    #[serde(with = "ratio_serde")]
    pub ratio_syn_test_over_syn_train: f64,
    pub per_class_terms: BTreeMap<String, PairTerms>,
    pub class_counts: BTreeMap<String, SplitCounts>,
}

pub(crate) fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        f64::NAN
    } else {
        num / den
    }
}

pub mod ratio_serde {
    use super::*;

    pub const UNDEFINED: &str = "undefined";

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_str(UNDEFINED)
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) if t == UNDEFINED => Ok(f64::NAN),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("invalid ratio {t:?}"))),
        }
    }
}

/// All three pairwise class-conditional distances and both ratios.
///
/// The test and synthetic sets are re-expressed on the training split's label
/// universe; every class must appear with at least 2 rows in every split.
/// Each split is used in full.
pub fn distance_report<T: Scalar>(
    train: &LabeledEmbeddingSet<T>,
    test: &LabeledEmbeddingSet<T>,
    syn: &LabeledEmbeddingSet<T>,
) -> Result<DistanceReport> {
    let classes = &train.classes;
    let test = test.reindexed(classes)?;
    let syn = syn.reindexed(classes)?;
    let s_train = gaussian_stats(train)?;
    let s_test = gaussian_stats(&test)?;
    let s_syn = gaussian_stats(&syn)?;

    let syn_test = class_conditional_terms(&s_syn, &s_test)?;
    let train_test = class_conditional_terms(&s_train, &s_test)?;
    let syn_train = class_conditional_terms(&s_syn, &s_train)?;

    let total = |m: &BTreeMap<String, T>| m.values().copied().sum::<T>().to_f64_lossy();
    let d_syn_test = total(&syn_test);
    let d_train_test = total(&train_test);
    let d_syn_train = total(&syn_train);

    let per_class_terms = syn_test
        .iter()
        .map(|(name, &v)| {
            (
                name.clone(),
                PairTerms {
                    syn_test: v.to_f64_lossy(),
                    train_test: train_test[name].to_f64_lossy(),
                    syn_train: syn_train[name].to_f64_lossy(),
                },
            )
        })
        .collect();
    let (ct, cs, cy) = (train.class_counts(), test.class_counts(), syn.class_counts());
    let class_counts = classes
        .ids()
        .map(|id| {
            (
                classes.name(id).to_owned(),
                SplitCounts {
                    train: ct[id.index()],
                    test: cs[id.index()],
                    syn: cy[id.index()],
                },
            )
        })
        .collect();

    Ok(DistanceReport {
        d_syn_test,
        d_train_test,
        d_syn_train,
        ratio_syn_test_over_train_test: ratio(d_syn_test, d_train_test),
        ratio_syn_test_over_syn_train: ratio(d_syn_test, d_syn_train),
        per_class_terms,
        class_counts,
    })
}

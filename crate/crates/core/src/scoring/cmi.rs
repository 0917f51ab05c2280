//! Conditional mutual information between the sign of pairwise differences
//! of a complexity measure and of the generalization gap, conditioned on
//! hyperparameter values.
//!
//! Each unordered model pair `i < j` contributes one row
//! `(sign(mu_i - mu_j), sign(g_i - g_j), key)`, where the key is the unordered
//! pair of the two models' values on the conditioning hyperparameters. Pairs
//! with a zero sign are dropped and counted. The estimate is the plug-in
//! `sum_u p(u) sum_{a,b} p(a,b|u) log2(p(a,b|u) / (p(a|u) p(b|u)))`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::datamodel::{HParamValue, ModelRecord};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Sign {
    Neg,
    Pos,
}

impl Sign {
    pub fn of<T: Scalar>(diff: T) -> Option<Sign> {
        if diff > T::zero() {
            Some(Sign::Pos)
        } else if diff < T::zero() {
            Some(Sign::Neg)
        } else {
            None
        }
    }

    fn index(self) -> usize {
        match self {
            Sign::Neg => 0,
            Sign::Pos => 1,
        }
    }
}

/// Unordered pair of hyperparameter value tuples, stored smaller-first.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ConditionKey(pub Vec<HParamValue>, pub Vec<HParamValue>);

impl ConditionKey {
    pub fn new(a: Vec<HParamValue>, b: Vec<HParamValue>) -> Self {
        if a <= b {
            ConditionKey(a, b)
        } else {
            ConditionKey(b, a)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairSign {
    pub v_mu: Sign,
    pub v_g: Sign,
    pub u_s: ConditionKey,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PairSignTable {
    pub rows: Vec<PairSign>,
    pub dropped_ties: usize,
}

pub fn build_pair_sign_table<T: Scalar>(
    models: &[ModelRecord],
    mu: &[T],
    g: &[T],
    condition_on: &[&str],
) -> Result<PairSignTable> {
    if mu.len() != models.len() || g.len() != models.len() {
        return Err(Error::invalid(format!(
            "need one measure and one gap per model: {} models, {} measures, {} gaps",
            models.len(),
            mu.len(),
            g.len()
        )));
    }
    if mu.iter().chain(g).any(|v| !v.is_finite()) {
        return Err(Error::invalid("measures and gaps must be finite"));
    }
    let values: Vec<Vec<HParamValue>> = models
        .iter()
        .map(|m| {
            condition_on
                .iter()
                .map(|&name| {
                    m.hparams
                        .get(name)
                        .cloned()
                        .ok_or_else(|| Error::invalid(format!("model {:?} has no hyperparameter {name:?}", m.model_id)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut table = PairSignTable::default();
    for i in 0..models.len() {
        for j in (i + 1)..models.len() {
            match (Sign::of(mu[i] - mu[j]), Sign::of(g[i] - g[j])) {
                (Some(v_mu), Some(v_g)) => table.rows.push(PairSign {
                    v_mu,
                    v_g,
                    u_s: ConditionKey::new(values[i].clone(), values[j].clone()),
                }),
                _ => table.dropped_ties += 1,
            }
        }
    }
    if table.rows.is_empty() {
        return Err(Error::invalid(format!(
            "empty conditioning result: all {} model pairs are tied",
            table.dropped_ties
        )));
    }
    Ok(table)
}

/// Plug-in conditional mutual information in bits, clamped at zero.
pub fn conditional_mutual_information(table: &PairSignTable) -> Result<f64> {
    if table.rows.is_empty() {
        return Err(Error::invalid("conditional mutual information of an empty table"));
    }
    let mut groups: BTreeMap<&ConditionKey, [[u64; 2]; 2]> = BTreeMap::new();
    for r in &table.rows {
        groups.entry(&r.u_s).or_default()[r.v_mu.index()][r.v_g.index()] += 1;
    }
    let total = table.rows.len() as f64;
    let mut cmi = 0.0;
    for joint in groups.values() {
        let n_u: u64 = joint.iter().flatten().sum();
        let n_u = n_u as f64;
        let mut mi = 0.0;
        for row in joint {
            let p_a = (row[0] + row[1]) as f64 / n_u;
            for (b, &count) in row.iter().enumerate() {
                if count == 0 {
                    continue;
                }
                let p_b = (joint[0][b] + joint[1][b]) as f64 / n_u;
                let p_ab = count as f64 / n_u;
                mi += p_ab * (p_ab / (p_a * p_b)).log2();
            }
        }
        cmi += n_u / total * mi;
    }
    Ok(cmi.max(0.0))
}

/// CMI of a measure against the true generalization gap, conditioned on each
/// single hyperparameter in turn.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CmiScore {
    pub per_hparam: BTreeMap<String, f64>,
    /// Minimum over `per_hparam`; the unconditional MI when there are no
    /// hyperparameters.
    pub min: f64,
    pub dropped_ties: usize,
}

/// Scores `mu` (one value per model, larger meaning a larger predicted gap)
/// against `train_acc - test_acc`. Every model needs `test_acc`.
pub fn cmi_score<T: Scalar>(models: &[ModelRecord], mu: &[T]) -> Result<CmiScore> {
    let gaps: Vec<f64> = models
        .iter()
        .map(|m| {
            m.test_acc
                .map(|t| m.train_acc - t)
                .ok_or_else(|| Error::invalid(format!("model {:?} has no test_acc", m.model_id)))
        })
        .collect::<Result<_>>()?;
    let mu: Vec<f64> = mu.iter().map(|v| v.to_f64_lossy()).collect();
    let names: Vec<&str> = models
        .first()
        .map(|m| m.hparams.keys().map(String::as_str).collect())
        .unwrap_or_default();

    let unconditional = build_pair_sign_table(models, &mu, &gaps, &[])?;
    let mut per_hparam = BTreeMap::new();
    for name in &names {
        let table = build_pair_sign_table(models, &mu, &gaps, &[name])?;
        per_hparam.insert((*name).to_owned(), conditional_mutual_information(&table)?);
    }
    let min = if per_hparam.is_empty() {
        conditional_mutual_information(&unconditional)?
    } else {
        per_hparam.values().copied().fold(f64::INFINITY, f64::min)
    };
    Ok(CmiScore {
        per_hparam,
        min,
        dropped_ties: unconditional.dropped_ties,
    })
}

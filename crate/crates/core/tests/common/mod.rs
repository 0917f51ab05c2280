#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use synacc::datamodel::{ClassId, ClassSet, EmbeddingRow, LabeledEmbeddingSet, Split};
use synacc::numerics::{Matrix, SymMatrix};

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `B B^T / n` for a Gaussian `n x n` matrix `B`, optionally rank-deficient.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> SymMatrix<f64> {
    let b = Matrix::from_fn(n, rank, |_, _| normal(rng));
    let mut m = b.matmul(&b.transpose()).unwrap();
    for v in m.as_mut_slice() {
        *v /= n as f64;
    }
    SymMatrix::symmetrize(m)
}

/// Labeled set with `per_class[c]` rows of class `c`, entries `N(offset_c, scale_c^2)`.
pub fn random_set(rng: &mut ChaCha8Rng, split: Split, dim: usize, per_class: &[usize]) -> LabeledEmbeddingSet<f64> {
    let names: Vec<String> = (0..per_class.len()).map(|c| format!("k{c}")).collect();
    let classes = ClassSet::from_labels(&names);
    let mut rows = Vec::new();
    for (c, &n) in per_class.iter().enumerate() {
        let offset = rng.random_range(-3.0..3.0);
        let scale = rng.random_range(0.2..2.0);
        for _ in 0..n {
            rows.push(EmbeddingRow {
                example_id: format!("{split}{}", rows.len()),
                label: ClassId(c as u32),
                vector: (0..dim).map(|_| offset + scale * normal(rng)).collect(),
            });
        }
    }
    LabeledEmbeddingSet::new(split, dim, classes, rows).unwrap()
}

pub fn with_split(set: &LabeledEmbeddingSet<f64>, split: Split) -> LabeledEmbeddingSet<f64> {
    LabeledEmbeddingSet { split, ..set.clone() }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

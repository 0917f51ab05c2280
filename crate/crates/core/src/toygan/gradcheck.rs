//! Central finite-difference check of `mlp_backward`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::mlp::{mlp_backward, mlp_forward, Activation, MlpParams};
use crate::error::Result;
use crate::seed::rng_for;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheck {
    pub sizes: Vec<usize>,
    pub activation: Activation,
    /// `max |analytic - numeric| / max(|analytic|, |numeric|)` over checked parameters.
    pub max_rel_error: f64,
    pub checked: usize,
    /// Parameters whose analytic gradient is below `1e-8` in magnitude.
    pub skipped: usize,
}

/// Compares the gradient of `sum(outputs)` with respect to every parameter
/// against `(f(p + h) - f(p - h)) / 2h`.
pub fn gradient_check(params: &MlpParams<f64>, input: &[f64], h: f64) -> Result<GradCheck> {
    let (y, cache) = mlp_forward(params, input)?;
    let grads = mlp_backward(params, &cache, &vec![1.0; y.len()])?;
    let analytic: Vec<f64> = grads.values().copied().collect();
    let f = |p: &MlpParams<f64>| -> Result<f64> { Ok(mlp_forward(p, input)?.0.iter().sum()) };

    let mut probe = params.clone();
    let (mut max_rel, mut checked, mut skipped) = (0.0f64, 0, 0);
    for (i, &a) in analytic.iter().enumerate() {
        if a.abs() <= 1e-8 {
            skipped += 1;
            continue;
        }
        let orig = *probe.values().nth(i).expect("index in range");
        *probe.values_mut().nth(i).expect("index in range") = orig + h;
        let up = f(&probe)?;
        *probe.values_mut().nth(i).expect("index in range") = orig - h;
        let down = f(&probe)?;
        *probe.values_mut().nth(i).expect("index in range") = orig;
        let numeric = (up - down) / (2.0 * h);
        max_rel = max_rel.max((a - numeric).abs() / a.abs().max(numeric.abs()));
        checked += 1;
    }
    Ok(GradCheck {
        sizes: params.sizes(),
        activation: params.activation,
        max_rel_error: max_rel,
        checked,
        skipped,
    })
}

/// Random-net checks: each shape in `shapes` with each activation in
/// `activations`, `trials` nets and inputs per combination, step `1e-5`.
pub fn gradcheck_suite(
    shapes: &[Vec<usize>],
    activations: &[Activation],
    trials: usize,
    seed: u64,
) -> Result<Vec<GradCheck>> {
    let mut rng = rng_for(seed, "gradcheck");
    let mut out = Vec::new();
    for sizes in shapes {
        for &act in activations {
            let mut worst: Option<GradCheck> = None;
            for _ in 0..trials {
                let mut p = MlpParams::random(sizes, act, &mut rng)?;
                for b in p.layers.iter_mut().flat_map(|l| l.bias.iter_mut()) {
                    *b = rng.random_range(-0.5..0.5);
                }
                let x: Vec<f64> = (0..sizes[0]).map(|_| StandardNormal.sample(&mut rng)).collect();
                let r = gradient_check(&p, &x, 1e-5)?;
                worst = Some(match worst {
                    Some(w) if w.max_rel_error >= r.max_rel_error => GradCheck {
                        checked: w.checked + r.checked,
                        skipped: w.skipped + r.skipped,
                        ..w
                    },
                    Some(w) => GradCheck {
                        checked: w.checked + r.checked,
                        skipped: w.skipped + r.skipped,
                        ..r
                    },
                    None => r,
                });
            }
            out.extend(worst);
        }
    }
    Ok(out)
}

/// Shapes and activations of the standard suite.
pub fn default_suite(seed: u64) -> Result<Vec<GradCheck>> {
    gradcheck_suite(
        &[vec![2, 8, 8, 1], vec![2, 32, 32, 1]],
        &[Activation::Tanh, Activation::Relu],
        5,
        seed,
    )
}

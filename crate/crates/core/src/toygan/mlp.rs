//! Fully connected networks with hand-written reverse mode.
//!
//! Hidden layers are `act(W x + b)`; the last layer is affine with no
//! activation, so the network emits logits (classifier, discriminator) or raw
//! samples (generator).

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(T::zero()),
            Activation::Identity => x,
        }
    }

    /// Derivative at pre-activation `pre`, given `post = apply(pre)`.
    fn derivative<T: Scalar>(self, pre: T, post: T) -> T {
        match self {
            Activation::Tanh => T::one() - post * post,
            Activation::Relu => {
                if pre > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Identity => T::one(),
        }
    }
}

/// One affine map; `weight` is `out x in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Layer<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            weight: Matrix::zeros(outputs, inputs),
            bias: vec![T::zero(); outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }

    fn values(&self) -> impl Iterator<Item = &T> {
        self.weight.as_slice().iter().chain(&self.bias)
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.weight.as_mut_slice().iter_mut().chain(&mut self.bias)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams<T> {
    pub layers: Vec<Layer<T>>,
    pub activation: Activation,
}

impl<T: Scalar> MlpParams<T> {
    /// Checks that layer shapes chain and that every entry is finite.
    pub fn new(layers: Vec<Layer<T>>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("network needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() {
                return Err(Error::invalid(format!(
                    "layer {i}: bias has {} entries for {} outputs",
                    l.bias.len(),
                    l.outputs()
                )));
            }
            if i > 0 && layers[i - 1].outputs() != l.inputs() {
                return Err(Error::invalid(format!(
                    "layer {i} expects {} inputs but layer {} emits {}",
                    l.inputs(),
                    i - 1,
                    layers[i - 1].outputs()
                )));
            }
            if l.values().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("layer {i} has non-finite parameters")));
            }
        }
        Ok(MlpParams { layers, activation })
    }

    /// All-zero network with layer widths `sizes` (input first, output last).
    pub fn zeros(sizes: &[usize], activation: Activation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::invalid(format!("invalid layer sizes {sizes:?}")));
        }
        let layers = sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        MlpParams::new(layers, activation)
    }

    /// Gaussian weights with variance `gain / fan_in` (gain 2 for relu, 1
    /// otherwise) and zero biases.
    pub fn random<R: Rng + ?Sized>(sizes: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(sizes, activation)?;
        let gain = if activation == Activation::Relu { 2.0 } else { 1.0 };
        for l in &mut p.layers {
            let std = (gain / l.inputs() as f64).sqrt();
            for w in l.weight.as_mut_slice() {
                let z: f64 = StandardNormal.sample(rng);
                *w = T::lit(z * std);
            }
        }
        Ok(p)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    /// Layer widths, input first.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Layer::outputs))
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.as_slice().len() + l.bias.len())
            .sum()
    }

    /// Parameters in a fixed order: per layer, the weights row-major, then the bias.
    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.layers.iter().flat_map(Layer::values)
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.layers.iter_mut().flat_map(Layer::values_mut)
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }
}

/// Per-layer pre- and post-activations from one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpCache<T> {
    pub input: Vec<T>,
    pub pre: Vec<Vec<T>>,
    pub post: Vec<Vec<T>>,
}

impl<T: Scalar> MlpCache<T> {
    pub fn output(&self) -> &[T] {
        self.post.last().expect("at least one layer")
    }
}

pub fn mlp_forward<T: Scalar>(params: &MlpParams<T>, input: &[T]) -> Result<(Vec<T>, MlpCache<T>)> {
    if input.len() != params.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.input_dim(),
            got: input.len(),
        });
    }
    let last = params.layers.len() - 1;
    let mut pre = Vec::with_capacity(params.layers.len());
    let mut post: Vec<Vec<T>> = Vec::with_capacity(params.layers.len());
    for (li, layer) in params.layers.iter().enumerate() {
        let x = if li == 0 { input } else { &post[li - 1] };
        let z = affine(layer, x);
        let a = if li == last {
            z.clone()
        } else {
            z.iter().map(|&v| params.activation.apply(v)).collect()
        };
        pre.push(z);
        post.push(a);
    }
    let cache = MlpCache {
        input: input.to_vec(),
        pre,
        post,
    };
    Ok((cache.output().to_vec(), cache))
}

fn affine<T: Scalar>(layer: &Layer<T>, x: &[T]) -> Vec<T> {
    let w = layer.weight.as_slice();
    let n_in = layer.inputs();
    layer
        .bias
        .iter()
        .enumerate()
        .map(|(o, &b)| {
            let row = &w[o * n_in..(o + 1) * n_in];
            row.iter().zip(x).fold(b, |acc, (&wi, &xi)| acc + wi * xi)
        })
        .collect()
}

/// Gradients with the same layout as the parameters, plus the input gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads<T> {
    pub layers: Vec<Layer<T>>,
    pub input: Vec<T>,
}

impl<T: Scalar> MlpGrads<T> {
    pub fn zeros_like(params: &MlpParams<T>) -> Self {
        MlpGrads {
            layers: params
                .layers
                .iter()
                .map(|l| Layer::zeros(l.inputs(), l.outputs()))
                .collect(),
            input: vec![T::zero(); params.input_dim()],
        }
    }

    /// Parameter gradients in the order of [`MlpParams::values`].
    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.layers.iter().flat_map(Layer::values)
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.layers.iter_mut().flat_map(Layer::values_mut)
    }

    pub fn scale(&mut self, c: T) {
        for v in self.values_mut() {
            *v *= c;
        }
        for v in &mut self.input {
            *v *= c;
        }
    }
}

pub fn mlp_backward<T: Scalar>(params: &MlpParams<T>, cache: &MlpCache<T>, output_grad: &[T]) -> Result<MlpGrads<T>> {
    let mut grads = MlpGrads::zeros_like(params);
    mlp_backward_acc(params, cache, output_grad, &mut grads)?;
    Ok(grads)
}

/// Adds the parameter gradients into `acc` and overwrites `acc.input` with
/// this sample's input gradient.
pub fn mlp_backward_acc<T: Scalar>(
    params: &MlpParams<T>,
    cache: &MlpCache<T>,
    output_grad: &[T],
    acc: &mut MlpGrads<T>,
) -> Result<()> {
    let n = params.layers.len();
    let shapes_match = cache.pre.len() == n
        && cache.post.len() == n
        && cache.input.len() == params.input_dim()
        && params
            .layers
            .iter()
            .zip(&cache.pre)
            .all(|(l, z)| z.len() == l.outputs());
    if !shapes_match {
        return Err(Error::invalid("forward cache does not match the network"));
    }
    if output_grad.len() != params.output_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.output_dim(),
            got: output_grad.len(),
        });
    }
    if acc.layers.len() != n {
        return Err(Error::invalid("gradient accumulator does not match the network"));
    }

    // delta holds dL/dz for the current layer
    let mut delta = output_grad.to_vec();
    for li in (0..n).rev() {
        let layer = &params.layers[li];
        let x = if li == 0 { &cache.input } else { &cache.post[li - 1] };
        let n_in = layer.inputs();
        let g = &mut acc.layers[li];
        {
            let gw = g.weight.as_mut_slice();
            for (o, &d) in delta.iter().enumerate() {
                g.bias[o] += d;
                for (gwi, &xi) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(x) {
                    *gwi += d * xi;
                }
            }
        }
        let w = layer.weight.as_slice();
        let mut dx = vec![T::zero(); n_in];
        for (o, &d) in delta.iter().enumerate() {
            for (dxi, &wi) in dx.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                *dxi += d * wi;
            }
        }
        if li > 0 {
            let (z, a) = (&cache.pre[li - 1], &cache.post[li - 1]);
            for ((d, &zi), &ai) in dx.iter_mut().zip(z).zip(a) {
                *d *= params.activation.derivative(zi, ai);
            }
        }
        delta = dx;
    }
    acc.input = delta;
    Ok(())
}
